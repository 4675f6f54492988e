#include "lulc/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <complex>

#include <unsupported/Eigen/FFT>

#include "lulc/error.hpp"

namespace lulc {

namespace {

void check(const ChainDraws& chains) {
  if (chains.size() < 2) throw UsageError("diagnostics need at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 2) throw UsageError("diagnostics need at least two draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw UsageError("chains must have equal lengths");
}

double mean_of(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s / static_cast<double>(n);
}

double var_of(const double* x, std::size_t n, double mean) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (x[i] - mean) * (x[i] - mean);
  return s / static_cast<double>(n - 1);
}

}  // namespace

double rhat(const ChainDraws& chains) {
  check(chains);
  const std::size_t half = chains.front().size() / 2;
  if (half < 2) throw UsageError("split R-hat needs at least four draws per chain");
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    // An odd middle draw is dropped so both halves have equal length.
    for (const double* start : {c.data(), c.data() + (c.size() - half)}) {
      const double m = mean_of(start, half);
      means.push_back(m);
      vars.push_back(var_of(start, half, m));
    }
  }
  const double M = static_cast<double>(means.size());
  double W = 0.0, grand = 0.0;
  for (std::size_t j = 0; j < means.size(); ++j) {
    W += vars[j];
    grand += means[j];
  }
  W /= M;
  grand /= M;
  double B_over_n = 0.0;
  for (double m : means) B_over_n += (m - grand) * (m - grand);
  B_over_n /= (M - 1.0);
  // Constant chains: identical constants are degenerate, distinct ones never mixed.
  if (W == 0.0) return B_over_n > 0.0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(1.0 + B_over_n / W);
}

double ess(const ChainDraws& chains) {
  check(chains);
  const std::size_t m = chains.size(), n = chains.front().size();
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c].data(), n);
    vars[c] = var_of(chains[c].data(), n, means[c]);
  }
  double W = 0.0, grand = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    W += vars[c];
    grand += means[c];
  }
  W /= static_cast<double>(m);
  grand /= static_cast<double>(m);
  double B_over_n = 0.0;
  for (double mu : means) B_over_n += (mu - grand) * (mu - grand);
  B_over_n /= static_cast<double>(m - 1);
  const double var_plus = W * static_cast<double>(n - 1) / static_cast<double>(n) + B_over_n;
  if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

  // Mean over chains of the biased autocovariance, via zero-padded FFT.
  std::size_t padded = 1;
  while (padded < 2 * n) padded *= 2;
  Eigen::FFT<double> fft;
  std::vector<double> acov(n, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<double> x(padded, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = chains[c][i] - means[c];
    std::vector<std::complex<double>> f;
    fft.fwd(f, x);
    for (auto& v : f) v = std::norm(v);
    std::vector<double> back;
    fft.inv(back, f);
    for (std::size_t t = 0; t < n; ++t) acov[t] += back[t] / static_cast<double>(n) / static_cast<double>(m);
  }
  // rho_t = 1 - (W - mean autocovariance_t) / var_plus
  auto rho = [&](std::size_t lag) { return 1.0 - (W - acov[lag]) / var_plus; };

  double tau = -1.0;
  double prev_pair = INFINITY;
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

ParameterSummary summarize(const std::string& name, const ChainDraws& chains) {
  ParameterSummary s;
  s.name = name;
  s.rhat = rhat(chains);
  s.ess = ess(chains);
  double sum = 0.0, count = 0.0;
  for (const auto& c : chains)
    for (double v : c) {
      sum += v;
      count += 1.0;
    }
  s.mean = sum / count;
  double ss = 0.0;
  for (const auto& c : chains)
    for (double v : c) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (count - 1.0));
  return s;
}

std::string diagnostics_csv(const std::vector<ParameterSummary>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "parameter,rhat,ess_proxy,mean,sd\n";
  for (const auto& r : rows) out << '"' << r.name << "\"," << r.rhat << ',' << r.ess << ',' << r.mean << ',' << r.sd << '\n';
  return out.str();
}

}  // namespace lulc
