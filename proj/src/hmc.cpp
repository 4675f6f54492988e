#include "lulc/hmc.hpp"

#include <cmath>
#include <string>

#include <omp.h>

#include "lulc/error.hpp"
#include "lulc/rng.hpp"

namespace lulc {

namespace {

struct DualAveraging {
  double mu = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int t = 0;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps_bar = 0.0;
    h_bar = 0.0;
    t = 0;
  }

  double update(double accept, double target) {
    constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    ++t;
    const double eta = 1.0 / (t + t0);
    h_bar = (1.0 - eta) * h_bar + eta * (target - accept);
    const double log_eps = mu - std::sqrt(static_cast<double>(t)) / gamma * h_bar;
    const double w = std::pow(static_cast<double>(t), -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }

  double final_step() const { return std::exp(log_eps_bar); }
};

struct State {
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  double logp = 0.0;
};

struct Transition {
  double accept_prob = 0.0;
  bool divergent = false;
};

class Chain {
 public:
  Chain(const LogDensityFn& f, const HmcOptions& opt, Eigen::VectorXd x0, std::uint64_t seed)
      : f_(f), opt_(opt), rng_(seed) {
    state_.x = std::move(x0);
    state_.logp = f_(state_.x, &state_.grad);
    if (!std::isfinite(state_.logp)) throw NumericalError("HMC: non-finite log density at the initial point");
    inv_mass_ = Eigen::VectorXd::Ones(state_.x.size());
  }

  // Kinetic energy uses momentum p ~ N(0, M), M = diag(1 / inv_mass).
  Transition step(double eps, int steps) {
    const Eigen::Index d = state_.x.size();
    Eigen::VectorXd p(d);
    for (Eigen::Index i = 0; i < d; ++i) p(i) = rng_.normal() / std::sqrt(inv_mass_(i));
    const double h0 = -state_.logp + 0.5 * (p.array().square() * inv_mass_.array()).sum();
    State next = state_;
    double h1 = INFINITY;
    try {
      p += 0.5 * eps * next.grad;
      for (int l = 0; l < steps; ++l) {
        next.x += eps * (inv_mass_.array() * p.array()).matrix();
        next.logp = f_(next.x, &next.grad);
        if (!std::isfinite(next.logp)) break;
        p += (l + 1 == steps ? 0.5 : 1.0) * eps * next.grad;
      }
      if (std::isfinite(next.logp)) h1 = -next.logp + 0.5 * (p.array().square() * inv_mass_.array()).sum();
    } catch (const NumericalError&) {
      h1 = INFINITY;
    }
    const double delta = h1 - h0;
    Transition t;
    if (!std::isfinite(delta) || delta > opt_.divergence_threshold) {
      t.divergent = true;
      return t;
    }
    t.accept_prob = delta <= 0.0 ? 1.0 : std::exp(-delta);
    if (rng_.uniform() < t.accept_prob) state_ = std::move(next);
    return t;
  }

  // Doubles or halves a unit-trajectory step until the acceptance crosses 1/2.
  double reasonable_step(double eps) {
    const State saved = state_;
    auto accept = [&](double e) {
      const Transition t = step(e, 1);
      state_ = saved;
      return t.divergent ? 0.0 : t.accept_prob;
    };
    double a = accept(eps);
    const int direction = a > 0.5 ? 1 : -1;
    for (int i = 0; i < 100; ++i) {
      if (direction == 1 ? a <= 0.5 : a > 0.5) break;
      eps = direction == 1 ? eps * 2.0 : eps / 2.0;
      a = accept(eps);
    }
    return eps;
  }

  HmcChain run() {
    HmcChain out;
    const int tune = opt_.tune;
    const auto windows = adaptation_windows(tune);
    DualAveraging da;
    double eps = reasonable_step(1.0);
    da.restart(eps);
    std::size_t w = 0;
    std::vector<Eigen::VectorXd> window_draws;
    for (int it = 0; it < tune; ++it) {
      const Transition t = step(jitter(eps), opt_.leapfrog_steps);
      eps = da.update(t.accept_prob, opt_.target_accept);
      if (w < windows.size() && it >= windows[w].first && it < windows[w].second) window_draws.push_back(state_.x);
      if (w < windows.size() && it + 1 == windows[w].second) {
        set_mass(window_draws);
        window_draws.clear();
        ++w;
        eps = reasonable_step(eps);
        da.restart(eps);
      }
    }
    if (tune > 0) eps = da.final_step();
    out.step_size = eps;
    out.inv_mass = inv_mass_;
    double accept_sum = 0.0;
    for (int it = 0; it < opt_.draws; ++it) {
      const Transition t = step(jitter(eps), opt_.leapfrog_steps);
      accept_sum += t.accept_prob;
      if (t.divergent) ++out.divergences;
      out.draws.push_back(state_.x);
    }
    out.accept_rate = opt_.draws > 0 ? accept_sum / opt_.draws : 0.0;
    return out;
  }

 private:
  // Uniform +-10% jitter breaks periodic trajectories of fixed length.
  double jitter(double eps) { return eps * (0.9 + 0.2 * rng_.uniform()); }

  static std::vector<std::pair<int, int>> adaptation_windows(int tune) {
    std::vector<std::pair<int, int>> out;
    if (tune < 20) return out;
    int init = 75, term = 50, base = 25;
    if (tune < init + term + base) {
      init = tune * 15 / 100;
      term = tune / 10;
      base = tune - init - term;
    }
    const int end = tune - term;
    int start = init, size = base;
    while (start < end) {
      int stop = start + size;
      if (stop + 2 * size > end) stop = end;
      out.emplace_back(start, stop);
      start = stop;
      size *= 2;
    }
    return out;
  }

  void set_mass(const std::vector<Eigen::VectorXd>& draws) {
    const double n = static_cast<double>(draws.size());
    if (n < 2) return;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(state_.x.size());
    for (const auto& x : draws) mean += x;
    mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(state_.x.size());
    for (const auto& x : draws) var += (x - mean).array().square().matrix();
    var /= (n - 1.0);
    inv_mass_ = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
  }

  const LogDensityFn& f_;
  const HmcOptions& opt_;
  Rng rng_;
  State state_;
  Eigen::VectorXd inv_mass_;
};

}  // namespace

HmcResult hmc_sample(const LogDensityFn& log_density, int dimension, const HmcOptions& options,
                     const std::vector<Eigen::VectorXd>& inits) {
  if (options.chains < 1 || options.draws < 1 || options.tune < 0 || options.leapfrog_steps < 1)
    throw UsageError("HMC: chains, draws and leapfrog steps must be positive");
  if (!(options.target_accept > 0.0 && options.target_accept < 1.0))
    throw UsageError("HMC: target acceptance must be in (0, 1)");
  if (!inits.empty() && static_cast<int>(inits.size()) != options.chains)
    throw UsageError("HMC: one initial point per chain is required");

  HmcResult result;
  result.chains.resize(static_cast<std::size_t>(options.chains));
  std::vector<std::string> errors(result.chains.size());
  const int workers = options.workers > 0 ? options.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int c = 0; c < options.chains; ++c) {
    try {
      const std::uint64_t seed = derive_seed(options.seed, static_cast<std::uint64_t>(c));
      Eigen::VectorXd x0;
      if (inits.empty()) {
        Rng init_rng(derive_seed(seed, 0x696E6974ULL));
        x0.resize(dimension);
        for (int i = 0; i < dimension; ++i) x0(i) = init_rng.uniform(-options.init_radius, options.init_radius);
      } else {
        x0 = inits[static_cast<std::size_t>(c)];
      }
      if (x0.size() != dimension) throw UsageError("HMC: initial point has the wrong dimension");
      Chain chain(log_density, options, std::move(x0), seed);
      result.chains[static_cast<std::size_t>(c)] = chain.run();
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(c)] = e.what();
    }
  }
  for (std::size_t c = 0; c < errors.size(); ++c)
    if (!errors[c].empty()) throw NumericalError("HMC chain " + std::to_string(c) + ": " + errors[c]);

  int divergences = 0;
  for (const auto& ch : result.chains) divergences += ch.divergences;
  const double rate = static_cast<double>(divergences) / (static_cast<double>(options.chains) * options.draws);
  if (rate > options.max_divergence_rate) {
    std::string detail;
    for (std::size_t c = 0; c < result.chains.size(); ++c)
      detail += " chain " + std::to_string(c) + ": " + std::to_string(result.chains[c].divergences) +
                " divergences, step " + std::to_string(result.chains[c].step_size) + ";";
    throw NumericalError("HMC divergence rate " + std::to_string(rate) + " exceeds limit;" + detail);
  }
  return result;
}

}  // namespace lulc
