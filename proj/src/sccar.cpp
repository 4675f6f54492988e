#include "lulc/sccar.hpp"

#include <cmath>
#include <numbers>

#include "lulc/error.hpp"
#include "lulc/rng.hpp"

namespace lulc {

CarStructure CarStructure::grid(int height, int width) {
  if (height < 1 || width < 1 || height * width < 2) throw UsageError("CAR grid needs at least two pixels");
  CarStructure s;
  s.height = height;
  s.width = width;
  s.N = height * width;
  s.neighbors.resize(static_cast<std::size_t>(s.N));
  s.degree = Eigen::VectorXd::Zero(s.N);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      auto& nb = s.neighbors[static_cast<std::size_t>(r * width + c)];
      if (r > 0) nb.push_back((r - 1) * width + c);
      if (c > 0) nb.push_back(r * width + c - 1);
      if (c + 1 < width) nb.push_back(r * width + c + 1);
      if (r + 1 < height) nb.push_back((r + 1) * width + c);
      s.degree(r * width + c) = static_cast<double>(nb.size());
    }
  Eigen::MatrixXd normalized = Eigen::MatrixXd::Zero(s.N, s.N);
  for (int i = 0; i < s.N; ++i)
    for (int j : s.neighbors[static_cast<std::size_t>(i)])
      normalized(i, j) = 1.0 / std::sqrt(s.degree(i) * s.degree(j));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("CAR structure: eigendecomposition failed");
  s.eigenvalues = eig.eigenvalues();
  s.log_det_degree = s.degree.array().log().sum();
  return s;
}

double CarStructure::quad_degree(const Eigen::VectorXd& r) const { return (degree.array() * r.array().square()).sum(); }

double CarStructure::quad_adjacency(const Eigen::VectorXd& r) const {
  double s = 0.0;
  for (int i = 0; i < N; ++i) {
    double t = 0.0;
    for (int j : neighbors[static_cast<std::size_t>(i)]) t += r(j);
    s += r(i) * t;
  }
  return s;
}

Eigen::VectorXd CarStructure::precision_times(const Eigen::VectorXd& r, double rho) const {
  Eigen::VectorXd out(N);
  for (int i = 0; i < N; ++i) {
    double t = 0.0;
    for (int j : neighbors[static_cast<std::size_t>(i)]) t += r(j);
    out(i) = degree(i) * r(i) - rho * t;
  }
  return out;
}

double CarStructure::log_det(double tau, double rho) const {
  return N * std::log(tau) + log_det_degree + (1.0 - rho * eigenvalues.array()).log().sum();
}

int unconstrained_size(int N, int K) { return N * K + 3 * K + K * (K - 1) / 2; }

namespace {

// Value plus one directional derivative.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};
Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator*(double a, Dual b) { return {a * b.v, a * b.d}; }
Dual& operator+=(Dual& a, Dual b) { return a = a + b; }
Dual sqrt(Dual a) {
  const double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
Dual tanh(Dual a) {
  const double t = std::tanh(a.v);
  return {t, a.d * (1.0 - t * t)};
}

// Cholesky factor of a correlation matrix from unconstrained coordinates, with
// the log-Jacobian of y -> L and the LKJ(1) density of L, which together make A
// uniform over correlation matrices.
template <class S>
void cholesky_from_unconstrained(const S* y, int K, std::vector<S>& L, S& log_jac) {
  using std::log, std::sqrt, std::tanh;
  L.assign(static_cast<std::size_t>(K * K), S{});
  auto at = [&](int i, int j) -> S& { return L[static_cast<std::size_t>(i * K + j)]; };
  at(0, 0) = S{1.0};
  int idx = 0;
  for (int i = 1; i < K; ++i) {
    S z = tanh(y[idx++]);
    log_jac += log(S{1.0} - z * z);
    at(i, 0) = z;
    S sum_sqs = z * z;
    for (int j = 1; j < i; ++j) {
      S zj = tanh(y[idx++]);
      log_jac += log(S{1.0} - zj * zj);
      log_jac += 0.5 * log(S{1.0} - sum_sqs);
      at(i, j) = zj * sqrt(S{1.0} - sum_sqs);
      sum_sqs += at(i, j) * at(i, j);
    }
    at(i, i) = sqrt(S{1.0} - sum_sqs);
    log_jac += static_cast<double>(K - i - 1) * log(at(i, i));
  }
}

double log_sigmoid(double t) { return t >= 0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t)); }
double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

struct Layout {
  int N, K;
  int m() const { return N * K; }
  int tau() const { return N * K + K; }
  int rho() const { return N * K + 2 * K; }
  int corr() const { return N * K + 3 * K; }
};

SccarParams constrain_impl(const Eigen::VectorXd& theta, int N, int K, double* log_jacobian, Eigen::MatrixXd* L_out) {
  if (N < 1 || K < 2) throw UsageError("SCCAR needs N >= 1 and K >= 2");
  if (theta.size() != unconstrained_size(N, K)) throw UsageError("unconstrained vector has the wrong length");
  const Layout lay{N, K};
  SccarParams p;
  p.m = theta.segment(lay.m(), K);
  p.tau = theta.segment(lay.tau(), K).array().exp();
  p.omega = Eigen::Map<const Eigen::MatrixXd>(theta.data(), N, K);
  p.rho.resize(K);
  double jac = 0.0;
  for (int k = 0; k < K; ++k) {
    p.omega.col(k) = (p.omega.col(k) / std::sqrt(p.tau(k))).array() + p.m(k);
    const double t = theta(lay.rho() + k);
    p.rho(k) = kRhoEpsilon + (1.0 - 2.0 * kRhoEpsilon) * sigmoid(t);
    jac += (1.0 - 0.5 * N) * theta(lay.tau() + k);
    jac += std::log1p(-2.0 * kRhoEpsilon) + log_sigmoid(t) + log_sigmoid(-t);
  }
  std::vector<double> L;
  cholesky_from_unconstrained(theta.data() + lay.corr(), K, L, jac);
  Eigen::MatrixXd Lm(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) Lm(i, j) = L[static_cast<std::size_t>(i * K + j)];
  p.A = Lm * Lm.transpose();
  p.A.diagonal().setOnes();
  if (log_jacobian) *log_jacobian = jac;
  if (L_out) *L_out = Lm;
  return p;
}

void check_finite(double v, const char* component) {
  if (!std::isfinite(v)) throw NumericalError(std::string("SCCAR log posterior: non-finite ") + component + " term");
}

void check_params(const SccarParams& p, const CarStructure& s) {
  const int K = p.K();
  if (p.N() != s.N) throw UsageError("SCCAR parameters do not match the grid size");
  if (p.A.rows() != K || p.A.cols() != K || p.m.size() != K || p.tau.size() != K || p.rho.size() != K)
    throw UsageError("SCCAR parameter shapes are inconsistent");
}

Eigen::MatrixXd logit_residual(const Eigen::MatrixXd& U, const CategoricalRaster& raster, const PixelMask& mask,
                               double* loglik) {
  const int N = static_cast<int>(U.rows()), K = static_cast<int>(U.cols());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, K);
  double ll = 0.0;
  for (int i = 0; i < N; ++i) {
    if (!mask.observed(static_cast<std::size_t>(i))) continue;
    const int x = raster[static_cast<std::size_t>(i)];
    const double mx = U.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (U.row(i).array() - mx).exp();
    const double z = e.sum();
    ll += U(i, x) - mx - std::log(z);
    G.row(i) = -e / z;
    G(i, x) += 1.0;
  }
  if (loglik) *loglik = ll;
  return G;
}

void check_data(const CategoricalRaster& raster, const PixelMask& mask, const CarStructure& s, int K) {
  require_same_shape(raster, mask);
  if (raster.height() != s.height || raster.width() != s.width)
    throw UsageError("SCCAR data does not match the grid");
  for (std::size_t i = 0; i < raster.size(); ++i)
    if (mask.observed(i) && raster[i] >= K)
      throw FormatError(FormatErrorKind::ClassIndexOutOfRange, "observed class exceeds K");
}

}  // namespace

SccarParams constrain(const Eigen::VectorXd& theta, int N, int K, double* log_jacobian) {
  return constrain_impl(theta, N, K, log_jacobian, nullptr);
}

Eigen::VectorXd unconstrain(const SccarParams& p) {
  const int N = p.N(), K = p.K();
  const Layout lay{N, K};
  Eigen::VectorXd theta(unconstrained_size(N, K));
  theta.segment(lay.m(), K) = p.m;
  for (int k = 0; k < K; ++k) {
    if (!(p.tau(k) > 0.0)) throw UsageError("tau must be positive");
    theta.segment(k * N, N) = (p.omega.col(k).array() - p.m(k)) * std::sqrt(p.tau(k));
    if (!(p.rho(k) > kRhoEpsilon && p.rho(k) < 1.0 - kRhoEpsilon)) throw UsageError("rho outside (eps, 1 - eps)");
    theta(lay.tau() + k) = std::log(p.tau(k));
    const double s = (p.rho(k) - kRhoEpsilon) / (1.0 - 2.0 * kRhoEpsilon);
    theta(lay.rho() + k) = std::log(s) - std::log1p(-s);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(p.A);
  if (llt.info() != Eigen::Success) throw UsageError("A is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  int idx = lay.corr();
  for (int i = 1; i < K; ++i) {
    double sum_sqs = 0.0;
    for (int j = 0; j < i; ++j) {
      const double z = j == 0 ? L(i, 0) : L(i, j) / std::sqrt(1.0 - sum_sqs);
      theta(idx++) = std::atanh(z);
      sum_sqs += L(i, j) * L(i, j);
    }
  }
  return theta;
}

LogDensityTerms log_density(const SccarParams& p, const CategoricalRaster& raster, const PixelMask& mask,
                            const CarStructure& s) {
  check_params(p, s);
  const int N = p.N(), K = p.K();
  check_data(raster, mask, s, K);
  LogDensityTerms t;
  logit_residual(p.omega * p.A, raster, mask, &t.likelihood);
  check_finite(t.likelihood, "likelihood");
  for (int k = 0; k < K; ++k) {
    const double tau = p.tau(k), rho = p.rho(k);
    if (!(tau > 0.0)) throw NumericalError("SCCAR log posterior: tau must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw NumericalError("SCCAR log posterior: rho outside [0, 1)");
    const Eigen::VectorXd r = p.omega.col(k).array() - p.m(k);
    const double quad = s.quad_degree(r) - rho * s.quad_adjacency(r);
    t.car += -0.5 * N * std::log(2.0 * std::numbers::pi) + 0.5 * s.log_det(tau, rho) - 0.5 * tau * quad;
    t.prior_m += -0.5 * std::log(4.0 * std::numbers::pi) - p.m(k) * p.m(k) / 4.0;
    t.prior_tau += std::log(2.0 / (std::numbers::pi * (4.0 + tau * tau)));
  }
  check_finite(t.car, "CAR");
  check_finite(t.prior_m, "m prior");
  check_finite(t.prior_tau, "tau prior");
  t.total = t.likelihood + t.car + t.prior_m + t.prior_tau + t.prior_rho + t.prior_A;
  return t;
}

double log_posterior(const Eigen::VectorXd& theta, const CategoricalRaster& raster, const PixelMask& mask,
                     const CarStructure& s, Eigen::VectorXd* grad) {
  const int N = s.N;
  const int total = static_cast<int>(theta.size());
  int K = 2;
  while (unconstrained_size(N, K) < total) ++K;
  if (unconstrained_size(N, K) != total) throw UsageError("unconstrained vector length does not match the grid");

  double log_jac = 0.0;
  Eigen::MatrixXd L;
  const SccarParams p = constrain_impl(theta, N, K, &log_jac, &L);
  const LogDensityTerms terms = log_density(p, raster, mask, s);
  check_finite(log_jac, "Jacobian");
  const double value = terms.total + log_jac;
  if (!grad) return value;

  const Layout lay{N, K};
  grad->setZero(total);
  // Centred gradients first, then through omega = m + z / sqrt(tau).
  const Eigen::MatrixXd G = logit_residual(p.omega * p.A, raster, mask, nullptr);
  const Eigen::MatrixXd g_lik = G * p.A.transpose();
  Eigen::Map<Eigen::MatrixXd> d_z(grad->data(), N, K);
  for (int k = 0; k < K; ++k) {
    const double tau = p.tau(k), rho = p.rho(k);
    const Eigen::VectorXd r = p.omega.col(k).array() - p.m(k);
    const Eigen::VectorXd pr = s.precision_times(r, rho);
    const Eigen::VectorXd g_omega = g_lik.col(k) - tau * pr;
    d_z.col(k) = g_omega / std::sqrt(tau);
    (*grad)(lay.m() + k) = g_lik.col(k).sum() - p.m(k) / 2.0;
    const double quad = r.dot(pr);
    const double d_tau = N / (2.0 * tau) - 0.5 * quad - 2.0 * tau / (4.0 + tau * tau);
    (*grad)(lay.tau() + k) = tau * d_tau - 0.5 * g_omega.dot(r) + 1.0 - 0.5 * N;
    const double t = theta(lay.rho() + k);
    const double sg = sigmoid(t);
    const double d_rho =
        -0.5 * (s.eigenvalues.array() / (1.0 - rho * s.eigenvalues.array())).sum() + 0.5 * tau * s.quad_adjacency(r);
    (*grad)(lay.rho() + k) = d_rho * (1.0 - 2.0 * kRhoEpsilon) * sg * (1.0 - sg) + (1.0 - 2.0 * sg);
  }

  // A = L L^T: d/dL = (G_A + G_A^T) L, pushed through the Cholesky
  // construction one coordinate at a time in forward mode.
  const Eigen::MatrixXd GA = p.omega.transpose() * G;
  const Eigen::MatrixXd GL = (GA + GA.transpose()) * L;
  const int M = K * (K - 1) / 2;
  std::vector<Dual> y(static_cast<std::size_t>(M));
  std::vector<Dual> Ld;
  for (int d = 0; d < M; ++d) {
    for (int i = 0; i < M; ++i) y[static_cast<std::size_t>(i)] = {theta(lay.corr() + i), i == d ? 1.0 : 0.0};
    Dual jac{};
    cholesky_from_unconstrained(y.data(), K, Ld, jac);
    double g = jac.d;
    for (int i = 0; i < K; ++i)
      for (int j = 0; j <= i; ++j) g += GL(i, j) * Ld[static_cast<std::size_t>(i * K + j)].d;
    (*grad)(lay.corr() + d) = g;
  }
  if (!grad->allFinite()) throw NumericalError("SCCAR log posterior: non-finite gradient");
  return value;
}

Eigen::MatrixXd sample_car_fields(const CarStructure& s, const Eigen::VectorXd& m, const Eigen::VectorXd& tau,
                                  const Eigen::VectorXd& rho, std::uint64_t seed) {
  const int K = static_cast<int>(m.size());
  Eigen::MatrixXd omega(s.N, K);
  Rng rng(seed);
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(s.N, s.N);
    for (int i = 0; i < s.N; ++i) {
      P(i, i) = tau(k) * s.degree(i);
      for (int j : s.neighbors[static_cast<std::size_t>(i)]) P(i, j) = -tau(k) * rho(k);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) throw NumericalError("CAR precision is not positive definite");
    Eigen::VectorXd e(s.N);
    for (int i = 0; i < s.N; ++i) e(i) = rng.normal();
    // P = L L^T, so x = L^-T e has covariance P^-1.
    omega.col(k) = llt.matrixU().solve(e).array() + m(k);
  }
  return omega;
}

CategoricalRaster sample_classes(const SccarParams& params, int height, int width, std::uint64_t seed) {
  const Eigen::MatrixXd U = params.omega * params.A;
  const int K = params.K();
  CategoricalRaster out(height, width, K);
  Rng rng(seed);
  std::vector<double> p(static_cast<std::size_t>(K));
  for (int i = 0; i < height * width; ++i) {
    const double mx = U.row(i).maxCoeff();
    for (int k = 0; k < K; ++k) p[static_cast<std::size_t>(k)] = std::exp(U(i, k) - mx);
    out.set(i / width, i % width, static_cast<std::uint8_t>(rng.categorical(std::span<const double>(p))));
  }
  return out;
}

std::vector<CategoricalRaster> predictive_inpaint(const std::vector<SccarParams>& draws,
                                                  const CategoricalRaster& raster, const PixelMask& mask, int count,
                                                  std::uint64_t seed) {
  if (draws.empty()) throw UsageError("predictive_inpaint: no posterior draws");
  if (count < 1) throw UsageError("predictive_inpaint: count must be at least 1");
  require_same_shape(raster, mask);
  const int K = draws.front().K();
  if (draws.front().N() != static_cast<int>(raster.size())) throw UsageError("predictive_inpaint: draw size mismatch");
  std::vector<CategoricalRaster> out;
  std::vector<double> p(static_cast<std::size_t>(K));
  for (int c = 0; c < count; ++c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const SccarParams& d = draws[rng.below(draws.size())];
    CategoricalRaster done(raster.height(), raster.width(), K,
                           std::vector<std::uint8_t>(raster.data().begin(), raster.data().end()));
    for (std::size_t i = 0; i < raster.size(); ++i) {
      if (mask.observed(i)) continue;
      const Eigen::RowVectorXd u = d.omega.row(static_cast<Eigen::Index>(i)) * d.A;
      const double mx = u.maxCoeff();
      for (int k = 0; k < K; ++k) p[static_cast<std::size_t>(k)] = std::exp(u(k) - mx);
      done.set(static_cast<int>(i) / raster.width(), static_cast<int>(i) % raster.width(),
               static_cast<std::uint8_t>(rng.categorical(std::span<const double>(p))));
    }
    out.push_back(std::move(done));
  }
  return out;
}

std::vector<std::string> parameter_names(int N, int K) {
  std::vector<std::string> names;
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < K; ++k) names.push_back("omega[" + std::to_string(i) + "," + std::to_string(k) + "]");
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) names.push_back("A[" + std::to_string(j) + "," + std::to_string(k) + "]");
  for (const char* v : {"m", "tau", "rho"})
    for (int k = 0; k < K; ++k) names.push_back(std::string(v) + "[" + std::to_string(k) + "]");
  return names;
}

Eigen::VectorXd flatten(const SccarParams& p) {
  const int N = p.N(), K = p.K();
  Eigen::VectorXd out(N * K + K * K + 3 * K);
  int at = 0;
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < K; ++k) out(at++) = p.omega(i, k);
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) out(at++) = p.A(j, k);
  for (const Eigen::VectorXd* v : {&p.m, &p.tau, &p.rho})
    for (int k = 0; k < K; ++k) out(at++) = (*v)(k);
  return out;
}

SccarParams unflatten(const Eigen::VectorXd& flat, int N, int K) {
  if (flat.size() != N * K + K * K + 3 * K) throw FormatError(FormatErrorKind::DimensionMismatch, "draw row length");
  SccarParams p;
  p.omega.resize(N, K);
  p.A.resize(K, K);
  p.m.resize(K);
  p.tau.resize(K);
  p.rho.resize(K);
  int at = 0;
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < K; ++k) p.omega(i, k) = flat(at++);
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) p.A(j, k) = flat(at++);
  for (Eigen::VectorXd* v : {&p.m, &p.tau, &p.rho})
    for (int k = 0; k < K; ++k) (*v)(k) = flat(at++);
  return p;
}

}  // namespace lulc
