#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lulc/raster.hpp"

namespace lulc {

// 4-adjacency structure of an H x W grid with the spectrum of
// D^-1/2 Q D^-1/2, so log|D - rho Q| = log|D| + sum log(1 - rho lambda_i).
struct CarStructure {
  int height = 0;
  int width = 0;
  int N = 0;
  std::vector<std::vector<int>> neighbors;
  Eigen::VectorXd degree;
  Eigen::VectorXd eigenvalues;
  double log_det_degree = 0.0;

  static CarStructure grid(int height, int width);

  // r^T (D - rho Q) r and r^T Q r.
  double quad_degree(const Eigen::VectorXd& r) const;
  double quad_adjacency(const Eigen::VectorXd& r) const;
  // (D - rho Q) r
  Eigen::VectorXd precision_times(const Eigen::VectorXd& r, double rho) const;
  double log_det(double tau, double rho) const;  // log|tau (D - rho Q)|
};

inline constexpr double kRhoEpsilon = 1e-6;

struct SccarParams {
  Eigen::MatrixXd omega;  // N x K latent fields
  Eigen::MatrixXd A;      // K x K correlation
  Eigen::VectorXd m;
  Eigen::VectorXd tau;
  Eigen::VectorXd rho;

  int N() const { return static_cast<int>(omega.rows()); }
  int K() const { return static_cast<int>(omega.cols()); }
};

// Unconstrained layout: standardized fields z_k = (omega_k - m_k) sqrt(tau_k)
// column-major (N*K), m (K), log tau (K),
// logit of the rescaled rho (K), then K(K-1)/2 canonical partial correlations
// in atanh coordinates filling the Cholesky factor of A row by row.
// Standardizing omega removes the funnel between the fields and tau.
int unconstrained_size(int N, int K);
SccarParams constrain(const Eigen::VectorXd& theta, int N, int K, double* log_jacobian = nullptr);
Eigen::VectorXd unconstrain(const SccarParams& params);

struct LogDensityTerms {
  double likelihood = 0.0;
  double car = 0.0;
  double prior_m = 0.0;
  double prior_tau = 0.0;
  double prior_rho = 0.0;
  double prior_A = 0.0;
  double jacobian = 0.0;
  double total = 0.0;
};

// Log posterior in constrained coordinates (no Jacobian term). The CAR term
// treats tau_k (D - rho_k Q) as the precision of omega_k around m_k.
LogDensityTerms log_density(const SccarParams& params, const CategoricalRaster& raster, const PixelMask& mask,
                            const CarStructure& structure);

// Log density in unconstrained coordinates including the Jacobian, with its
// gradient when `grad` is non-null.
double log_posterior(const Eigen::VectorXd& theta, const CategoricalRaster& raster, const PixelMask& mask,
                     const CarStructure& structure, Eigen::VectorXd* grad = nullptr);

// Draw omega from the CAR prior of given parameters (for simulation studies).
Eigen::MatrixXd sample_car_fields(const CarStructure& structure, const Eigen::VectorXd& m, const Eigen::VectorXd& tau,
                                  const Eigen::VectorXd& rho, std::uint64_t seed);
// Class map drawn pixelwise from softmax(omega A).
CategoricalRaster sample_classes(const SccarParams& params, int height, int width, std::uint64_t seed);

// Posterior-predictive completions: each picks a draw uniformly, then samples
// every missing pixel from softmax of its row of omega A. Observed pixels are
// copied.
std::vector<CategoricalRaster> predictive_inpaint(const std::vector<SccarParams>& draws,
                                                  const CategoricalRaster& raster, const PixelMask& mask, int count,
                                                  std::uint64_t seed);

// Flat names of every constrained scalar, in the draw-table order.
std::vector<std::string> parameter_names(int N, int K);
Eigen::VectorXd flatten(const SccarParams& params);
SccarParams unflatten(const Eigen::VectorXd& flat, int N, int K);

}  // namespace lulc
