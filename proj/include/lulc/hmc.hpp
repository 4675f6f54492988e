#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace lulc {

// Log density and, when the pointer is non-null, its gradient.
using LogDensityFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct HmcOptions {
  int chains = 4;
  int tune = 2000;
  int draws = 2000;
  double target_accept = 0.9;
  int leapfrog_steps = 32;
  std::uint64_t seed = 0;
  int workers = 0;
  double divergence_threshold = 1000.0;  // energy error that marks a divergence
  double max_divergence_rate = 0.25;
  double init_radius = 2.0;  // chains start uniform in [-r, r] per coordinate
};

struct HmcChain {
  std::vector<Eigen::VectorXd> draws;
  double step_size = 0.0;
  Eigen::VectorXd inv_mass;
  double accept_rate = 0.0;  // mean Metropolis acceptance probability after tuning
  int divergences = 0;       // after tuning
};

struct HmcResult {
  std::vector<HmcChain> chains;
};

// Fixed-length HMC. Tuning uses dual averaging of the step size toward the
// target acceptance and windowed estimation of a diagonal inverse mass matrix.
// Chain c uses seed stream c. Throws NumericalError when the post-tuning
// divergence rate exceeds the limit.
HmcResult hmc_sample(const LogDensityFn& log_density, int dimension, const HmcOptions& options,
                     const std::vector<Eigen::VectorXd>& inits = {});

}  // namespace lulc
