#pragma once

#include <string>
#include <vector>

namespace lulc {

// chains[c][t]: draw t of chain c.
using ChainDraws = std::vector<std::vector<double>>;

// Split-chain potential scale reduction, sqrt(1 + B / (n W)) over the 2m
// half-chains of length n. Zero within-chain variance gives NaN when all
// half-chains agree and +inf when they sit at different constants.
double rhat(const ChainDraws& chains);

// Effective sample size from the multi-chain autocorrelation, summed over
// Geyer's initial positive, monotone sequence of pair sums.
double ess(const ChainDraws& chains);

struct ParameterSummary {
  std::string name;
  double rhat = 0.0;
  double ess = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

ParameterSummary summarize(const std::string& name, const ChainDraws& chains);

std::string diagnostics_csv(const std::vector<ParameterSummary>& rows);

}  // namespace lulc
