#include <cmath>

#include <Eigen/Dense>

#include "lulc/error.hpp"
#include "lulc/landstat.hpp"

namespace lulc {

namespace {

double kernel(double dx, double dy, double length_scale) {
  return std::exp(-(dx * dx + dy * dy) / (2.0 * length_scale * length_scale));
}

}  // namespace

std::vector<double> rbf_weights(std::span<const RbfPoint> points, double length_scale) {
  if (points.empty()) throw UsageError("rbf: no points");
  if (!(length_scale > 0.0)) throw UsageError("rbf: length scale must be positive");
  const auto n = static_cast<Eigen::Index>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (points[i].x == points[j].x && points[i].y == points[j].y)
        throw NumericalError("rbf: duplicate point locations make the system singular");
  Eigen::MatrixXd phi(n, n);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = points[static_cast<std::size_t>(i)];
    v(i) = a.value;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& b = points[static_cast<std::size_t>(j)];
      phi(i, j) = kernel(a.x - b.x, a.y - b.y, length_scale);
    }
    phi(i, i) += 1e-8;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(phi);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw NumericalError("rbf: interpolation system is singular");
  const Eigen::VectorXd w = ldlt.solve(v);
  if (!w.allFinite()) throw NumericalError("rbf: non-finite weights");
  return {w.data(), w.data() + n};
}

double rbf_evaluate(std::span<const RbfPoint> points, std::span<const double> weights, double x, double y,
                    double length_scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * kernel(x - points[i].x, y - points[i].y, length_scale);
  return s;
}

std::vector<double> rbf_interpolate(std::span<const RbfPoint> points, const GridSpec& grid, double length_scale) {
  if (grid.rows < 1 || grid.columns < 1) throw UsageError("rbf: empty grid");
  const auto w = rbf_weights(points, length_scale);
  std::vector<double> out(static_cast<std::size_t>(grid.rows) * static_cast<std::size_t>(grid.columns));
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.columns; ++c)
      out[static_cast<std::size_t>(r) * static_cast<std::size_t>(grid.columns) + static_cast<std::size_t>(c)] =
          rbf_evaluate(points, w, grid.x0 + c * grid.dx, grid.y0 + r * grid.dy, length_scale);
  return out;
}

}  // namespace lulc
