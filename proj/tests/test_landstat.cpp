#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lulc/landstat.hpp"
#include "lulc/sampler.hpp"
#include "oracles.hpp"

using namespace lulc;

namespace {

CategoricalRaster checkerboard(int h, int w) {
  CategoricalRaster x(h, w, 2);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) x.set(r, c, static_cast<std::uint8_t>((r + c) % 2));
  return x;
}

CategoricalRaster relabel(const CategoricalRaster& x, const std::vector<std::uint8_t>& perm) {
  std::vector<std::uint8_t> d(x.data().begin(), x.data().end());
  for (auto& v : d) v = perm[v];
  return CategoricalRaster(x.height(), x.width(), x.num_classes(), std::move(d));
}

// Independent-pixel generator: the truth and its completions come from the
// same distribution, so central intervals should cover at their nominal rate.
constexpr double kProbs[4] = {0.4, 0.3, 0.2, 0.1};

std::uint8_t draw_class(Rng& rng) {
  return static_cast<std::uint8_t>(rng.categorical(std::span<const double>(kProbs, 4)));
}

}  // namespace

TEST_CASE("entropy") {
  CHECK(entropy(CategoricalRaster(5, 5, 3, 2)) == 0.0);
  CHECK(entropy(checkerboard(4, 4)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CategoricalRaster four(8, 8, 4);
  for (int i = 0; i < 64; ++i) four.set(i / 8, i % 8, static_cast<std::uint8_t>(i % 4));
  CHECK(entropy(four) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = oracle::random_raster(7, 9, 6, s);
    double counts[6] = {};
    for (std::uint8_t v : x.data()) counts[v] += 1.0;
    double h = 0.0;
    for (double c : counts)
      if (c > 0) h -= c / 63.0 * std::log(c / 63.0);
    CHECK(entropy(x) == doctest::Approx(h).epsilon(1e-12));
    CHECK(entropy(x) <= std::log(6.0) + 1e-12);
  }
}

TEST_CASE("adjacency") {
  CHECK(adjacency(CategoricalRaster(2, 2, 3, 1)) == 8);
  CHECK(adjacency(checkerboard(6, 5)) == 0);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto x = oracle::random_raster(8, 8, 2 + static_cast<int>(s % 4), s);
    REQUIRE(adjacency(x) == oracle::brute_adjacency(x));
  }
}

TEST_CASE("patch count") {
  CHECK(patch_count(CategoricalRaster(4, 6, 3, 2)) == 1);
  CHECK(patch_count(checkerboard(3, 3)) == 9);
  CategoricalRaster ring(5, 5, 2, 1);
  for (int r = 1; r < 4; ++r)
    for (int c = 1; c < 4; ++c) ring.set(r, c, 0);
  ring.set(2, 2, 1);
  CHECK(patch_count(ring) == 3);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto x = oracle::random_raster(8, 8, 2 + static_cast<int>(s % 3), s + 5000);
    REQUIRE(patch_count(x) == oracle::flood_fill_patches(x));
  }
}

TEST_CASE("modal proportion") {
  CHECK(modal_proportion(CategoricalRaster(3, 3, 4, 3)) == 1.0);
  CHECK(modal_proportion(CategoricalRaster(1, 4, 3, std::vector<std::uint8_t>{0, 0, 1, 2})) == 0.5);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = oracle::random_raster(6, 7, 5, s);
    int counts[5] = {};
    for (std::uint8_t v : x.data()) ++counts[v];
    CHECK(modal_proportion(x) == doctest::Approx(*std::max_element(counts, counts + 5) / 42.0).epsilon(1e-12));
  }
}

TEST_CASE("statistic invariants") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    const int H = 1 + static_cast<int>(rng.below(10)), W = 1 + static_cast<int>(rng.below(10));
    const int K = 2 + static_cast<int>(rng.below(4));
    const auto x = oracle::random_raster(H, W, K, s + 99);
    const StatisticVector base = statistics(x);

    std::vector<std::uint8_t> perm(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) perm[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(k);
    rng.shuffle(perm);
    for (const CategoricalRaster& y : {apply(Orientation{true, false}, x), apply(Orientation{false, true}, x),
                                       apply(Orientation{true, true}, x), relabel(x, perm)}) {
      const StatisticVector v = statistics(y);
      CHECK(v.entropy == doctest::Approx(base.entropy).epsilon(1e-12));
      CHECK(v.adjacency == base.adjacency);
      CHECK(v.patch_count == base.patch_count);
      CHECK(v.modal_proportion == base.modal_proportion);
    }

    long mismatched = 0;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        if (c + 1 < W && x.at(r, c) != x.at(r, c + 1)) ++mismatched;
        if (r + 1 < H && x.at(r, c) != x.at(r + 1, c)) ++mismatched;
      }
    CHECK(adjacency(x) / 2 + mismatched == 2 * H * W - H - W);
    CHECK(base.entropy >= 0.0);
    CHECK(base.adjacency <= 2.0 * (2 * H * W - H - W));
    CHECK(base.patch_count >= 1);
    CHECK(base.patch_count <= H * W);
    CHECK(base.modal_proportion > 0.0);
    if (base.modal_proportion == 1.0) CHECK(base.patch_count == 1);
  }
}

TEST_CASE("percentiles") {
  CHECK(percentile({4, 1, 3, 2}, 50) == 2.5);
  CHECK(percentile({4, 1, 3, 2}, 0) == 1.0);
  CHECK(percentile({4, 1, 3, 2}, 100) == 4.0);
  CHECK(percentile({10, 20}, 25) == 12.5);
  CHECK(percentile({7}, 95) == 7.0);
  CHECK_THROWS(percentile({}, 50));
  CHECK_THROWS(percentile({1, 2}, 101));
}

TEST_CASE("coverage of a sampler that returns the truth") {
  std::vector<CoverageTruth> truths;
  for (std::uint64_t s = 0; s < 5; ++s)
    truths.push_back({oracle::random_raster(8, 8, 4, s), PixelMask::with_hole(8, 8, 4, 0, 4, 8)});
  const CompletionSampler identity = [](std::size_t, const CoverageTruth& t, int count, double) {
    return std::vector<CategoricalRaster>(static_cast<std::size_t>(count), t.image);
  };
  const CoverageReport rep = coverage(truths, identity, 20, kDefaultPercentiles, kDefaultTemperatures);
  CHECK(rep.cells.size() == 4 * 3 * 6);
  CHECK(rep.images == 5);
  CHECK(rep.samples_per_image == 20);
  for (const auto& c : rep.cells) CHECK(c.coverage == 1.0);
  CHECK(rep.at(Statistic::Adjacency, 90, 1.1) == 1.0);
  CHECK(rep.csv().rfind("statistic,percentile,temperature,coverage\n", 0) == 0);

  CHECK_THROWS_AS(coverage(truths, identity, 19, kDefaultPercentiles, kDefaultTemperatures), UsageError);

  const CompletionSampler broken = [](std::size_t i, const CoverageTruth&, int, double) -> std::vector<CategoricalRaster> {
    if (i == 3) throw FormatError(FormatErrorKind::ClassIndexOutOfRange, "bad completion");
    return std::vector<CategoricalRaster>(20, CategoricalRaster(8, 8, 4));
  };
  try {
    coverage(truths, broken, 20, kDefaultPercentiles, kDefaultTemperatures);
    FAIL("expected the sampler error to propagate");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatErrorKind::ClassIndexOutOfRange);
    CHECK(std::string(e.what()).find("image 3") != std::string::npos);
  }
}

TEST_CASE("self-calibrated coverage is nominal") {
  const int H = 16, W = 16, M = 500, S = 200;
  const PixelMask mask = PixelMask::with_hole(H, W, 8, 0, 8, 16);
  std::vector<CoverageTruth> truths;
  for (int i = 0; i < M; ++i) {
    Rng rng(derive_seed(1, static_cast<std::uint64_t>(i)));
    CategoricalRaster x(H, W, 4);
    for (int p = 0; p < H * W; ++p) x.set(p / W, p % W, draw_class(rng));
    truths.push_back({x, mask});
  }
  const CompletionSampler same_generator = [&](std::size_t i, const CoverageTruth& t, int count, double) {
    std::vector<CategoricalRaster> out;
    for (int j = 0; j < count; ++j) {
      Rng rng(derive_seed(derive_seed(2, i), static_cast<std::uint64_t>(j)));
      CategoricalRaster x = t.image;
      for (int p = 0; p < H * W; ++p)
        if (!t.mask.observed(static_cast<std::size_t>(p))) x.set(p / W, p % W, draw_class(rng));
      out.push_back(std::move(x));
    }
    return out;
  };
  const std::vector<double> temps = {1.0};
  const CoverageReport rep = coverage(truths, same_generator, S, kDefaultPercentiles, temps);
  for (const auto& c : rep.cells) {
    MESSAGE(std::string(to_string(c.statistic)) << " " << c.percentile << "%: " << c.coverage);
    CHECK(std::abs(c.coverage - c.percentile / 100.0) <= 0.05);
    const double scaled = c.coverage * M;
    CHECK(scaled == doctest::Approx(std::round(scaled)));
  }
}

TEST_CASE("rbf interpolation") {
  const std::vector<RbfPoint> one = {{2.0, 3.0, 5.0}};
  const auto w1 = rbf_weights(one, 1.5);
  CHECK(rbf_evaluate(one, w1, 2.0, 3.0, 1.5) == doctest::Approx(5.0).epsilon(1e-6));
  double prev = 5.0 + 1e-9;
  for (double d = 0.0; d < 6.0; d += 0.5) {
    const double v = rbf_evaluate(one, w1, 2.0 + d, 3.0, 1.5);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(rbf_evaluate(one, w1, 2.0, 4.5, 1.5) == doctest::Approx(5.0 * std::exp(-0.5)).epsilon(1e-6));

  // Image centres on a jittered grid.
  Rng rng(8);
  std::vector<RbfPoint> sites;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 7; ++c)
      sites.push_back({c * 40.0 + rng.uniform(-8, 8), r * 40.0 + rng.uniform(-8, 8), rng.uniform(-3, 3)});
  const auto ws = rbf_weights(sites, 20.0);
  for (const auto& p : sites) CHECK(std::abs(rbf_evaluate(sites, ws, p.x, p.y, 20.0) - p.value) < 1e-6);

  // Clustered points give large weights; the jitter then leaves a residual of
  // exactly -1e-8 w_i at each data point.
  std::vector<RbfPoint> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(-3, 3)});
  const auto w = rbf_weights(pts, 1.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double resid = rbf_evaluate(pts, w, pts[i].x, pts[i].y, 1.0) - pts[i].value;
    CHECK(std::abs(resid + 1e-8 * w[i]) < 1e-9);
  }

  const std::vector<RbfPoint> pair = {{-1.0, 0.0, 1.0}, {1.0, 0.0, -1.0}};
  CHECK(std::abs(rbf_evaluate(pair, rbf_weights(pair, 0.8), 0.0, 0.0, 0.8)) < 1e-9);
  CHECK(std::abs(rbf_evaluate(pair, rbf_weights(pair, 0.8), 0.0, 7.0, 0.8)) < 1e-9);

  // Grid cell centres line up with rbf_evaluate.
  const GridSpec g{-2.0, -1.0, 0.5, 0.25, 9, 5};
  const auto grid = rbf_interpolate(pair, g, 0.8);
  REQUIRE(grid.size() == 45);
  const auto wp = rbf_weights(pair, 0.8);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 9; ++c)
      CHECK(grid[static_cast<std::size_t>(r * 9 + c)] ==
            doctest::Approx(rbf_evaluate(pair, wp, -2.0 + 0.5 * c, -1.0 + 0.25 * r, 0.8)).epsilon(1e-12));

  const std::vector<RbfPoint> dup = {{1.0, 1.0, 0.0}, {1.0, 1.0, 2.0}};
  CHECK_THROWS_AS(rbf_weights(dup, 1.0), NumericalError);
  CHECK_THROWS(rbf_weights(std::vector<RbfPoint>{}, 1.0));
}
