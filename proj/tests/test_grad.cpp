#include <doctest.h>

#include <cmath>

#include "lulc/adam.hpp"
#include "lulc/kernels.hpp"
#include "lulc/rng.hpp"
#include "lulc/tape.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace lulc;

namespace {

using TD = BasicTensor<double>;
using gradcheck::random_tensor;

// Same-padded cross-correlation as seven plain loops.
TD loop_conv(const TD& x, const TD& w, const TD& b) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  TD y({N, F, H, W});
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f)
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
          double s = b[static_cast<std::size_t>(f)];
          for (int ch = 0; ch < C; ++ch)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) {
                const int rr = r + i - kh / 2, cc = c + j - kw / 2;
                if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                s += x[static_cast<std::size_t>(((n * C + ch) * H + rr) * W + cc)] *
                     w[static_cast<std::size_t>(((f * C + ch) * kh + i) * kw + j)];
              }
          y[static_cast<std::size_t>(((n * F + f) * H + r) * W + c)] = s;
        }
  return y;
}

}  // namespace

TEST_CASE("conv2d examples") {
  TD x = random_tensor<double>({1, 1, 3, 3}, 1);
  TD w({1, 1, 1, 1}, 1.0), b({1}, 0.0), y;
  kernels::conv2d_forward(x, w, &b, static_cast<const TD*>(nullptr), y);
  CHECK(y == x);

  TD w3 = random_tensor<double>({2, 1, 3, 3}, 2), b2({2}, std::vector<double>{0.5, -1.5}), zero({2, 1, 3, 3}, 0.0);
  kernels::conv2d_forward(x, w3, &b2, &zero, y);
  for (int i = 0; i < 9; ++i) {
    CHECK(y[static_cast<std::size_t>(i)] == 0.5);
    CHECK(y[static_cast<std::size_t>(9 + i)] == -1.5);
  }

  const TD x5 = random_tensor<double>({1, 2, 5, 5}, 3), w5 = random_tensor<double>({3, 2, 3, 3}, 4),
           b5 = random_tensor<double>({3}, 5);
  kernels::conv2d_forward(x5, w5, &b5, static_cast<const TD*>(nullptr), y);
  const TD expect = loop_conv(x5, w5, b5);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - expect[i]) < 1e-6);

  TD bad = random_tensor<double>({3, 3, 3, 3}, 6);
  CHECK_THROWS_AS(kernels::conv2d_forward(x5, bad, &b5, static_cast<const TD*>(nullptr), y), UsageError);
}

TEST_CASE("parallel conv kernels agree with the serial reference") {
  for (std::uint64_t s = 0; s < 12; ++s) {
    Rng rng(s);
    const int N = 1 + static_cast<int>(rng.below(3)), C = 1 + static_cast<int>(rng.below(6)),
              F = 1 + static_cast<int>(rng.below(6)), H = 2 + static_cast<int>(rng.below(10)),
              W = 2 + static_cast<int>(rng.below(10)), k = 1 + 2 * static_cast<int>(rng.below(3));
    const Tensor x = random_tensor<float>({N, C, H, W}, s * 7 + 1), w = random_tensor<float>({F, C, k, k}, s * 7 + 2),
                 b = random_tensor<float>({F}, s * 7 + 3), dy = random_tensor<float>({N, F, H, W}, s * 7 + 4);
    Tensor mask({F, C, k, k});
    for (auto& v : mask.values()) v = rng.bernoulli(0.6) ? 1.0f : 0.0f;
    const Tensor* m = (s % 2) ? &mask : nullptr;

    Tensor y1, y2;
    kernels::conv2d_forward(x, w, &b, m, y1);
    kernels::reference::conv2d_forward(x, w, &b, m, y2);
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-4f);

    Tensor dx1(x.shape()), dw1(w.shape()), db1(b.shape()), dx2(x.shape()), dw2(w.shape()), db2(b.shape());
    kernels::conv2d_backward(x, w, m, dy, &dx1, &dw1, &db1);
    kernels::reference::conv2d_backward(x, w, m, dy, &dx2, &dw2, &db2);
    for (std::size_t i = 0; i < dx1.size(); ++i) CHECK(std::abs(dx1[i] - dx2[i]) < 1e-4f);
    for (std::size_t i = 0; i < dw1.size(); ++i) CHECK(std::abs(dw1[i] - dw2[i]) < 1e-4f);
    for (std::size_t i = 0; i < db1.size(); ++i) CHECK(std::abs(db1[i] - db2[i]) < 1e-4f);
  }
}

TEST_CASE("masked conv equals conv with pre-multiplied weights") {
  Rng rng(17);
  const TD x = random_tensor<double>({2, 3, 6, 5}, 1), w = random_tensor<double>({4, 3, 3, 3}, 2),
           b = random_tensor<double>({4}, 3), dy = random_tensor<double>({2, 4, 6, 5}, 4);
  TD mask(w.shape()), premult(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i) {
    mask[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    premult[i] = w[i] * mask[i];
  }
  for (int parallel = 0; parallel < 2; ++parallel) {
    TD y1, y2, dx1(x.shape()), dx2(x.shape()), dw1(w.shape()), dw2(w.shape());
    if (parallel) {
      kernels::conv2d_forward(x, w, &b, &mask, y1);
      kernels::conv2d_forward(x, premult, &b, static_cast<const TD*>(nullptr), y2);
      kernels::conv2d_backward(x, w, &mask, dy, &dx1, &dw1, static_cast<TD*>(nullptr));
      kernels::conv2d_backward(x, premult, static_cast<const TD*>(nullptr), dy, &dx2, &dw2, static_cast<TD*>(nullptr));
    } else {
      kernels::reference::conv2d_forward(x, w, &b, &mask, y1);
      kernels::reference::conv2d_forward(x, premult, &b, static_cast<const TD*>(nullptr), y2);
      kernels::reference::conv2d_backward(x, w, &mask, dy, &dx1, &dw1, static_cast<TD*>(nullptr));
      kernels::reference::conv2d_backward(x, premult, static_cast<const TD*>(nullptr), dy, &dx2, &dw2,
                                          static_cast<TD*>(nullptr));
    }
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < dx1.size(); ++i) CHECK(dx1[i] == doctest::Approx(dx2[i]).epsilon(1e-12));
    // Masked-out weights receive no gradient; kept weights match.
    for (std::size_t i = 0; i < dw1.size(); ++i) CHECK(dw1[i] == doctest::Approx(dw2[i] * mask[i]).epsilon(1e-12));
  }
}

TEST_CASE("finite-difference gradient checks") {
  for (const auto& r : gradcheck::op_suite()) {
    INFO(r.name << ": max relative error " << r.max_rel_err);
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("gated activation examples") {
  Tape<double> t(false);
  const Var a = t.constant(TD({1, 3}, std::vector<double>{0.0, 0.7, -1.2}));
  const Var b = t.constant(TD({1, 3}, std::vector<double>{0.4, 30.0, 30.0}));
  const auto& y = t.value(ops::gated(t, a, b));
  CHECK(y[0] == 0.0);
  CHECK(std::abs(y[1] - std::tanh(0.7)) < 1e-6);
  CHECK(std::abs(y[2] - std::tanh(-1.2)) < 1e-6);
  CHECK_THROWS_AS(ops::gated(t, a, t.constant(TD({1, 2}))), UsageError);
}

TEST_CASE("batchnorm examples") {
  // Per-channel mean 0 and biased variance 1.
  TD x({4, 1}, std::vector<double>{1.0, -1.0, 1.0, -1.0});
  Tape<double> t(false);
  const Var xv = t.constant(x);
  TD rm({1}, 0.0), rv({1}, 1.0);
  const auto& y = t.value(
      ops::batchnorm(t, xv, t.constant(TD({1}, 1.0)), t.constant(TD({1}, 0.0)), {&rm, &rv}, Mode::Train));
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(y[i] - x[i]) < 1e-5);
  CHECK(rm[0] == doctest::Approx(0.0));
  CHECK(rv[0] == doctest::Approx(0.9 + 0.1 * 4.0 / 3.0));

  const auto& c = t.value(ops::batchnorm(t, t.constant(random_tensor<double>({3, 2, 2, 2}, 1)),
                                         t.constant(TD({2}, 0.0)), t.constant(TD({2}, 2.5)), {}, Mode::Train));
  for (double v : c.values()) CHECK(v == 2.5);

  CHECK_THROWS_AS(ops::batchnorm(t, xv, t.constant(TD({1}, 1.0)), t.constant(TD({1}, 0.0)), {}, Mode::Eval),
                  UsageError);
}

TEST_CASE("softmax and cross entropy examples") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor l = random_tensor<float>({3, 7, 2, 2}, s, -20, 20);
    const Tensor p = softmax(l);
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 4; ++i) {
        double z = 0.0;
        for (int k = 0; k < 7; ++k) z += p[static_cast<std::size_t>((n * 7 + k) * 4 + i)];
        CHECK(std::abs(z - 1.0) < 1e-6);
      }
  }

  Tape<double> t(false);
  const std::vector<int> tg = {3, 19};
  CHECK(t.value(ops::softmax_cross_entropy(t, t.constant(TD({2, 20}, 0.0)), std::span<const int>(tg)))[0] ==
        doctest::Approx(std::log(20.0)).epsilon(1e-12));

  TD margin({1, 5}, 0.0);
  margin[2] = 30.0;
  const std::vector<int> two = {2};
  CHECK(t.value(ops::softmax_cross_entropy(t, t.constant(margin), std::span<const int>(two)))[0] < 1e-9);

  const std::vector<int> out_of_range = {5};
  CHECK_THROWS_AS(ops::softmax_cross_entropy(t, t.constant(margin), std::span<const int>(out_of_range)), UsageError);
}

TEST_CASE("backward through a parameter store") {
  ParameterStore<double> store;
  const int wi = store.add("w", random_tensor<double>({2, 3}, 1));
  const int ui = store.add("unused", random_tensor<double>({4}, 2));
  const TD x = random_tensor<double>({2, 3}, 3);
  store.zero_grad();
  Tape<double> t;
  const Var w = t.parameter(store, wi);
  t.parameter(store, ui);
  t.backward(ops::sum(t, ops::mul(t, w, t.constant(x))));
  CHECK(store.at(wi).grad == x);
  for (double g : store.at(ui).grad.values()) CHECK(g == 0.0);

  // Forward evaluation is deterministic.
  Tape<double> t2(false), t3(false);
  const TD big = random_tensor<double>({2, 3, 8, 8}, 4), wt = random_tensor<double>({5, 3, 3, 3}, 5);
  const TD bias({5}, 0.0);
  auto eval = [&](Tape<double>& tp) {
    return tp.value(ops::conv2d(tp, tp.constant(big), tp.constant(wt), tp.constant(bias)));
  };
  CHECK(eval(t2) == eval(t3));
}

TEST_CASE("adam") {
  auto scalar_store = [](float w0) {
    ParameterStore<float> s;
    s.add("w", Tensor({1}, w0));
    return s;
  };

  ParameterStore<float> s = scalar_store(1.0f);
  AdamState st = make_adam_state(s, {0.01, 0.9, 0.999, 1e-8});
  s.at(0).grad = Tensor({1}, -2.5f);
  adam_step(s, st);
  CHECK(s.at(0).value[0] == doctest::Approx(1.01).epsilon(1e-6));

  ParameterStore<float> z = scalar_store(4.0f);
  AdamState zs = make_adam_state(z);
  z.at(0).grad = Tensor({1}, 0.0f);
  for (int i = 0; i < 5; ++i) adam_step(z, zs);
  CHECK(z.at(0).value[0] == 4.0f);

  ParameterStore<float> q = scalar_store(0.0f);
  AdamState qs = make_adam_state(q, {0.1, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 200; ++i) {
    q.at(0).grad = Tensor({1}, 2.0f * (q.at(0).value[0] - 3.0f));
    adam_step(q, qs);
  }
  CHECK(std::abs(q.at(0).value[0] - 3.0f) < 0.1f);
  CHECK(qs.t == 200);
}
