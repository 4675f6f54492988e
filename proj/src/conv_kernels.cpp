#include <algorithm>
#include <cstring>
#include <vector>

#include <Eigen/Core>

#include "lulc/kernels.hpp"

namespace lulc {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace lulc

namespace lulc::kernels {

template <class T>
Shape conv2d_output_shape(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                          const BasicTensor<T>* mask) {
  if (x.rank() != 4) throw UsageError("conv2d input must be [N,C,H,W], got " + shape_string(x.shape()));
  if (weight.rank() != 4) throw UsageError("conv2d weight must be [F,C,kh,kw], got " + shape_string(weight.shape()));
  if (weight.dim(1) != x.dim(1))
    throw UsageError("conv2d channel mismatch: input " + shape_string(x.shape()) + ", weight " +
                     shape_string(weight.shape()));
  if (weight.dim(2) % 2 == 0 || weight.dim(3) % 2 == 0) throw UsageError("conv2d kernel sizes must be odd");
  if (bias && bias->shape() != Shape{weight.dim(0)}) throw UsageError("conv2d bias must be [F]");
  if (mask && mask->shape() != weight.shape()) throw UsageError("conv2d mask must match weight shape");
  return {x.dim(0), weight.dim(0), x.dim(2), x.dim(3)};
}

namespace {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Tap {
  int ky, kx;
};

template <class T>
std::vector<Tap> active_taps(const BasicTensor<T>& weight, const BasicTensor<T>* mask) {
  const int f = weight.dim(0), c = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  std::vector<Tap> taps;
  for (int ky = 0; ky < kh; ++ky)
    for (int kx = 0; kx < kw; ++kx) {
      bool any = mask == nullptr;
      for (int fi = 0; fi < f && !any; ++fi)
        for (int ci = 0; ci < c && !any; ++ci)
          any = (*mask)[((static_cast<std::size_t>(fi) * c + ci) * kh + ky) * kw + kx] != T(0);
      if (any) taps.push_back({ky, kx});
    }
  return taps;
}

// [F, C*T] effective weights restricted to the active taps.
template <class T>
RowMatrix<T> gather_weights(const BasicTensor<T>& weight, const BasicTensor<T>* mask, const std::vector<Tap>& taps) {
  const int f = weight.dim(0), c = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  const int nt = static_cast<int>(taps.size());
  RowMatrix<T> w(f, c * nt);
  for (int fi = 0; fi < f; ++fi)
    for (int ci = 0; ci < c; ++ci)
      for (int t = 0; t < nt; ++t) {
        const std::size_t idx = ((static_cast<std::size_t>(fi) * c + ci) * kh + taps[t].ky) * kw + taps[t].kx;
        w(fi, ci * nt + t) = mask ? weight[idx] * (*mask)[idx] : weight[idx];
      }
  return w;
}

struct Geometry {
  int n, c, h, w, kh, kw;
  std::size_t hw() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
};

// col[(ci*T + t), (b*HW + y*W + x)] for images [n0, n0 + nb).
template <class T>
void im2col(const T* x, const Geometry& g, const std::vector<Tap>& taps, int n0, int nb, RowMatrix<T>& col) {
  const int nt = static_cast<int>(taps.size());
  const int ph = g.kh / 2, pw = g.kw / 2;
  const std::size_t hw = g.hw();
  const std::ptrdiff_t cols = static_cast<std::ptrdiff_t>(nb) * static_cast<std::ptrdiff_t>(hw);
  col.resize(g.c * nt, cols);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < nb; ++b)
    for (int ci = 0; ci < g.c; ++ci) {
      const T* plane = x + (static_cast<std::size_t>(n0 + b) * g.c + ci) * hw;
      for (int t = 0; t < nt; ++t) {
        T* row = col.data() + static_cast<std::ptrdiff_t>(ci * nt + t) * cols + static_cast<std::ptrdiff_t>(b) * hw;
        const int dy = taps[t].ky - ph, dx = taps[t].kx - pw;
        for (int yy = 0; yy < g.h; ++yy) {
          T* out = row + static_cast<std::size_t>(yy) * g.w;
          const int sy = yy + dy;
          if (sy < 0 || sy >= g.h) {
            std::fill(out, out + g.w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * g.w;
          const int x0 = std::max(0, -dx), x1 = std::min(g.w, g.w - dx);
          std::fill(out, out + x0, T(0));
          if (x1 > x0) std::memcpy(out + x0, src + x0 + dx, sizeof(T) * static_cast<std::size_t>(x1 - x0));
          std::fill(out + std::max(x1, x0), out + g.w, T(0));
        }
      }
    }
}

// Adds dcol back into dx for images [n0, n0 + nb). Each (image, channel)
// plane is owned by one iteration, so the scatter needs no atomics.
template <class T>
void col2im(const RowMatrix<T>& dcol, const Geometry& g, const std::vector<Tap>& taps, int n0, int nb, T* dx) {
  const int nt = static_cast<int>(taps.size());
  const int ph = g.kh / 2, pw = g.kw / 2;
  const std::size_t hw = g.hw();
  const std::ptrdiff_t cols = dcol.cols();
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < nb; ++b)
    for (int ci = 0; ci < g.c; ++ci) {
      T* plane = dx + (static_cast<std::size_t>(n0 + b) * g.c + ci) * hw;
      for (int t = 0; t < nt; ++t) {
        const T* row = dcol.data() + static_cast<std::ptrdiff_t>(ci * nt + t) * cols + static_cast<std::ptrdiff_t>(b) * hw;
        const int dy = taps[t].ky - ph, dxo = taps[t].kx - pw;
        for (int yy = 0; yy < g.h; ++yy) {
          const int sy = yy + dy;
          if (sy < 0 || sy >= g.h) continue;
          const T* in = row + static_cast<std::size_t>(yy) * g.w;
          T* dst = plane + static_cast<std::size_t>(sy) * g.w;
          const int x0 = std::max(0, -dxo), x1 = std::min(g.w, g.w - dxo);
          for (int xx = x0; xx < x1; ++xx) dst[xx + dxo] += in[xx];
        }
      }
    }
}

int chunk_images(const Geometry& g, std::size_t rows) {
  constexpr std::size_t kMaxColElements = std::size_t{1} << 24;
  const std::size_t per_image = std::max<std::size_t>(1, rows * g.hw());
  return static_cast<int>(std::clamp<std::size_t>(kMaxColElements / per_image, 1, static_cast<std::size_t>(g.n)));
}

}  // namespace

template <class T>
void conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                    const BasicTensor<T>* mask, BasicTensor<T>& y) {
  const Shape out_shape = conv2d_output_shape(x, weight, bias, mask);
  if (y.shape() != out_shape) y = BasicTensor<T>(out_shape);
  const Geometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(2), weight.dim(3)};
  const int f = weight.dim(0);
  const auto taps = active_taps(weight, mask);
  const std::size_t hw = g.hw();
  if (taps.empty()) {
    for (int b = 0; b < g.n; ++b)
      for (int fi = 0; fi < f; ++fi)
        std::fill_n(y.data() + (static_cast<std::size_t>(b) * f + fi) * hw, hw, bias ? (*bias)[static_cast<std::size_t>(fi)] : T(0));
    return;
  }
  const RowMatrix<T> w = gather_weights(weight, mask, taps);
  const int chunk = chunk_images(g, static_cast<std::size_t>(w.cols()));
  RowMatrix<T> col, out;
  for (int n0 = 0; n0 < g.n; n0 += chunk) {
    const int nb = std::min(chunk, g.n - n0);
    im2col(x.data(), g, taps, n0, nb, col);
    out.noalias() = w * col;
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < nb; ++b)
      for (int fi = 0; fi < f; ++fi) {
        const T bv = bias ? (*bias)[static_cast<std::size_t>(fi)] : T(0);
        const T* src = out.data() + static_cast<std::ptrdiff_t>(fi) * out.cols() + static_cast<std::ptrdiff_t>(b) * hw;
        T* dst = y.data() + (static_cast<std::size_t>(n0 + b) * f + fi) * hw;
        for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + bv;
      }
  }
}

template <class T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* mask,
                     const BasicTensor<T>& dy, BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias) {
  const Shape out_shape = conv2d_output_shape(x, weight, static_cast<const BasicTensor<T>*>(nullptr), mask);
  require_shape(dy, out_shape, "conv2d backward dy");
  const Geometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(2), weight.dim(3)};
  const int f = weight.dim(0);
  const std::size_t hw = g.hw();

  if (dbias) {
    for (int fi = 0; fi < f; ++fi) {
      double s = 0.0;
      for (int b = 0; b < g.n; ++b) {
        const T* src = dy.data() + (static_cast<std::size_t>(b) * f + fi) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += static_cast<double>(src[i]);
      }
      (*dbias)[static_cast<std::size_t>(fi)] += static_cast<T>(s);
    }
  }
  const auto taps = active_taps(weight, mask);
  if (taps.empty() || (!dx && !dweight)) return;
  const int nt = static_cast<int>(taps.size());
  const RowMatrix<T> w = gather_weights(weight, mask, taps);
  RowMatrix<T> dw_eff = RowMatrix<T>::Zero(w.rows(), w.cols());
  const int chunk = chunk_images(g, static_cast<std::size_t>(w.cols()));
  RowMatrix<T> col, dcol, dym;
  for (int n0 = 0; n0 < g.n; n0 += chunk) {
    const int nb = std::min(chunk, g.n - n0);
    dym.resize(f, static_cast<std::ptrdiff_t>(nb) * static_cast<std::ptrdiff_t>(hw));
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < nb; ++b)
      for (int fi = 0; fi < f; ++fi)
        std::memcpy(dym.data() + static_cast<std::ptrdiff_t>(fi) * dym.cols() + static_cast<std::ptrdiff_t>(b) * hw,
                    dy.data() + (static_cast<std::size_t>(n0 + b) * f + fi) * hw, sizeof(T) * hw);
    if (dweight) {
      im2col(x.data(), g, taps, n0, nb, col);
      dw_eff.noalias() += dym * col.transpose();
    }
    if (dx) {
      dcol.noalias() = w.transpose() * dym;
      col2im(dcol, g, taps, n0, nb, dx->data());
    }
  }
  if (dweight) {
    const int c = g.c;
    for (int fi = 0; fi < f; ++fi)
      for (int ci = 0; ci < c; ++ci)
        for (int t = 0; t < nt; ++t) {
          const std::size_t idx = ((static_cast<std::size_t>(fi) * c + ci) * g.kh + taps[t].ky) * g.kw + taps[t].kx;
          const T gval = dw_eff(fi, ci * nt + t);
          (*dweight)[idx] += mask ? gval * (*mask)[idx] : gval;
        }
  }
}

#define LULC_INSTANTIATE_CONV(T)                                                                                  \
  template Shape conv2d_output_shape<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*,     \
                                        const BasicTensor<T>*);                                                  \
  template void conv2d_forward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*,           \
                                  const BasicTensor<T>*, BasicTensor<T>&);                                       \
  template void conv2d_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*,          \
                                   const BasicTensor<T>&, BasicTensor<T>*, BasicTensor<T>*, BasicTensor<T>*);

LULC_INSTANTIATE_CONV(float)
LULC_INSTANTIATE_CONV(double)

}  // namespace lulc::kernels
