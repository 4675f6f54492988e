#include "lulc/kernels.hpp"

namespace lulc::kernels::reference {

namespace {

template <class T>
T effective(const BasicTensor<T>& weight, const BasicTensor<T>* mask, std::size_t idx) {
  return mask ? weight[idx] * (*mask)[idx] : weight[idx];
}

}  // namespace

template <class T>
void conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                    const BasicTensor<T>* mask, BasicTensor<T>& y) {
  const Shape out_shape = conv2d_output_shape(x, weight, bias, mask);
  y = BasicTensor<T>(out_shape);
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int f = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const int ph = kh / 2, pw = kw / 2;
  for (int b = 0; b < n; ++b)
    for (int fi = 0; fi < f; ++fi)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          double acc = bias ? static_cast<double>((*bias)[static_cast<std::size_t>(fi)]) : 0.0;
          for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int si = i + ky - ph, sj = j + kx - pw;
                if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
                const std::size_t widx = ((static_cast<std::size_t>(fi) * c + ci) * kh + ky) * kw + kx;
                const std::size_t xidx = ((static_cast<std::size_t>(b) * c + ci) * h + si) * w + sj;
                acc += static_cast<double>(effective(weight, mask, widx)) * static_cast<double>(x[xidx]);
              }
          y[((static_cast<std::size_t>(b) * f + fi) * h + i) * w + j] = static_cast<T>(acc);
        }
}

template <class T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* mask,
                     const BasicTensor<T>& dy, BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias) {
  const Shape out_shape = conv2d_output_shape(x, weight, static_cast<const BasicTensor<T>*>(nullptr), mask);
  require_shape(dy, out_shape, "conv2d backward dy");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int f = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const int ph = kh / 2, pw = kw / 2;
  if (dbias)
    for (int fi = 0; fi < f; ++fi) {
      double s = 0.0;
      for (int b = 0; b < n; ++b)
        for (int i = 0; i < h * w; ++i) s += static_cast<double>(dy[(static_cast<std::size_t>(b) * f + fi) * h * w + i]);
      (*dbias)[static_cast<std::size_t>(fi)] += static_cast<T>(s);
    }
  if (dweight)
    for (int fi = 0; fi < f; ++fi)
      for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const std::size_t widx = ((static_cast<std::size_t>(fi) * c + ci) * kh + ky) * kw + kx;
            double s = 0.0;
            for (int b = 0; b < n; ++b)
              for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                  const int si = i + ky - ph, sj = j + kx - pw;
                  if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
                  s += static_cast<double>(dy[((static_cast<std::size_t>(b) * f + fi) * h + i) * w + j]) *
                       static_cast<double>(x[((static_cast<std::size_t>(b) * c + ci) * h + si) * w + sj]);
                }
            if (mask) s *= static_cast<double>((*mask)[widx]);
            (*dweight)[widx] += static_cast<T>(s);
          }
  if (dx)
    for (int b = 0; b < n; ++b)
      for (int ci = 0; ci < c; ++ci)
        for (int si = 0; si < h; ++si)
          for (int sj = 0; sj < w; ++sj) {
            double s = 0.0;
            for (int fi = 0; fi < f; ++fi)
              for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                  const int i = si - ky + ph, j = sj - kx + pw;
                  if (i < 0 || i >= h || j < 0 || j >= w) continue;
                  const std::size_t widx = ((static_cast<std::size_t>(fi) * c + ci) * kh + ky) * kw + kx;
                  s += static_cast<double>(effective(weight, mask, widx)) *
                       static_cast<double>(dy[((static_cast<std::size_t>(b) * f + fi) * h + i) * w + j]);
                }
            (*dx)[((static_cast<std::size_t>(b) * c + ci) * h + si) * w + sj] += static_cast<T>(s);
          }
}

template void conv2d_forward<float>(const Tensor&, const Tensor&, const Tensor*, const Tensor*, Tensor&);
template void conv2d_forward<double>(const BasicTensor<double>&, const BasicTensor<double>&,
                                     const BasicTensor<double>*, const BasicTensor<double>*, BasicTensor<double>&);
template void conv2d_backward<float>(const Tensor&, const Tensor&, const Tensor*, const Tensor&, Tensor*, Tensor*,
                                     Tensor*);
template void conv2d_backward<double>(const BasicTensor<double>&, const BasicTensor<double>&,
                                      const BasicTensor<double>*, const BasicTensor<double>&, BasicTensor<double>*,
                                      BasicTensor<double>*, BasicTensor<double>*);

}  // namespace lulc::kernels::reference
