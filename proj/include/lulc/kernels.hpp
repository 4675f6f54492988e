#pragma once

#include "lulc/tensor.hpp"

// Convolution kernels: same padding, stride 1, odd kernel sizes. The effective
// weight is weight * mask when a mask is given. Backward routines accumulate
// into whichever gradient outputs are non-null.
namespace lulc::kernels {

// im2col + GEMM, OpenMP-parallel over images and channels.
template <class T>
void conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                    const BasicTensor<T>* mask, BasicTensor<T>& y);

template <class T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* mask,
                     const BasicTensor<T>& dy, BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias);

// Serial nested-loop versions with 64-bit accumulation, kept as the
// correctness oracle for the kernels above.
namespace reference {

template <class T>
void conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                    const BasicTensor<T>* mask, BasicTensor<T>& y);

template <class T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* mask,
                     const BasicTensor<T>& dy, BasicTensor<T>* dx, BasicTensor<T>* dweight, BasicTensor<T>* dbias);

}  // namespace reference

// Validates shapes and returns the output shape [N, F, H, W].
template <class T>
Shape conv2d_output_shape(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                          const BasicTensor<T>* mask);

}  // namespace lulc::kernels
