#pragma once

#include <cstddef>
#include <span>

// Dense-layer kernels on row-major buffers. A batch holds `batch` rows; W is
// out x in row-major. The functions in galb::kernels are OpenMP-parallel and
// SIMD-vectorized; galb::kernels::reference holds the plain serial loops used
// as the test oracle and benchmark baseline.
namespace galb::kernels {

/// Y[b, o] = bias[o] + sum_i X[b, i] W[o, i]
void affine_forward(std::span<const double> x, std::size_t batch, std::size_t in, std::span<const double> w,
                    std::span<const double> bias, std::size_t out, std::span<double> y);

/// dX[b, i] = sum_o dY[b, o] W[o, i]
void affine_backward_input(std::span<const double> dy, std::size_t batch, std::size_t in,
                           std::span<const double> w, std::size_t out, std::span<double> dx);

/// dW[o, i] += sum_b dY[b, o] X[b, i];  dbias[o] += sum_b dY[b, o]
void affine_backward_params(std::span<const double> x, std::span<const double> dy, std::size_t batch,
                            std::size_t in, std::size_t out, std::span<double> dw, std::span<double> dbias);

/// y = tanh(y) elementwise.
void tanh_inplace(std::span<double> y);

/// g *= (1 - a^2) elementwise, where a = tanh(z).
void tanh_backward(std::span<const double> activated, std::span<double> grad);

namespace reference {

void affine_forward(std::span<const double> x, std::size_t batch, std::size_t in, std::span<const double> w,
                    std::span<const double> bias, std::size_t out, std::span<double> y);
void affine_backward_input(std::span<const double> dy, std::size_t batch, std::size_t in,
                           std::span<const double> w, std::size_t out, std::span<double> dx);
void affine_backward_params(std::span<const double> x, std::span<const double> dy, std::size_t batch,
                            std::size_t in, std::size_t out, std::span<double> dw, std::span<double> dbias);

}  // namespace reference

}  // namespace galb::kernels
