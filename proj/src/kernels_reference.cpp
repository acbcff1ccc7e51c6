#include "galb/kernels.hpp"

namespace galb::kernels::reference {

void affine_forward(std::span<const double> x, std::size_t batch, std::size_t in, std::span<const double> w,
                    std::span<const double> bias, std::size_t out, std::span<double> y) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[b * in + i] * w[o * in + i];
      y[b * out + o] = acc;
    }
}

void affine_backward_input(std::span<const double> dy, std::size_t batch, std::size_t in,
                           std::span<const double> w, std::size_t out, std::span<double> dx) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += dy[b * out + o] * w[o * in + i];
      dx[b * in + i] = acc;
    }
}

void affine_backward_params(std::span<const double> x, std::span<const double> dy, std::size_t batch,
                            std::size_t in, std::size_t out, std::span<double> dw, std::span<double> dbias) {
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t b = 0; b < batch; ++b) {
      const double g = dy[b * out + o];
      dbias[o] += g;
      for (std::size_t i = 0; i < in; ++i) dw[o * in + i] += g * x[b * in + i];
    }
}

}  // namespace galb::kernels::reference
