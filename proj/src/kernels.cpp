#include "galb/kernels.hpp"

#include <cmath>

namespace galb::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;
}  // namespace

// Register tile of 4 outputs x 4 batch rows: each pass over i loads four x
// rows and four w rows and issues sixteen multiply-adds.
void affine_forward(std::span<const double> x, std::size_t batch, std::size_t in, std::span<const double> w,
                    std::span<const double> bias, std::size_t out, std::span<double> y) {
  const double* __restrict xp = x.data();
  const double* __restrict wp = w.data();
  const double* __restrict bp = bias.data();
  double* __restrict yp = y.data();
  const long out_blocks = static_cast<long>((out + 3) / 4);
#pragma omp parallel for schedule(static) if (batch * out * in > kParallelWork)
  for (long ob = 0; ob < out_blocks; ++ob) {
    const std::size_t o0 = static_cast<std::size_t>(ob) * 4;
    const std::size_t on = out - o0 < 4 ? out - o0 : 4;
    std::size_t b = 0;
    if (on == 4) {
      const double* w0 = wp + o0 * in;
      const double* w1 = w0 + in;
      const double* w2 = w1 + in;
      const double* w3 = w2 + in;
      for (; b + 4 <= batch; b += 4) {
        const double* x0 = xp + b * in;
        const double* x1 = x0 + in;
        const double* x2 = x1 + in;
        const double* x3 = x2 + in;
        double a00 = 0, a01 = 0, a02 = 0, a03 = 0, a10 = 0, a11 = 0, a12 = 0, a13 = 0;
        double a20 = 0, a21 = 0, a22 = 0, a23 = 0, a30 = 0, a31 = 0, a32 = 0, a33 = 0;
#pragma omp simd reduction(+ : a00, a01, a02, a03, a10, a11, a12, a13, a20, a21, a22, a23, a30, a31, a32, a33)
        for (std::size_t i = 0; i < in; ++i) {
          const double v0 = x0[i], v1 = x1[i], v2 = x2[i], v3 = x3[i];
          a00 += v0 * w0[i], a01 += v0 * w1[i], a02 += v0 * w2[i], a03 += v0 * w3[i];
          a10 += v1 * w0[i], a11 += v1 * w1[i], a12 += v1 * w2[i], a13 += v1 * w3[i];
          a20 += v2 * w0[i], a21 += v2 * w1[i], a22 += v2 * w2[i], a23 += v2 * w3[i];
          a30 += v3 * w0[i], a31 += v3 * w1[i], a32 += v3 * w2[i], a33 += v3 * w3[i];
        }
        double* y0 = yp + b * out + o0;
        y0[0] = a00 + bp[o0], y0[1] = a01 + bp[o0 + 1], y0[2] = a02 + bp[o0 + 2], y0[3] = a03 + bp[o0 + 3];
        y0 += out;
        y0[0] = a10 + bp[o0], y0[1] = a11 + bp[o0 + 1], y0[2] = a12 + bp[o0 + 2], y0[3] = a13 + bp[o0 + 3];
        y0 += out;
        y0[0] = a20 + bp[o0], y0[1] = a21 + bp[o0 + 1], y0[2] = a22 + bp[o0 + 2], y0[3] = a23 + bp[o0 + 3];
        y0 += out;
        y0[0] = a30 + bp[o0], y0[1] = a31 + bp[o0 + 1], y0[2] = a32 + bp[o0 + 2], y0[3] = a33 + bp[o0 + 3];
      }
      for (; b < batch; ++b) {
        const double* xr = xp + b * in;
        double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
#pragma omp simd reduction(+ : a0, a1, a2, a3)
        for (std::size_t i = 0; i < in; ++i) {
          const double v = xr[i];
          a0 += v * w0[i], a1 += v * w1[i], a2 += v * w2[i], a3 += v * w3[i];
        }
        double* yr = yp + b * out + o0;
        yr[0] = a0 + bp[o0], yr[1] = a1 + bp[o0 + 1], yr[2] = a2 + bp[o0 + 2], yr[3] = a3 + bp[o0 + 3];
      }
    }
    // Last partial block of outputs.
    for (; b < batch; ++b) {
      const double* xr = xp + b * in;
      for (std::size_t o = o0; o < o0 + on; ++o) {
        const double* wr = wp + o * in;
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
        yp[b * out + o] = acc + bp[o];
      }
    }
  }
}

// Tile of 4 batch rows x 4 W rows: each dX row is loaded and stored once per
// four outputs.
void affine_backward_input(std::span<const double> dy, std::size_t batch, std::size_t in,
                           std::span<const double> w, std::size_t out, std::span<double> dx) {
  const double* __restrict gp = dy.data();
  const double* __restrict wp = w.data();
  double* __restrict dp = dx.data();
  const long batch_blocks = static_cast<long>((batch + 3) / 4);
#pragma omp parallel for schedule(static) if (batch * out * in > kParallelWork)
  for (long bb = 0; bb < batch_blocks; ++bb) {
    const std::size_t b0 = static_cast<std::size_t>(bb) * 4;
    const std::size_t bn = batch - b0 < 4 ? batch - b0 : 4;
    for (std::size_t k = 0; k < bn * in; ++k) dp[b0 * in + k] = 0.0;
    if (bn == 4) {
      double* d0 = dp + b0 * in;
      double* d1 = d0 + in;
      double* d2 = d1 + in;
      double* d3 = d2 + in;
      std::size_t o = 0;
      for (; o + 4 <= out; o += 4) {
        const double* g = gp + b0 * out + o;
        const double g00 = g[0], g01 = g[1], g02 = g[2], g03 = g[3];
        g += out;
        const double g10 = g[0], g11 = g[1], g12 = g[2], g13 = g[3];
        g += out;
        const double g20 = g[0], g21 = g[1], g22 = g[2], g23 = g[3];
        g += out;
        const double g30 = g[0], g31 = g[1], g32 = g[2], g33 = g[3];
        const double* w0 = wp + o * in;
        const double* w1 = w0 + in;
        const double* w2 = w1 + in;
        const double* w3 = w2 + in;
#pragma omp simd
        for (std::size_t i = 0; i < in; ++i) {
          const double v0 = w0[i], v1 = w1[i], v2 = w2[i], v3 = w3[i];
          d0[i] += g00 * v0 + g01 * v1 + g02 * v2 + g03 * v3;
          d1[i] += g10 * v0 + g11 * v1 + g12 * v2 + g13 * v3;
          d2[i] += g20 * v0 + g21 * v1 + g22 * v2 + g23 * v3;
          d3[i] += g30 * v0 + g31 * v1 + g32 * v2 + g33 * v3;
        }
      }
      for (; o < out; ++o) {
        const double g0 = gp[b0 * out + o], g1 = gp[(b0 + 1) * out + o];
        const double g2 = gp[(b0 + 2) * out + o], g3 = gp[(b0 + 3) * out + o];
        const double* wr = wp + o * in;
#pragma omp simd
        for (std::size_t i = 0; i < in; ++i) {
          const double v = wr[i];
          d0[i] += g0 * v;
          d1[i] += g1 * v;
          d2[i] += g2 * v;
          d3[i] += g3 * v;
        }
      }
    } else {
      for (std::size_t b = b0; b < b0 + bn; ++b) {
        double* dr = dp + b * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double g = gp[b * out + o];
          if (g == 0.0) continue;
          const double* wr = wp + o * in;
#pragma omp simd
          for (std::size_t i = 0; i < in; ++i) dr[i] += g * wr[i];
        }
      }
    }
  }
}

// Each W row is updated from four batch rows per pass.
void affine_backward_params(std::span<const double> x, std::span<const double> dy, std::size_t batch,
                            std::size_t in, std::size_t out, std::span<double> dw, std::span<double> dbias) {
  const double* __restrict xp = x.data();
  const double* __restrict gp = dy.data();
  double* __restrict wp = dw.data();
  double* __restrict bp = dbias.data();
  const long no = static_cast<long>(out);
#pragma omp parallel for schedule(static) if (batch * out * in > kParallelWork)
  for (long o = 0; o < no; ++o) {
    double* wr = wp + o * in;
    std::size_t b = 0;
    for (; b + 4 <= batch; b += 4) {
      const double g0 = gp[b * out + o], g1 = gp[(b + 1) * out + o];
      const double g2 = gp[(b + 2) * out + o], g3 = gp[(b + 3) * out + o];
      if (g0 == 0.0 && g1 == 0.0 && g2 == 0.0 && g3 == 0.0) continue;
      bp[o] += g0 + g1 + g2 + g3;
      const double* x0 = xp + b * in;
      const double* x1 = x0 + in;
      const double* x2 = x1 + in;
      const double* x3 = x2 + in;
#pragma omp simd
      for (std::size_t i = 0; i < in; ++i) wr[i] += g0 * x0[i] + g1 * x1[i] + g2 * x2[i] + g3 * x3[i];
    }
    for (; b < batch; ++b) {
      const double g = gp[b * out + o];
      if (g == 0.0) continue;
      bp[o] += g;
      const double* xr = xp + b * in;
#pragma omp simd
      for (std::size_t i = 0; i < in; ++i) wr[i] += g * xr[i];
    }
  }
}

void tanh_inplace(std::span<double> y) {
  for (double& v : y) v = std::tanh(v);
}

void tanh_backward(std::span<const double> activated, std::span<double> grad) {
  const std::size_t n = grad.size();
#pragma omp simd
  for (std::size_t k = 0; k < n; ++k) grad[k] *= 1.0 - activated[k] * activated[k];
}

}  // namespace galb::kernels
