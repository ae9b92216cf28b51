#include "clare/kernels.hpp"

#include <algorithm>
#include <cstddef>

#include "clare/errors.hpp"

namespace clare::kernels {

namespace {

struct Dims {
  std::size_t rows, in, out;
};

template <typename Real>
Dims check_affine(std::size_t input_size, std::size_t rows, std::size_t weight_size,
                  std::size_t out) {
  if (rows == 0) return {0, 0, out};
  if (input_size % rows != 0) throw ShapeError("input size is not a multiple of rows");
  const std::size_t in = input_size / rows;
  if (weight_size != in * out) throw ShapeError("weight shape does not match input width");
  return {rows, in, out};
}

constexpr std::size_t kLanes = 16;
constexpr std::size_t kRowBlock = 64;

// Fixed-order dot product: kLanes independent partial sums combined
// pairwise. Vectorizes without reassociation flags.
template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  }
  for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += a[i] * b[i];
  for (std::size_t width = kLanes / 2; width > 0; width /= 2) {
    for (std::size_t l = 0; l < width; ++l) acc[l] += acc[l + width];
  }
  return acc[0];
}

// y += a0*x0, then a1*x1, ... in that order for every element.
template <typename Real>
void axpy4(const Real* alpha, const Real* x0, const Real* x1, const Real* x2, const Real* x3,
           Real* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    Real v = y[i];
    v += alpha[0] * x0[i];
    v += alpha[1] * x1[i];
    v += alpha[2] * x2[i];
    v += alpha[3] * x3[i];
    y[i] = v;
  }
}

template <typename Real>
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

template <typename Real>
void affine_forward(std::span<const Real> input, std::size_t rows, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> output) {
  const auto d = check_affine<Real>(input.size(), rows, weight.size(), bias.size());
  if (output.size() != rows * d.out) throw ShapeError("output shape mismatch");
  const auto out = static_cast<std::ptrdiff_t>(d.out);
  // Units outer so one weight row stays hot across the batch.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < out; ++o) {
    const auto uo = static_cast<std::size_t>(o);
    const Real* w = weight.data() + uo * d.in;
    for (std::size_t r = 0; r < rows; ++r) {
      output[r * d.out + uo] = bias[uo] + dot(w, input.data() + r * d.in, d.in);
    }
  }
}

template <typename Real>
void affine_backward_input(std::span<const Real> grad_output, std::size_t rows,
                           std::span<const Real> weight, std::span<Real> grad_input) {
  if (rows == 0) return;
  if (grad_output.size() % rows != 0) throw ShapeError("grad_output size mismatch");
  const std::size_t out = grad_output.size() / rows;
  if (grad_input.size() % rows != 0) throw ShapeError("grad_input size mismatch");
  const std::size_t in = grad_input.size() / rows;
  if (weight.size() != out * in) throw ShapeError("weight shape mismatch");
  std::fill(grad_input.begin(), grad_input.end(), Real{0});
  const auto n_rows = static_cast<std::ptrdiff_t>(rows);
  // Blocks of weight rows are reused across the batch; each grad_input row
  // still accumulates o = 0, 1, 2, ... in order.
  for (std::size_t o0 = 0; o0 < out; o0 += kRowBlock) {
    const std::size_t o1 = std::min(out, o0 + kRowBlock);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n_rows; ++r) {
      Real* gi = grad_input.data() + static_cast<std::size_t>(r) * in;
      const Real* go = grad_output.data() + static_cast<std::size_t>(r) * out;
      std::size_t o = o0;
      for (; o + 4 <= o1; o += 4) {
        const Real* w = weight.data() + o * in;
        axpy4(go + o, w, w + in, w + 2 * in, w + 3 * in, gi, in);
      }
      for (; o < o1; ++o) axpy(go[o], weight.data() + o * in, gi, in);
    }
  }
}

template <typename Real>
void affine_backward_params(std::span<const Real> grad_output, std::span<const Real> input,
                            std::size_t rows, std::span<Real> grad_weight,
                            std::span<Real> grad_bias) {
  const std::size_t out = grad_bias.size();
  const auto d = check_affine<Real>(input.size(), rows, grad_weight.size(), out);
  std::fill(grad_weight.begin(), grad_weight.end(), Real{0});
  std::fill(grad_bias.begin(), grad_bias.end(), Real{0});
  if (rows == 0) return;
  if (grad_output.size() != rows * out) throw ShapeError("grad_output shape mismatch");
  const auto n_out = static_cast<std::ptrdiff_t>(out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < n_out; ++o) {
    const auto uo = static_cast<std::size_t>(o);
    Real* gw = grad_weight.data() + uo * d.in;
    Real gb{0};
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
      const Real g[4] = {grad_output[r * out + uo], grad_output[(r + 1) * out + uo],
                         grad_output[(r + 2) * out + uo], grad_output[(r + 3) * out + uo]};
      gb += g[0];
      gb += g[1];
      gb += g[2];
      gb += g[3];
      const Real* x = input.data() + r * d.in;
      axpy4(g, x, x + d.in, x + 2 * d.in, x + 3 * d.in, gw, d.in);
    }
    for (; r < rows; ++r) {
      const Real g = grad_output[r * out + uo];
      gb += g;
      axpy(g, input.data() + r * d.in, gw, d.in);
    }
    grad_bias[uo] = gb;
  }
}

template <typename Real>
void relu_inplace(std::span<Real> values) {
  for (auto& v : values) v = v > Real{0} ? v : Real{0};
}

template <typename Real>
void relu_backward_inplace(std::span<const Real> activation, std::span<Real> grad) {
  if (activation.size() != grad.size()) throw ShapeError("relu backward shape mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > Real{0})) grad[i] = Real{0};
  }
}

namespace serial {

template <typename Real>
void affine_forward(std::span<const Real> input, std::size_t rows, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> output) {
  const auto d = check_affine<Real>(input.size(), rows, weight.size(), bias.size());
  if (output.size() != rows * d.out) throw ShapeError("output shape mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < d.out; ++o) {
      Real sum = bias[o];
      for (std::size_t i = 0; i < d.in; ++i) sum += weight[o * d.in + i] * input[r * d.in + i];
      output[r * d.out + o] = sum;
    }
  }
}

template <typename Real>
void affine_backward_input(std::span<const Real> grad_output, std::size_t rows,
                           std::span<const Real> weight, std::span<Real> grad_input) {
  if (rows == 0) return;
  const std::size_t out = grad_output.size() / rows;
  const std::size_t in = grad_input.size() / rows;
  if (weight.size() != out * in) throw ShapeError("weight shape mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < in; ++i) {
      Real sum{0};
      for (std::size_t o = 0; o < out; ++o) sum += grad_output[r * out + o] * weight[o * in + i];
      grad_input[r * in + i] = sum;
    }
  }
}

template <typename Real>
void affine_backward_params(std::span<const Real> grad_output, std::span<const Real> input,
                            std::size_t rows, std::span<Real> grad_weight,
                            std::span<Real> grad_bias) {
  const std::size_t out = grad_bias.size();
  const auto d = check_affine<Real>(input.size(), rows, grad_weight.size(), out);
  for (std::size_t o = 0; o < out; ++o) {
    Real gb{0};
    for (std::size_t r = 0; r < rows; ++r) gb += grad_output[r * out + o];
    grad_bias[o] = gb;
    for (std::size_t i = 0; i < d.in; ++i) {
      Real sum{0};
      for (std::size_t r = 0; r < rows; ++r) sum += grad_output[r * out + o] * input[r * d.in + i];
      grad_weight[o * d.in + i] = sum;
    }
  }
}

}  // namespace serial

#define CLARE_INSTANTIATE(Real)                                                                  \
  template void affine_forward<Real>(std::span<const Real>, std::size_t, std::span<const Real>, \
                                     std::span<const Real>, std::span<Real>);                   \
  template void affine_backward_input<Real>(std::span<const Real>, std::size_t,                 \
                                            std::span<const Real>, std::span<Real>);            \
  template void affine_backward_params<Real>(std::span<const Real>, std::span<const Real>,      \
                                             std::size_t, std::span<Real>, std::span<Real>);    \
  template void relu_inplace<Real>(std::span<Real>);                                            \
  template void relu_backward_inplace<Real>(std::span<const Real>, std::span<Real>);            \
  template void serial::affine_forward<Real>(std::span<const Real>, std::size_t,                \
                                             std::span<const Real>, std::span<const Real>,      \
                                             std::span<Real>);                                  \
  template void serial::affine_backward_input<Real>(std::span<const Real>, std::size_t,         \
                                                    std::span<const Real>, std::span<Real>);    \
  template void serial::affine_backward_params<Real>(std::span<const Real>,                     \
                                                     std::span<const Real>, std::size_t,        \
                                                     std::span<Real>, std::span<Real>);

CLARE_INSTANTIATE(float)
CLARE_INSTANTIATE(double)

#undef CLARE_INSTANTIATE

}  // namespace clare::kernels
