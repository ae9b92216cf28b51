#pragma once

#include <cstddef>
#include <span>

// Dense-layer kernels. Matrices are row-major; a weight matrix is
// outputs x inputs, so row o holds the fan-in of unit o.
//
// The clare::kernels versions are OpenMP-parallel. Every output element is
// reduced in a fixed order that does not depend on the thread count, so
// results are bitwise identical for 1 or N threads. clare::kernels::serial
// holds the plain triple-loop reference the tests compare against.
namespace clare::kernels {

// output[r, o] = bias[o] + sum_i weight[o, i] * input[r, i]
template <typename Real>
void affine_forward(std::span<const Real> input, std::size_t rows, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> output);

// grad_input[r, i] = sum_o grad_output[r, o] * weight[o, i]
template <typename Real>
void affine_backward_input(std::span<const Real> grad_output, std::size_t rows,
                           std::span<const Real> weight, std::span<Real> grad_input);

// grad_weight[o, i] = sum_r grad_output[r, o] * input[r, i]
// grad_bias[o]      = sum_r grad_output[r, o]
// Both are overwritten.
template <typename Real>
void affine_backward_params(std::span<const Real> grad_output, std::span<const Real> input,
                            std::size_t rows, std::span<Real> grad_weight,
                            std::span<Real> grad_bias);

template <typename Real>
void relu_inplace(std::span<Real> values);

// grad[i] = 0 wherever activation[i] <= 0.
template <typename Real>
void relu_backward_inplace(std::span<const Real> activation, std::span<Real> grad);

namespace serial {

template <typename Real>
void affine_forward(std::span<const Real> input, std::size_t rows, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> output);

template <typename Real>
void affine_backward_input(std::span<const Real> grad_output, std::size_t rows,
                           std::span<const Real> weight, std::span<Real> grad_input);

template <typename Real>
void affine_backward_params(std::span<const Real> grad_output, std::span<const Real> input,
                            std::size_t rows, std::span<Real> grad_weight,
                            std::span<Real> grad_bias);

}  // namespace serial

}  // namespace clare::kernels
