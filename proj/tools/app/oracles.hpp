#pragma once

// Reference computations that share no code path with the library kernels.

#include "jumpns/jump_measure.hpp"
#include "jumpns/spectral.hpp"

namespace jumpns::app {

/// -P[(u.grad)v] by direct summation over all wavevector pairs (O(n^4)),
/// truncated to the dealias mask and projected mode by mode.
CoefficientPair convolution_oracle(const VelocityField& u, const VelocityField& v);

/// Midpoint rule for int_0^T sum_j l(g(t, z_j)) nu_j dt on `cells` uniform cells.
double entropy_quadrature(const ControlField& g, const MarkSpace& space, int cells);

}  // namespace jumpns::app
