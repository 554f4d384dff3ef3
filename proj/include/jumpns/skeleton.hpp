#pragma once

// Deterministic controlled equation (zero-noise limit under a control g):
//
//   du/dt + A u - B(u) = f + sum_j G(u, z_j) (g(t, z_j) - 1) nu(z_j)
//
// integrated with the same scheme and grid as the stochastic solver, so
// that g = 1 reproduces the noise-free stochastic run bit for bit.

#include <vector>

#include "jumpns/jump_measure.hpp"
#include "jumpns/spde.hpp"

namespace jumpns {

struct SkeletonProblem {
  VelocityField u0;
  SolverParams params;
  NoiseCoefficient noise;
  MarkSpace space;
  ControlField g;
};

/// sum_j G(u, z_j) (g(t, z_j) - 1) nu(z_j).
VelocityField shifted_drift(const VelocityField& u, const NoiseCoefficient& noise, const ControlField& g,
                            double t, const MarkSpace& space);

Trajectory solve_skeleton(const SkeletonProblem& problem);

/// Same problem with a different control.
Trajectory solve_skeleton(const SkeletonProblem& problem, const ControlField& g);

/// sup_t |a(t) - b(t)|_V^2 + int |a - b|_D(A)^2 dt over two runs that stored
/// every state (snapshot_stride = 1).
double upsilon_v_distance(const Trajectory& a, const Trajectory& b);

/// Distances d_n between u^{g_n} and u^{g_limit} in the Upsilon^V path norm.
std::vector<double> skeleton_continuity_probe(const std::vector<ControlField>& g_sequence,
                                              const ControlField& g_limit, const SkeletonProblem& problem);

}  // namespace jumpns
