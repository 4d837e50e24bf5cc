// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compsgd/linalg.hpp"
#include "compsgd/rng.hpp"
#include "compsgd/vec.hpp"

#include "json.hpp"

namespace compsgd {

/// f_i(x) = 1/2 x^T A x + b^T x + c with symmetric A.
struct QuadraticNodeFunction {
  Matrix a;
  DenseVector b;
  double c = 0.0;
};

double node_value(const QuadraticNodeFunction& f, const DenseVector& x);
DenseVector node_gradient(const QuadraticNodeFunction& f, const DenseVector& x);

/// Closed-form constants of the averaged objective f = (1/n) sum f_i:
///   L       largest eigenvalue over the node Hessians (smoothness of every
///           node, hence the expected-smoothness constant of the oracle)
///   mu      smallest eigenvalue of the average Hessian
///   x_star  minimizer of f, f_star = f(x_star)
///   f_i_star per-node minima
///   D       (2L/n) * sum_i (f_i(x_star) - f_i_star); zero iff all nodes
///           share the minimizer
struct ProblemConstants {
  double L = 0.0;
  double mu = 0.0;
  DenseVector x_star;
  double f_star = 0.0;
  std::vector<double> f_i_star;
  double D = 0.0;
};

struct ProblemInstance {
  std::vector<QuadraticNodeFunction> nodes;
  double noise_sigma2 = 0.0;
  DenseVector x0;
  ProblemConstants constants;
};

int dimension(const ProblemInstance& p);
int node_count(const ProblemInstance& p);

/// Value / exact gradient of the averaged objective.
double problem_value(const ProblemInstance& p, const DenseVector& x);
DenseVector problem_gradient(const ProblemInstance& p, const DenseVector& x);

/// Derive all constants from the node functions (eigen-iteration + linear
/// solves). Throws ParameterError on singular or unbounded-below instances.
ProblemConstants compute_constants(const std::vector<QuadraticNodeFunction>& nodes);

/// Validate nodes, compute constants, assemble an instance.
ProblemInstance make_problem(std::vector<QuadraticNodeFunction> nodes, double noise_sigma2, DenseVector x0);

/// The 3-node, 3-dimensional instance on which plain greedy sparsification
/// provably diverges:
///   f_i(x) = <a_i, x>^2 + (1/4)||x||^2,
///   a_1 = (-3, 2, 2), a_2 = (2, -3, 2), a_3 = (2, 2, -3),
/// started at x0 = (t, t, t) with t > 0. The unique minimizer is x* = 0 with
/// f* = 0, and each node is itself minimized at 0.
ProblemInstance make_counterexample(double t);

/// Random instance with node Hessian spectra inside [mu, L] (endpoints
/// pinned on node 0), per-node minimizers spread around a shared point with
/// magnitude `heterogeneity` (0 forces identical minimizers and hence D = 0),
/// and x0 placed at unit distance from x*.
ProblemInstance make_random_quadratic(int n, int d, double mu, double L, double heterogeneity, double noise_sigma2,
                                      std::uint64_t seed);

/// Stochastic gradient of node i at x: exact gradient plus isotropic
/// Gaussian noise with total variance noise_sigma2 (none when it is zero).
DenseVector gradient_oracle(const ProblemInstance& p, int node, const DenseVector& x, Rng& rng);

/// JSON round-trip (matrices row-major). Constants are recomputed on load,
/// never trusted from the document.
nlohmann::json problem_to_json(const ProblemInstance& p);
ProblemInstance problem_from_json(const nlohmann::json& j);

}  // namespace compsgd
