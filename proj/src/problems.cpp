// SPDX-License-Identifier: Apache-2.0
#include "compsgd/problems.hpp"

#include <cmath>

#include "compsgd/errors.hpp"

namespace compsgd {

namespace {

void check_node(const QuadraticNodeFunction& f, int d) {
  if (f.a.rows() != d || f.a.cols() != d) throw ParameterError("problem: node Hessian has wrong shape");
  if (static_cast<int>(f.b.size()) != d) throw ParameterError("problem: node linear term has wrong size");
  for (double v : f.a.data())
    if (!std::isfinite(v)) throw ParameterError("problem: non-finite Hessian entry");
  if (!all_finite(f.b) || !std::isfinite(f.c)) throw ParameterError("problem: non-finite node coefficients");
  if (!is_symmetric(f.a, 1e-9)) throw ParameterError("problem: node Hessian must be symmetric");
}

}  // namespace

double node_value(const QuadraticNodeFunction& f, const DenseVector& x) {
  return 0.5 * quadratic_form(f.a, x) + dot(f.b, x) + f.c;
}

DenseVector node_gradient(const QuadraticNodeFunction& f, const DenseVector& x) {
  DenseVector g = matvec(f.a, x);
  axpy(g, 1.0, f.b);
  return g;
}

int dimension(const ProblemInstance& p) { return static_cast<int>(p.x0.size()); }
int node_count(const ProblemInstance& p) { return static_cast<int>(p.nodes.size()); }

double problem_value(const ProblemInstance& p, const DenseVector& x) {
  double s = 0.0;
  for (const QuadraticNodeFunction& f : p.nodes) s += node_value(f, x);
  return s / static_cast<double>(p.nodes.size());
}

DenseVector problem_gradient(const ProblemInstance& p, const DenseVector& x) {
  DenseVector g(x.size(), 0.0);
  for (const QuadraticNodeFunction& f : p.nodes) axpy(g, 1.0 / p.nodes.size(), node_gradient(f, x));
  return g;
}

ProblemConstants compute_constants(const std::vector<QuadraticNodeFunction>& nodes) {
  if (nodes.empty()) throw ParameterError("problem: need at least one node");
  const int d = nodes.front().a.rows();
  const int n = static_cast<int>(nodes.size());
  for (const QuadraticNodeFunction& f : nodes) check_node(f, d);

  Matrix avg_a(d, d);
  DenseVector avg_b(d, 0.0);
  double avg_c = 0.0;
  for (const QuadraticNodeFunction& f : nodes) {
    avg_a = matrix_sum(avg_a, f.a);
    axpy(avg_b, 1.0, f.b);
    avg_c += f.c;
  }
  avg_a = matrix_scaled(avg_a, 1.0 / n);
  for (double& v : avg_b) v /= n;
  avg_c /= n;

  ProblemConstants k;
  k.L = 0.0;
  for (const QuadraticNodeFunction& f : nodes) {
    const std::vector<double> eig = symmetric_eigenvalues(f.a);
    if (eig.front() < -1e-9) throw ParameterError("problem: node Hessian is not positive semidefinite");
    k.L = std::max(k.L, eig.back());
  }
  const std::vector<double> avg_eig = symmetric_eigenvalues(avg_a);
  k.mu = avg_eig.front();
  if (k.mu <= 0.0) throw ParameterError("problem: average Hessian must be positive definite");

  k.x_star = solve_linear(avg_a, scaled(avg_b, -1.0));
  k.f_star = 0.5 * quadratic_form(avg_a, k.x_star) + dot(avg_b, k.x_star) + avg_c;

  k.f_i_star.resize(n);
  double gap_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const DenseVector xi = solve_linear(nodes[i].a, scaled(nodes[i].b, -1.0));
    k.f_i_star[i] = node_value(nodes[i], xi);
    gap_sum += node_value(nodes[i], k.x_star) - k.f_i_star[i];
  }
  k.D = (2.0 * k.L / n) * gap_sum;
  if (k.D < 0.0 && k.D > -1e-9) k.D = 0.0;  // clip eigen-solver noise
  if (k.D < 0.0) throw ParameterError("problem: negative heterogeneity constant (inconsistent nodes)");
  return k;
}

ProblemInstance make_problem(std::vector<QuadraticNodeFunction> nodes, double noise_sigma2, DenseVector x0) {
  if (noise_sigma2 < 0.0 || !std::isfinite(noise_sigma2))
    throw ParameterError("problem: noise variance must be finite and nonnegative");
  ProblemInstance p;
  p.constants = compute_constants(nodes);
  const int d = nodes.front().a.rows();
  if (static_cast<int>(x0.size()) != d) throw ParameterError("problem: x0 has wrong size");
  if (!all_finite(x0)) throw ParameterError("problem: x0 has non-finite entries");
  p.nodes = std::move(nodes);
  p.noise_sigma2 = noise_sigma2;
  p.x0 = std::move(x0);
  return p;
}

ProblemInstance make_counterexample(double t) {
  if (!(t > 0.0)) throw ParameterError("make_counterexample: t must be positive");
  const std::vector<DenseVector> dirs = {{-3.0, 2.0, 2.0}, {2.0, -3.0, 2.0}, {2.0, 2.0, -3.0}};
  std::vector<QuadraticNodeFunction> nodes;
  nodes.reserve(3);
  for (const DenseVector& a : dirs) {
    QuadraticNodeFunction f;
    f.a = Matrix(3, 3);
    // Hessian of <a,x>^2 + (1/4)||x||^2 is 2 a a^T + (1/2) I
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f.a(r, c) = 2.0 * a[r] * a[c] + (r == c ? 0.5 : 0.0);
    f.b = DenseVector(3, 0.0);
    f.c = 0.0;
    nodes.push_back(std::move(f));
  }
  return make_problem(std::move(nodes), 0.0, DenseVector{t, t, t});
}

ProblemInstance make_random_quadratic(int n, int d, double mu, double L, double heterogeneity, double noise_sigma2,
                                      std::uint64_t seed) {
  if (n < 1) throw ParameterError("make_random_quadratic: n must be >= 1");
  if (d < 1) throw ParameterError("make_random_quadratic: d must be >= 1");
  if (!(mu > 0.0) || !(L >= mu)) throw ParameterError("make_random_quadratic: need 0 < mu <= L");
  if (heterogeneity < 0.0) throw ParameterError("make_random_quadratic: heterogeneity must be >= 0");

  Rng rng(derive_stream(seed, 0x9072e9f2u, 0x517cc1b7u));

  DenseVector shared(d);
  for (double& v : shared) v = rng.normal();

  std::vector<QuadraticNodeFunction> nodes;
  nodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    // spectrum inside [mu, L]; node 0 pins both endpoints so the instance
    // attains the requested smoothness exactly
    DenseVector eig(d);
    for (double& v : eig) v = mu + (L - mu) * rng.uniform();
    if (i == 0) {
      eig[0] = L;
      if (d > 1) eig[1] = mu;
    }
    const Matrix q = random_orthogonal(d, rng);
    Matrix a(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = r; c < d; ++c) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += q(r, j) * eig[j] * q(c, j);
        a(r, c) = s;
        a(c, r) = s;
      }

    DenseVector minimizer = shared;
    if (heterogeneity > 0.0) {
      DenseVector u(d);
      double nrm = 0.0;
      while (nrm < 1e-12) {
        for (double& v : u) v = rng.normal();
        nrm = norm(u);
      }
      axpy(minimizer, heterogeneity / nrm, u);
    }

    QuadraticNodeFunction f;
    f.a = std::move(a);
    f.b = scaled(matvec(f.a, minimizer), -1.0);
    f.c = 0.5 * quadratic_form(f.a, minimizer);  // so f_i(minimizer) = 0
    nodes.push_back(std::move(f));
  }

  ProblemConstants k = compute_constants(nodes);
  DenseVector u(d);
  double nrm = 0.0;
  while (nrm < 1e-12) {
    for (double& v : u) v = rng.normal();
    nrm = norm(u);
  }
  DenseVector x0 = k.x_star;
  axpy(x0, 1.0 / nrm, u);  // start at unit distance from the minimizer

  ProblemInstance p;
  p.nodes = std::move(nodes);
  p.noise_sigma2 = noise_sigma2;
  p.x0 = std::move(x0);
  p.constants = std::move(k);
  if (p.noise_sigma2 < 0.0) throw ParameterError("make_random_quadratic: noise variance must be >= 0");
  return p;
}

DenseVector gradient_oracle(const ProblemInstance& p, int node, const DenseVector& x, Rng& rng) {
  if (node < 0 || node >= node_count(p)) throw ParameterError("gradient_oracle: node index out of range");
  DenseVector g = node_gradient(p.nodes[node], x);
  if (p.noise_sigma2 > 0.0) {
    const double sd = std::sqrt(p.noise_sigma2 / static_cast<double>(g.size()));
    for (double& v : g) v += sd * rng.normal();
  }
  return g;
}

nlohmann::json problem_to_json(const ProblemInstance& p) {
  nlohmann::json j;
  j["noise_sigma2"] = p.noise_sigma2;
  j["x0"] = p.x0;
  j["nodes"] = nlohmann::json::array();
  for (const QuadraticNodeFunction& f : p.nodes) {
    nlohmann::json node;
    node["a"] = nlohmann::json::array();
    for (int r = 0; r < f.a.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < f.a.cols(); ++c) row.push_back(f.a(r, c));
      node["a"].push_back(std::move(row));
    }
    node["b"] = f.b;
    node["c"] = f.c;
    j["nodes"].push_back(std::move(node));
  }
  return j;
}

ProblemInstance problem_from_json(const nlohmann::json& j) {
  try {
    std::vector<QuadraticNodeFunction> nodes;
    for (const nlohmann::json& node : j.at("nodes")) {
      QuadraticNodeFunction f;
      const nlohmann::json& rows = node.at("a");
      const int d = static_cast<int>(rows.size());
      f.a = Matrix(d, d);
      for (int r = 0; r < d; ++r) {
        const nlohmann::json& row = rows.at(r);
        if (static_cast<int>(row.size()) != d) throw FormatError("problem json: ragged Hessian rows");
        for (int c = 0; c < d; ++c) f.a(r, c) = row.at(c).get<double>();
      }
      f.b = node.at("b").get<DenseVector>();
      f.c = node.at("c").get<double>();
      nodes.push_back(std::move(f));
    }
    return make_problem(std::move(nodes), j.at("noise_sigma2").get<double>(), j.at("x0").get<DenseVector>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("problem json: ") + e.what());
  }
}

}  // namespace compsgd
