// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "compsgd/compressors.hpp"
#include "compsgd/errors.hpp"
#include "compsgd/optimizer.hpp"
#include "compsgd/problems.hpp"
#include "compsgd/vec.hpp"
#include "doctest.h"

using namespace compsgd;

TEST_CASE("mode names round-trip") {
  CHECK(mode_from_name("plain") == Mode::Plain);
  CHECK(mode_from_name("ef") == Mode::ErrorFeedback);
  CHECK(mode_from_name("pp") == Mode::PartialParticipation);
  for (Mode m : {Mode::Plain, Mode::ErrorFeedback, Mode::PartialParticipation})
    CHECK(mode_from_name(mode_name(m)) == m);
  CHECK_THROWS_AS(mode_from_name("EF"), ParameterError);
}

TEST_CASE("schedule: short horizon stays in the constant phase") {
  const Schedule s = Schedule::two_phase(1.0, 10.0, 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(s.eta(k) == 0.1);
    CHECK(s.weight(k) == doctest::Approx(std::pow(0.9, -(k + 1.0))).epsilon(1e-14));
  }
}

TEST_CASE("schedule: long horizon switches to decaying steps at t0") {
  const Schedule s = Schedule::two_phase(1.0, 10.0, 100);
  CHECK(s.t0() == 50);
  CHECK(s.kappa() == 20.0);
  for (int k = 0; k < 50; ++k) {
    CHECK(s.eta(k) == 0.1);
    CHECK(s.weight(k) == 0.0);
  }
  CHECK(s.eta(50) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.weight(50) == 400.0);
  CHECK(s.eta(60) == doctest::Approx(2.0 / 30.0).epsilon(1e-15));
  CHECK(s.weight(60) == 900.0);
  // stepsizes never exceed 1/d anywhere
  for (int k = 0; k <= 200; ++k) CHECK(s.eta(k) <= 0.1 + 1e-15);
}

TEST_CASE("schedule construction guards") {
  CHECK_THROWS_AS(Schedule::two_phase(0.0, 10.0, 5), ParameterError);
  CHECK_THROWS_AS(Schedule::two_phase(-1.0, 10.0, 5), ParameterError);
  CHECK_THROWS_AS(Schedule::two_phase(10.0, 10.0, 5), ParameterError);
  CHECK_THROWS_AS(Schedule::two_phase(11.0, 10.0, 5), ParameterError);
  CHECK_THROWS_AS(Schedule::two_phase(1.0, 10.0, -1), ParameterError);
  CHECK_THROWS_AS(Schedule::constant(0.0), ParameterError);
  CHECK_THROWS_AS(Schedule::constant(-0.1), ParameterError);
}

TEST_CASE("worker state shape per mode") {
  const ProblemInstance p = make_counterexample(1.0);
  for (Mode m : {Mode::Plain, Mode::PartialParticipation}) {
    const auto workers = make_worker_states(m, p);
    REQUIRE(workers.size() == 3);
    for (const auto& w : workers) CHECK(persistent_vector_count(w) == 0);
  }
  const auto ef = make_worker_states(Mode::ErrorFeedback, p);
  for (const auto& w : ef) {
    CHECK(persistent_vector_count(w) == 1);
    CHECK(*w.error == DenseVector(3, 0.0));
  }
}

TEST_CASE("steps reject mismatched worker state") {
  const ProblemInstance p = make_counterexample(1.0);
  const DenseVector x{1.0, 1.0, 1.0};
  const StepStreams streams{1, 0};
  auto plain = make_worker_states(Mode::Plain, p);
  auto ef = make_worker_states(Mode::ErrorFeedback, p);
  CHECK_THROWS_AS(dcsgd_step(x, ef, p, top_k_spec(1), 0.1, streams), ParameterError);
  CHECK_THROWS_AS(ef_step(x, plain, p, top_k_spec(1), 0.1, streams), ParameterError);
  CHECK_THROWS_AS(pp_step(x, ef, p, top_k_spec(1), SamplingScheme::full(3), 0.1, streams), ParameterError);
  CHECK_THROWS_AS(dcsgd_step(x, plain, p, top_k_spec(1), 0.0, streams), ParameterError);
  CHECK_THROWS_AS(pp_step(x, plain, p, top_k_spec(1), SamplingScheme::full(2), 0.1, streams), ParameterError);
}

TEST_CASE("error feedback: one exact round") {
  const ProblemInstance p = make_counterexample(1.0);
  auto workers = make_worker_states(Mode::ErrorFeedback, p);
  const DenseVector x{1.0, 1.0, 1.0};
  const StepResult r = ef_step(x, workers, p, top_k_spec(1), 1.0, StepStreams{7, 0});

  // worker 0 compresses eta*g + e = (-5.5, 4.5, 4.5); top-1 keeps the first
  CHECK(*workers[0].error == DenseVector{0.0, 4.5, 4.5});
  CHECK(*workers[1].error == DenseVector{4.5, 0.0, 4.5});
  CHECK(*workers[2].error == DenseVector{4.5, 4.5, 0.0});
  // each worker transmits a single spike of -5.5 on its own coordinate
  for (double v : r.aggregate) CHECK(v == doctest::Approx(-5.5 / 3.0).epsilon(1e-15));
  for (double v : r.x_next) CHECK(v == doctest::Approx(1.0 + 5.5 / 3.0).epsilon(1e-15));
  CHECK(r.bits == 3 * 34);  // 2 index bits + 32 value bits, per worker
}

TEST_CASE("error feedback: transmitted plus residual equals the target") {
  const ProblemInstance p = make_counterexample(1.0);
  auto workers = make_worker_states(Mode::ErrorFeedback, p);
  DenseVector x = p.x0;
  const double eta = 1.0 / 115.0;
  for (int k = 0; k < 40; ++k) {
    std::vector<DenseVector> before;
    std::vector<DenseVector> grads;
    for (const auto& w : workers) before.push_back(*w.error);
    for (int i = 0; i < 3; ++i) grads.push_back(node_gradient(p.nodes[i], x));
    const StepResult r = ef_step(x, workers, p, top_k_spec(1), eta, StepStreams{3, static_cast<std::uint64_t>(k)});
    // invariant per worker: eta*g_i + e_i = Delta_i + e_i'
    DenseVector delta_sum(3, 0.0);
    for (int i = 0; i < 3; ++i) {
      DenseVector target = before[i];
      axpy(target, eta, grads[i]);
      // Delta_i = target - e_i'
      for (int j = 0; j < 3; ++j) {
        const double delta_ij = target[j] - (*workers[i].error)[j];
        delta_sum[j] += delta_ij / 3.0;
      }
    }
    for (int j = 0; j < 3; ++j) CHECK(r.aggregate[j] == doctest::Approx(delta_sum[j]).epsilon(1e-12));
    x = r.x_next;
  }
}

TEST_CASE("plain greedy sparsification follows its closed form") {
  // On the divergence instance, plain top-1 from t * ones moves along the
  // diagonal: x^{k+1} = (1 + 11 eta / 6) x^k.
  const ProblemInstance p = make_counterexample(1.0);
  for (double eta : {0.01, 0.1, 1.0 / 34.5}) {
    RunConfig cfg;
    cfg.mode = Mode::Plain;
    cfg.compressor = top_k_spec(1);
    cfg.schedule = Schedule::constant(eta);
    cfg.iterations = 50;
    cfg.seed = 5;
    const RunRecord rec = run(p, cfg);
    REQUIRE(rec.rows.size() == 51);
    CHECK(!rec.diverged);
    const double rho = 1.0 + 11.0 * eta / 6.0;
    for (int k = 0; k <= 50; ++k) {
      const double s = std::pow(rho, k);
      CHECK(rec.rows[k].dist2 == doctest::Approx(3.0 * s * s).epsilon(1e-9));
      CHECK(rec.rows[k].f_gap == doctest::Approx(1.75 * s * s).epsilon(1e-9));
    }
    // deterministic: the seed is never consulted by top-k with exact oracles
    cfg.seed = 77;
    const RunRecord rec2 = run(p, cfg);
    CHECK(rec2.rows.back().f_gap == rec.rows.back().f_gap);
  }
}

TEST_CASE("plain greedy sparsification is flagged divergent at the critical stepsize") {
  const ProblemInstance p = make_counterexample(1.0);
  RunConfig cfg;
  cfg.mode = Mode::Plain;
  cfg.compressor = top_k_spec(1);
  cfg.schedule = Schedule::constant(1.0 / 115.0);
  cfg.iterations = 4000;
  cfg.seed = 1;
  const RunRecord rec = run(p, cfg);
  CHECK(rec.diverged);
  CHECK(rec.rows.size() < 4001);  // halted early
  CHECK(rec.rows.back().dist2 > 1e23);
  // error feedback at the same stepsize converges instead
  cfg.mode = Mode::ErrorFeedback;
  const RunRecord ef = run(p, cfg);
  CHECK(!ef.diverged);
  CHECK(ef.rows.back().f_gap < 1e-6);
}

TEST_CASE("identity compression with exact oracles is gradient descent, bitwise") {
  const ProblemInstance p = make_counterexample(1.0);
  const double eta = 1.0 / 34.5;
  RunConfig cfg;
  cfg.mode = Mode::Plain;
  cfg.compressor = identity_spec();
  cfg.schedule = Schedule::constant(eta);
  cfg.iterations = 60;
  cfg.seed = 9;
  const RunRecord rec = run(p, cfg);

  // hand-rolled descent replicating the implementation's operation order
  DenseVector x = p.x0;
  const int n = node_count(p);
  for (int k = 0; k <= 60; ++k) {
    CHECK(rec.rows[k].f_gap == problem_value(p, x) - p.constants.f_star);
    CHECK(rec.rows[k].dist2 == squared_distance(x, p.constants.x_star));
    if (k == 60) break;
    DenseVector acc(3, 0.0);
    for (int i = 0; i < n; ++i) {
      const DenseVector g = node_gradient(p.nodes[i], x);
      for (int j = 0; j < 3; ++j) acc[j] += (1.0 / n) * g[j];
    }
    axpy(x, -eta, acc);
  }
  // with eta <= 1/L the descent is monotone
  for (std::size_t k = 1; k < rec.rows.size(); ++k) CHECK(rec.rows[k].f_gap <= rec.rows[k - 1].f_gap);
}

TEST_CASE("aggregates are unbiased estimates of the full gradient") {
  const ProblemInstance p = make_counterexample(1.0);
  const DenseVector x{0.4, -1.2, 0.9};
  const DenseVector exact = problem_gradient(p, x);
  const long trials = 40000;

  SUBCASE("random sparsification, full participation") {
    auto workers = make_worker_states(Mode::Plain, p);
    // per-coordinate variance of the averaged rand-1 estimate
    DenseVector var(3, 0.0);
    for (int i = 0; i < 3; ++i) {
      const DenseVector g = node_gradient(p.nodes[i], x);
      for (int j = 0; j < 3; ++j) {
        // y_j = 3 g_j with prob 1/3: E y^2 = 3 g_j^2, var = 2 g_j^2
        var[j] += 2.0 * g[j] * g[j] / 9.0;
      }
    }
    DenseVector sum(3, 0.0);
    for (long t = 0; t < trials; ++t) {
      const StepResult r = dcsgd_step(x, workers, p, rand_k_spec(1), 1.0, StepStreams{11, static_cast<std::uint64_t>(t)});
      for (int j = 0; j < 3; ++j) sum[j] += r.aggregate[j] - exact[j];
    }
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt(var[j] / trials);
      CHECK(std::fabs(sum[j] / trials) <= 4.0 * se);
    }
  }
  SUBCASE("identity compression, singleton participation") {
    auto workers = make_worker_states(Mode::PartialParticipation, p);
    const auto scheme = SamplingScheme::b_nice(3, 1);
    // agg equals the chosen node's gradient; variance over the uniform choice
    DenseVector var(3, 0.0);
    for (int j = 0; j < 3; ++j) {
      double m2 = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double gij = node_gradient(p.nodes[i], x)[j];
        m2 += gij * gij / 3.0;
      }
      var[j] = m2 - exact[j] * exact[j];
    }
    DenseVector sum(3, 0.0);
    for (long t = 0; t < trials; ++t) {
      const StepResult r =
          pp_step(x, workers, p, identity_spec(), scheme, 1.0, StepStreams{13, static_cast<std::uint64_t>(t)});
      for (int j = 0; j < 3; ++j) sum[j] += r.aggregate[j] - exact[j];
    }
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt(var[j] / trials);
      CHECK(std::fabs(sum[j] / trials) <= 4.0 * se);
    }
  }
}

TEST_CASE("full-scheme participation reproduces the plain run bit for bit") {
  const ProblemInstance p = make_random_quadratic(4, 6, 1.0, 8.0, 1.0, 2.0, 17);
  RunConfig plain;
  plain.mode = Mode::Plain;
  plain.compressor = rand_k_spec(2);
  plain.schedule = Schedule::constant(0.05);
  plain.iterations = 50;
  plain.seed = 23;
  RunConfig pp = plain;
  pp.mode = Mode::PartialParticipation;
  pp.sampling = SamplingScheme::full(4);

  const RunRecord a = run(p, plain);
  const RunRecord b = run(p, pp);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].f_gap == b.rows[k].f_gap);
    CHECK(a.rows[k].dist2 == b.rows[k].dist2);
    CHECK(a.rows[k].bits_up == b.rows[k].bits_up);
  }
  CHECK(a.output_point == b.output_point);
  CHECK(a.total_bits == b.total_bits);
}

TEST_CASE("averaging over more workers shrinks the aggregate variance like 1/n") {
  // n copies of one node: every worker estimates the same gradient
  const ProblemInstance base = make_random_quadratic(1, 6, 1.0, 5.0, 0.0, 0.0, 31);
  const DenseVector x = base.x0;
  const long trials = 20000;
  std::vector<double> var_by_n;
  for (int n : {1, 2, 4}) {
    std::vector<QuadraticNodeFunction> nodes(n, base.nodes[0]);
    const ProblemInstance p = make_problem(nodes, 0.0, base.x0);
    auto workers = make_worker_states(Mode::Plain, p);
    const DenseVector exact = problem_gradient(p, x);
    double acc = 0.0;
    for (long t = 0; t < trials; ++t) {
      const StepResult r =
          dcsgd_step(x, workers, p, rand_k_spec(2), 1.0, StepStreams{41, static_cast<std::uint64_t>(t)});
      acc += squared_distance(r.aggregate, exact);
    }
    var_by_n.push_back(acc / trials);
  }
  CHECK(var_by_n[0] / var_by_n[1] == doctest::Approx(2.0).epsilon(0.25));
  CHECK(var_by_n[0] / var_by_n[2] == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("run bookkeeping") {
  const ProblemInstance p = make_counterexample(1.0);
  SUBCASE("zero iterations records only the start point") {
    RunConfig cfg;
    cfg.mode = Mode::Plain;
    cfg.compressor = identity_spec();
    cfg.schedule = Schedule::constant(0.01);
    cfg.iterations = 0;
    const RunRecord rec = run(p, cfg);
    REQUIRE(rec.rows.size() == 1);
    CHECK(rec.rows[0].k == 0);
    CHECK(rec.rows[0].bits_up == 0);
    CHECK(rec.output_point == p.x0);
    CHECK(rec.total_bits == 0);
  }
  SUBCASE("bits accumulate exactly") {
    RunConfig cfg;
    cfg.mode = Mode::Plain;
    cfg.compressor = top_k_spec(1);
    cfg.schedule = Schedule::constant(0.001);
    cfg.iterations = 10;
    const RunRecord rec = run(p, cfg);
    // 3 workers x (2 index bits + 32 value bits) per step
    for (int k = 0; k < 10; ++k) CHECK(rec.rows[k].bits_up == 102);
    CHECK(rec.rows[10].bits_up == 0);
    CHECK(rec.total_bits == 1020);
  }
  SUBCASE("configuration is validated") {
    RunConfig cfg;
    cfg.mode = Mode::PartialParticipation;
    cfg.compressor = identity_spec();
    cfg.iterations = 1;
    CHECK_THROWS_AS(run(p, cfg), ParameterError);  // missing scheme
    cfg.sampling = SamplingScheme::full(2);
    CHECK_THROWS_AS(run(p, cfg), ParameterError);  // wrong node count
    cfg.mode = Mode::Plain;
    cfg.sampling = SamplingScheme::full(3);
    CHECK_THROWS_AS(run(p, cfg), ParameterError);  // scheme without pp
    cfg.sampling.reset();
    cfg.compressor = top_k_spec(9);
    CHECK_THROWS_AS(run(p, cfg), ParameterError);  // budget beyond dimension
    cfg.compressor = identity_spec();
    cfg.iterations = -1;
    CHECK_THROWS_AS(run(p, cfg), ParameterError);
  }
}

TEST_CASE("rate ceilings") {
  SUBCASE("averaged variance factor") {
    CHECK(averaged_delta(4.0, 1) == 4.0);
    CHECK(averaged_delta(4.0, 2) == 2.5);
    CHECK(averaged_delta(4.0, 4) == 1.75);
    CHECK(averaged_delta(4.0, 8) == 1.375);
    CHECK(averaged_delta(1.0, 5) == 1.0);
    CHECK_THROWS_AS(averaged_delta(0.5, 2), ParameterError);
    CHECK_THROWS_AS(averaged_delta(2.0, 0), ParameterError);
  }
  SUBCASE("full-participation ceiling matches the closed form") {
    const double delta_n = 1.375;  // delta = 4, n = 8
    const double L = 10.0, mu = 1.0, sigma2 = 1.0, D = 0.5, r0 = 1.0;
    const int n = 8, T = 1000;
    const double head = 64.0 * delta_n * L * r0 * std::exp(-mu * T / (4.0 * delta_n * L));
    const double tail = 36.0 * ((delta_n - 1.0) * D + 4.0 * sigma2 / n) / (mu * T);
    CHECK(dcsgd_rate_bound(delta_n, n, L, mu, sigma2, D, r0, T) == doctest::Approx(head + tail).epsilon(1e-15));
  }
  SUBCASE("no compression and one worker reduces to the plain sgd ceiling") {
    const double b = dcsgd_rate_bound(1.0, 1, 2.0, 1.0, 3.0, 0.7, 1.5, 100);
    const double head = 64.0 * 2.0 * 1.5 * std::exp(-100.0 / 8.0);
    const double tail = 36.0 * 3.0 / 100.0;  // D is scaled away by delta_n - 1 = 0
    CHECK(b == doctest::Approx(head + tail).epsilon(1e-15));
  }
  SUBCASE("participation ceiling with zero a_s equals the full one") {
    // full scheme: a_s = 0, delta_s = delta_n
    const double full = dcsgd_rate_bound(1.375, 8, 10.0, 1.0, 1.0, 0.5, 1.0, 1000);
    const double pp = dcsgd_pp_rate_bound(4.0, 0.0, 1.375, 8, 10.0, 1.0, 1.0, 0.5, 1.0, 1000);
    CHECK(full == pp);
  }
  SUBCASE("participation ceiling pays the a_s noise factor") {
    const double quiet = dcsgd_pp_rate_bound(2.0, 0.0, 7.25, 4, 10.0, 1.0, 1.0, 0.0, 1.0, 500);
    const double loud = dcsgd_pp_rate_bound(2.0, 12.0, 7.25, 4, 10.0, 1.0, 1.0, 0.0, 1.0, 500);
    const double extra = 36.0 * (12.0 * 2.0 * 1.0 / 4.0) / 500.0;
    CHECK(loud - quiet == doctest::Approx(extra).epsilon(1e-12));
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(dcsgd_rate_bound(0.9, 1, 2.0, 1.0, 0.0, 0.0, 1.0, 10), ParameterError);
    CHECK_THROWS_AS(dcsgd_rate_bound(1.0, 1, 0.5, 1.0, 0.0, 0.0, 1.0, 10), ParameterError);
    CHECK_THROWS_AS(dcsgd_rate_bound(1.0, 1, 2.0, 1.0, 0.0, 0.0, 1.0, 0), ParameterError);
    CHECK_THROWS_AS(dcsgd_pp_rate_bound(0.5, 0.0, 1.0, 1, 2.0, 1.0, 0.0, 0.0, 1.0, 10), ParameterError);
    CHECK_THROWS_AS(dcsgd_pp_rate_bound(1.0, -0.1, 1.0, 1, 2.0, 1.0, 0.0, 0.0, 1.0, 10), ParameterError);
  }
}
