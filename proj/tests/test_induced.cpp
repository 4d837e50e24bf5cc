// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "compsgd/compressors.hpp"
#include "compsgd/errors.hpp"
#include "compsgd/induced.hpp"
#include "compsgd/message.hpp"
#include "compsgd/rng.hpp"
#include "compsgd/vec.hpp"
#include "doctest.h"

using namespace compsgd;

namespace {

// all possible outcomes of induced(top-1, rand-1) on x, with probabilities:
// the top-1 stage is deterministic, the rand-1 residual stage picks each
// coordinate j uniformly and scales it by d
struct Outcome {
  DenseVector y;
  double prob = 0.0;
};

std::vector<Outcome> enumerate_top1_rand1(const DenseVector& x) {
  const int d = static_cast<int>(x.size());
  const DenseVector y1 = decompress(compress_top_k(x, 1));
  const DenseVector r = subtracted(x, y1);
  std::vector<Outcome> outcomes;
  for (int j = 0; j < d; ++j) {
    DenseVector y = y1;
    y[j] += static_cast<double>(d) * r[j];
    outcomes.push_back({std::move(y), 1.0 / d});
  }
  return outcomes;
}

}  // namespace

TEST_CASE("induced_delta formula") {
  // equal factors: delta - 1 + 1/delta, exactly
  for (double delta : {1.0, 2.0, 3.0, 8.0, 100.0}) {
    CHECK(induced_delta(delta, delta) == doctest::Approx(delta - 1.0 + 1.0 / delta).epsilon(1e-16));
  }
  CHECK(induced_delta(2.0, 2.0) == 1.5);
  // a perfect first stage (delta1 = 1) leaves nothing to correct
  CHECK(induced_delta(1.0, 50.0) == 1.0);
  // monotone in the residual factor
  CHECK(induced_delta(3.0, 2.0) < induced_delta(3.0, 5.0));
  // always at least 1 and never worse than the residual compressor alone
  for (double d1 : {1.5, 2.0, 10.0})
    for (double d2 : {1.0, 3.0, 7.0}) {
      const double v = induced_delta(d1, d2);
      CHECK(v >= 1.0);
      CHECK(v <= d2);
    }
  CHECK_THROWS_AS(induced_delta(0.5, 2.0), ParameterError);
  CHECK_THROWS_AS(induced_delta(2.0, 0.0), ParameterError);
}

TEST_CASE("split budget spec") {
  const CompressorSpec s5 = split_budget_induced_spec(5);
  CHECK(s5.kind == CompressorKind::Induced);
  CHECK(s5.inner[0].kind == CompressorKind::TopK);
  CHECK(s5.inner[0].k == 3);
  CHECK(s5.inner[1].kind == CompressorKind::WangniK);
  CHECK(s5.inner[1].k == 2);
  const CompressorSpec s2 = split_budget_induced_spec(2);
  CHECK(s2.inner[0].k == 1);
  CHECK(s2.inner[1].k == 1);
  CHECK_THROWS_AS(split_budget_induced_spec(1), ParameterError);
}

TEST_CASE("exact enumeration: mean is x and variance obeys the product bound") {
  Rng rng(2024);
  for (int d = 2; d <= 5; ++d) {
    for (int rep = 0; rep < 50; ++rep) {
      DenseVector x(d);
      for (double& v : x) v = rng.normal();
      const auto outcomes = enumerate_top1_rand1(x);

      DenseVector mean(d, 0.0);
      double second = 0.0, total_prob = 0.0;
      for (const auto& o : outcomes) {
        axpy(mean, o.prob, o.y);
        second += o.prob * squared_distance(o.y, x);
        total_prob += o.prob;
      }
      CHECK(total_prob == doctest::Approx(1.0).epsilon(1e-14));
      for (int i = 0; i < d; ++i) CHECK(mean[i] == doctest::Approx(x[i]).epsilon(1e-12));

      // E||C(x) - x||^2 <= (delta2 - 1)(1 - 1/delta1) ||x||^2 with
      // delta1 = delta2 = d for top-1 and rand-1
      const double delta = static_cast<double>(d);
      const double bound = (delta - 1.0) * (1.0 - 1.0 / delta) * squared_norm(x);
      CHECK(second <= bound * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("variance bound is tight on the all-ones vector") {
  for (int d = 2; d <= 5; ++d) {
    const DenseVector ones(d, 1.0);
    const auto outcomes = enumerate_top1_rand1(ones);
    double second = 0.0;
    for (const auto& o : outcomes) second += o.prob * squared_distance(o.y, ones);
    const double delta = static_cast<double>(d);
    const double bound = (delta - 1.0) * (1.0 - 1.0 / delta) * squared_norm(ones);
    // both sides equal (d-1)^2
    CHECK(second == doctest::Approx((delta - 1.0) * (delta - 1.0)).epsilon(1e-13));
    CHECK(second == doctest::Approx(bound).epsilon(1e-13));
  }
}

TEST_CASE("induced_compress realizes exactly the enumerated outcomes, uniformly") {
  Rng vec_rng(7);
  const int d = 4;
  DenseVector x(d);
  for (double& v : x) v = vec_rng.normal();
  const auto outcomes = enumerate_top1_rand1(x);

  Rng rng(99);
  const long trials = 40000;
  std::vector<long> hits(outcomes.size(), 0);
  for (long t = 0; t < trials; ++t) {
    const DenseVector y = decompress(induced_compress(top_k_spec(1), rand_k_spec(1), x, rng));
    bool matched = false;
    for (std::size_t o = 0; o < outcomes.size(); ++o) {
      if (squared_distance(y, outcomes[o].y) < 1e-20) {
        ++hits[o];
        matched = true;
        break;
      }
    }
    CHECK(matched);
  }
  for (std::size_t o = 0; o < outcomes.size(); ++o) {
    const double p = outcomes[o].prob;
    const double se = std::sqrt(p * (1.0 - p) / trials);
    CHECK(std::fabs(static_cast<double>(hits[o]) / trials - p) <= 4.0 * se);
  }
}

TEST_CASE("composite message carries both stages and their bits") {
  Rng rng(5);
  const DenseVector x = {4.0, -3.0, 2.0, -1.0, 0.5, 0.25, 8.0, -0.125, 0.0, 1.0};
  auto msg = induced_compress(top_k_spec(1), rand_k_spec(1), x, rng);
  CHECK(msg.dim == 10);
  const auto& parts = std::get<CompositePayload>(msg.payload).parts;
  REQUIRE(parts.size() == 2);
  // each stage sends at most one 36-bit coordinate at d=10
  CHECK(msg.bit_cost <= 72);
  CHECK(msg.bit_cost == parts[0].bit_cost + parts[1].bit_cost);
  // first stage is the deterministic top-1
  CHECK(decompress(parts[0]) == decompress(compress_top_k(x, 1)));
  // decoded sum reconstructs first + second
  const DenseVector sum = added(decompress(parts[0]), decompress(parts[1]));
  CHECK(decompress(msg) == sum);
}

TEST_CASE("induced dispatch goes through the generic compress entry point") {
  const DenseVector x = {1.0, -2.0, 0.5, 4.0};
  Rng a(11), b(11);
  const auto spec = induced_spec(top_k_spec(1), rand_k_spec(1));
  CHECK(serialize(compress(spec, x, a)) == serialize(induced_compress(top_k_spec(1), rand_k_spec(1), x, b)));
}

TEST_CASE("induced rejects invalid stage combinations") {
  Rng rng(1);
  const DenseVector x = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(induced_compress(top_k_spec(1), top_k_spec(1), x, rng), ParameterError);
  CHECK_THROWS_AS(induced_compress(top_k_spec(4), rand_k_spec(1), x, rng), ParameterError);
}
