// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "compsgd/linalg.hpp"
#include "compsgd/rng.hpp"
#include "compsgd/vec.hpp"

namespace compsgd {

/// Distribution over subsets of [n] deciding which workers participate in a
/// given round. Immutable after construction; every query is read-only.
class SamplingScheme {
 public:
  enum class Family { Full, BNice, Independent, Explicit };

  /// Every worker participates every round.
  static SamplingScheme full(int n);
  /// Uniformly random subset of exactly b workers.
  static SamplingScheme b_nice(int n, int b);
  /// Worker i participates independently with probability p[i].
  static SamplingScheme independent(std::vector<double> p);
  /// Arbitrary distribution given as (subset bitmask, probability) rows.
  /// n <= 20; probabilities nonnegative, summing to 1 within 1e-12; masks
  /// unique and < 2^n.
  static SamplingScheme explicit_table(int n, std::vector<std::pair<std::uint32_t, double>> table);

  Family family() const { return family_; }
  int n() const { return n_; }
  int b() const { return b_; }  // BNice only
  const std::vector<std::pair<std::uint32_t, double>>& table() const { return table_; }
  std::string describe() const;

 private:
  SamplingScheme() = default;
  Family family_ = Family::Full;
  int n_ = 0;
  int b_ = 0;
  std::vector<double> p_;  // Independent only
  std::vector<std::pair<std::uint32_t, double>> table_;

  friend std::vector<double> probability_vector(const SamplingScheme&);
  friend Matrix probability_matrix(const SamplingScheme&);
  friend std::vector<int> draw_subset(const SamplingScheme&, Rng&);
  friend std::vector<std::pair<std::uint32_t, double>> subset_support(const SamplingScheme&);
};

/// p_i = Prob(i in S). Defined for improper schemes too (entries may be 0).
std::vector<double> probability_vector(const SamplingScheme& s);

/// P_ij = Prob({i,j} in S); symmetric, diagonal equal to p. Closed forms for
/// the parametric families, enumeration for Explicit.
Matrix probability_matrix(const SamplingScheme& s);

/// Every worker has positive inclusion probability.
bool is_proper(const SamplingScheme& s);

/// Sum of inclusion probabilities = expected participating count.
double expected_cardinality(const SamplingScheme& s);

/// The always-valid diagonal certificate v_i = n(1 - p_i). Requires a proper
/// scheme.
std::vector<double> default_eso_vector(const SamplingScheme& s);

struct EsoCertificate {
  std::vector<double> v;
  bool valid = false;
  double min_eig = 0.0;
};

/// Checks Diag(p dot v) - (P - p p^T) >= 0 by symmetric eigen-iteration;
/// valid iff the smallest eigenvalue is >= -1e-10. Entries of v must be
/// nonnegative (ParameterError otherwise); scheme must be proper, n <= 20.
EsoCertificate validate_eso(const SamplingScheme& s, const std::vector<double>& v);

/// Sample one participating subset, ascending worker indices.
std::vector<int> draw_subset(const SamplingScheme& s, Rng& rng);

/// All subsets with positive probability as (bitmask, probability) pairs.
/// n <= 20.
std::vector<std::pair<std::uint32_t, double>> subset_support(const SamplingScheme& s);

struct ParticipationVariance {
  double a_s = 0.0;
  double delta_s = 1.0;
};

/// a_S = max_i v_i / p_i and delta_S = (delta * a_S + (delta - 1)) / n + 1,
/// the effective variance parameters of compression + participation noise.
/// With the full scheme and v = 0 this reduces to the n-averaged factor
/// 1 + (delta - 1)/n. Requires proper scheme, v >= 0, delta >= 1.
ParticipationVariance pp_variance_parameters(const SamplingScheme& s, const std::vector<double>& v, double delta);

struct VarianceInequality {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Exact check of the participation variance bound
///   E|| sum_{i in S} zeta_i/(n p_i) - mean(zeta) ||^2
///     <= (1/n^2) sum_i (v_i/p_i) ||zeta_i||^2
/// by enumeration over the subset support. Requires proper scheme, n <= 12.
VarianceInequality check_variance_inequality(const SamplingScheme& s, const std::vector<double>& v,
                                             const std::vector<DenseVector>& zetas);

/// Parse an explicit scheme from lines of "bitmask probability" (blank lines
/// and '#' comments skipped). Bitmasks are plain integers, bit i = worker i.
SamplingScheme load_explicit_sampling(std::istream& in, int n);
SamplingScheme load_explicit_sampling_file(const std::string& path, int n);

}  // namespace compsgd
