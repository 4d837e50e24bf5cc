// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compsgd/message.hpp"
#include "compsgd/rng.hpp"
#include "compsgd/vec.hpp"

namespace compsgd {

enum class CompressorKind {
  Identity,       // pass-through (sparse encoding of all nonzeros)
  TopK,           // k largest-magnitude coordinates, deterministic
  RandK,          // k uniform coordinates scaled by d/k, unbiased
  NuRand1,        // one coordinate, importance-sampled by |x_i|, unbiased
  WangniK,        // magnitude-proportional keep probabilities, unbiased
  TernaryDither,  // sign * linf-scale with stochastic rounding, unbiased
  Induced,        // contractive part + unbiased residual correction
};

struct CompressorSpec {
  CompressorKind kind = CompressorKind::Identity;
  int k = 0;                          // budget, used by TopK / RandK / WangniK
  std::vector<CompressorSpec> inner;  // Induced: [contractive, unbiased]
};

CompressorSpec identity_spec();
CompressorSpec top_k_spec(int k);
CompressorSpec rand_k_spec(int k);
CompressorSpec nu_rand1_spec();
CompressorSpec wangni_spec(int k);
CompressorSpec ternary_spec();
CompressorSpec induced_spec(CompressorSpec contractive, CompressorSpec unbiased);

const char* kind_name(CompressorKind kind);
CompressorKind kind_from_name(const std::string& name);

/// True when every realization of the operator has expectation x. TopK (and
/// Identity trivially, with zero variance) are the deterministic members of
/// the contractive class; everything else here is unbiased by construction.
bool is_unbiased(const CompressorSpec& spec);

/// Throws ParameterError unless `spec` is well-formed for vectors of the
/// given dimension (budgets in [1, dim], induced parts valid: contractive
/// first part, unbiased second part).
void validate_spec(const CompressorSpec& spec, std::uint32_t dim);

/// Worst-case variance factor the operator is certified for at this
/// dimension: RandK/TopK/WangniK -> d/k, NuRand1 -> d, TernaryDither ->
/// sqrt(d), Identity -> 1, Induced -> combined factor of its parts.
double nominal_delta(const CompressorSpec& spec, std::uint32_t dim);

/// Keep probabilities for the magnitude-proportional sparsifier. Starts from
/// p_i = k|x_i| / ||x||_1 and water-fills: probabilities that exceed 1 are
/// clamped and the leftover budget is redistributed over the remaining
/// nonzero coordinates until none exceeds 1. Zero coordinates keep p_i = 0;
/// the total never exceeds k.
std::vector<double> wangni_keep_probabilities(const DenseVector& x, int k);

CompressedMessage compress_identity(const DenseVector& x);
CompressedMessage compress_top_k(const DenseVector& x, int k);
CompressedMessage compress_rand_k(const DenseVector& x, int k, Rng& rng);
CompressedMessage compress_nu_rand1(const DenseVector& x, Rng& rng);
CompressedMessage compress_wangni(const DenseVector& x, int k, Rng& rng);
CompressedMessage compress_ternary_dither(const DenseVector& x, Rng& rng);

/// Dispatch on `spec`. Validates first; deterministic kinds ignore rng.
CompressedMessage compress(const CompressorSpec& spec, const DenseVector& x, Rng& rng);

}  // namespace compsgd
