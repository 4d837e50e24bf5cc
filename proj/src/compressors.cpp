// SPDX-License-Identifier: Apache-2.0
#include "compsgd/compressors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "compsgd/errors.hpp"
#include "compsgd/induced.hpp"

namespace compsgd {

namespace {

std::uint32_t checked_dim(const DenseVector& x) {
  if (x.empty()) throw ParameterError("compress: empty vector");
  if (!all_finite(x)) throw ParameterError("compress: vector has non-finite entries");
  return static_cast<std::uint32_t>(x.size());
}

void check_budget(int k, std::uint32_t dim, const char* who) {
  if (k < 1 || static_cast<std::uint32_t>(k) > dim)
    throw ParameterError(std::string(who) + ": budget k must be in [1, dim]");
}

CompressedMessage sparse_from_dense(std::uint32_t dim, const DenseVector& values,
                                    const std::vector<std::uint32_t>& indices) {
  std::vector<SparseEntry> entries;
  entries.reserve(indices.size());
  for (std::uint32_t i : indices)
    if (values[i] != 0.0) entries.push_back(SparseEntry{i, values[i]});
  return make_sparse_message(dim, std::move(entries));
}

}  // namespace

CompressorSpec identity_spec() { return CompressorSpec{CompressorKind::Identity, 0, {}}; }
CompressorSpec top_k_spec(int k) { return CompressorSpec{CompressorKind::TopK, k, {}}; }
CompressorSpec rand_k_spec(int k) { return CompressorSpec{CompressorKind::RandK, k, {}}; }
CompressorSpec nu_rand1_spec() { return CompressorSpec{CompressorKind::NuRand1, 0, {}}; }
CompressorSpec wangni_spec(int k) { return CompressorSpec{CompressorKind::WangniK, k, {}}; }
CompressorSpec ternary_spec() { return CompressorSpec{CompressorKind::TernaryDither, 0, {}}; }

CompressorSpec induced_spec(CompressorSpec contractive, CompressorSpec unbiased) {
  CompressorSpec spec;
  spec.kind = CompressorKind::Induced;
  spec.inner.reserve(2);
  spec.inner.push_back(std::move(contractive));
  spec.inner.push_back(std::move(unbiased));
  return spec;
}

const char* kind_name(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::Identity: return "identity";
    case CompressorKind::TopK: return "top_k";
    case CompressorKind::RandK: return "rand_k";
    case CompressorKind::NuRand1: return "nu_rand1";
    case CompressorKind::WangniK: return "wangni_k";
    case CompressorKind::TernaryDither: return "ternary_dither";
    case CompressorKind::Induced: return "induced";
  }
  throw ParameterError("kind_name: unknown compressor kind");
}

CompressorKind kind_from_name(const std::string& name) {
  if (name == "identity") return CompressorKind::Identity;
  if (name == "top_k") return CompressorKind::TopK;
  if (name == "rand_k") return CompressorKind::RandK;
  if (name == "nu_rand1") return CompressorKind::NuRand1;
  if (name == "wangni_k") return CompressorKind::WangniK;
  if (name == "ternary_dither") return CompressorKind::TernaryDither;
  if (name == "induced") return CompressorKind::Induced;
  throw ParameterError("unknown compressor name: " + name);
}

bool is_unbiased(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::Identity:
    case CompressorKind::RandK:
    case CompressorKind::NuRand1:
    case CompressorKind::WangniK:
    case CompressorKind::TernaryDither:
    case CompressorKind::Induced:  // contractive part + unbiased correction
      return true;
    case CompressorKind::TopK:
      return false;
  }
  throw ParameterError("is_unbiased: unknown compressor kind");
}

void validate_spec(const CompressorSpec& spec, std::uint32_t dim) {
  if (dim == 0) throw ParameterError("validate_spec: zero dimension");
  switch (spec.kind) {
    case CompressorKind::Identity:
    case CompressorKind::NuRand1:
    case CompressorKind::TernaryDither:
      if (!spec.inner.empty()) throw ParameterError("validate_spec: unexpected inner compressors");
      return;
    case CompressorKind::TopK:
    case CompressorKind::RandK:
    case CompressorKind::WangniK:
      if (!spec.inner.empty()) throw ParameterError("validate_spec: unexpected inner compressors");
      check_budget(spec.k, dim, "validate_spec");
      return;
    case CompressorKind::Induced: {
      if (spec.inner.size() != 2) throw ParameterError("validate_spec: induced needs exactly two parts");
      const CompressorSpec& c1 = spec.inner[0];
      const CompressorSpec& c2 = spec.inner[1];
      if (c1.kind == CompressorKind::Induced || c2.kind == CompressorKind::Induced)
        throw ParameterError("validate_spec: induced parts cannot themselves be induced");
      validate_spec(c1, dim);
      validate_spec(c2, dim);
      if (!is_unbiased(c2)) throw ParameterError("validate_spec: induced second part must be unbiased");
      return;
    }
  }
  throw ParameterError("validate_spec: unknown compressor kind");
}

double nominal_delta(const CompressorSpec& spec, std::uint32_t dim) {
  validate_spec(spec, dim);
  const double d = static_cast<double>(dim);
  switch (spec.kind) {
    case CompressorKind::Identity: return 1.0;
    case CompressorKind::TopK: return d / spec.k;
    case CompressorKind::RandK: return d / spec.k;
    case CompressorKind::NuRand1: return d;
    case CompressorKind::WangniK: return d / spec.k;
    case CompressorKind::TernaryDither: return std::sqrt(d);
    case CompressorKind::Induced:
      return induced_delta(nominal_delta(spec.inner[0], dim), nominal_delta(spec.inner[1], dim));
  }
  throw ParameterError("nominal_delta: unknown compressor kind");
}

std::vector<double> wangni_keep_probabilities(const DenseVector& x, int k) {
  const std::uint32_t dim = checked_dim(x);
  check_budget(k, dim, "wangni_keep_probabilities");
  std::vector<double> p(dim, 0.0);
  const double total = l1_norm(x);
  if (total == 0.0) return p;

  // Water-filling: coordinates whose proportional share exceeds 1 are pinned
  // at 1 and the leftover budget is re-spread over the rest. Each round pins
  // at least one more coordinate, so this terminates in <= dim rounds.
  std::vector<std::uint32_t> active;
  for (std::uint32_t i = 0; i < dim; ++i)
    if (x[i] != 0.0) active.push_back(i);
  double budget = static_cast<double>(k);
  while (!active.empty() && budget > 0.0) {
    double mass = 0.0;
    for (std::uint32_t i : active) mass += std::fabs(x[i]);
    int clamped = 0;
    std::vector<std::uint32_t> still_active;
    for (std::uint32_t i : active) {
      if (budget * std::fabs(x[i]) / mass >= 1.0) {
        p[i] = 1.0;
        ++clamped;
      } else {
        still_active.push_back(i);
      }
    }
    if (clamped == 0) {
      for (std::uint32_t i : still_active) p[i] = budget * std::fabs(x[i]) / mass;
      break;
    }
    budget -= clamped;  // cannot go negative: each clamp needs >= mass/budget of the l1 mass
    active = std::move(still_active);
  }
  return p;
}

CompressedMessage compress_identity(const DenseVector& x) {
  const std::uint32_t dim = checked_dim(x);
  std::vector<std::uint32_t> all(dim);
  std::iota(all.begin(), all.end(), 0u);
  return sparse_from_dense(dim, x, all);
}

CompressedMessage compress_top_k(const DenseVector& x, int k) {
  const std::uint32_t dim = checked_dim(x);
  check_budget(k, dim, "compress_top_k");
  std::vector<std::uint32_t> order(dim);
  std::iota(order.begin(), order.end(), 0u);
  // ties broken toward the lower index so the operator is a deterministic map
  std::stable_sort(order.begin(), order.end(), [&x](std::uint32_t a, std::uint32_t b) {
    return std::fabs(x[a]) > std::fabs(x[b]);
  });
  std::vector<std::uint32_t> chosen(order.begin(), order.begin() + k);
  std::sort(chosen.begin(), chosen.end());
  return sparse_from_dense(dim, x, chosen);
}

CompressedMessage compress_rand_k(const DenseVector& x, int k, Rng& rng) {
  const std::uint32_t dim = checked_dim(x);
  check_budget(k, dim, "compress_rand_k");
  // partial Fisher-Yates for a uniform k-subset
  std::vector<std::uint32_t> pool(dim);
  std::iota(pool.begin(), pool.end(), 0u);
  for (int i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.below(dim - static_cast<std::uint32_t>(i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::uint32_t> chosen(pool.begin(), pool.begin() + k);
  std::sort(chosen.begin(), chosen.end());
  const double scale = static_cast<double>(dim) / static_cast<double>(k);
  DenseVector scaled_x = scaled(x, scale);
  return sparse_from_dense(dim, scaled_x, chosen);
}

CompressedMessage compress_nu_rand1(const DenseVector& x, Rng& rng) {
  const std::uint32_t dim = checked_dim(x);
  const double total = l1_norm(x);
  if (total == 0.0) return make_sparse_message(dim, {});
  // pick coordinate i with probability |x_i| / ||x||_1; the kept value
  // x_i / p_i collapses to sign(x_i) * ||x||_1
  const double target = rng.uniform() * total;
  double cum = 0.0;
  std::uint32_t pick = 0;
  bool found = false;
  for (std::uint32_t i = 0; i < dim; ++i) {
    if (x[i] == 0.0) continue;
    cum += std::fabs(x[i]);
    pick = i;
    found = true;
    if (target < cum) break;
  }
  (void)found;  // total > 0 guarantees at least one nonzero
  const double value = (x[pick] > 0.0 ? total : -total);
  return make_sparse_message(dim, {SparseEntry{pick, value}});
}

CompressedMessage compress_wangni(const DenseVector& x, int k, Rng& rng) {
  const std::uint32_t dim = checked_dim(x);
  check_budget(k, dim, "compress_wangni");
  const std::vector<double> p = wangni_keep_probabilities(x, k);
  std::vector<SparseEntry> entries;
  for (std::uint32_t i = 0; i < dim; ++i) {
    if (p[i] <= 0.0) continue;
    if (p[i] >= 1.0) {
      entries.push_back(SparseEntry{i, x[i]});
    } else if (rng.uniform() < p[i]) {
      entries.push_back(SparseEntry{i, x[i] / p[i]});
    }
  }
  return make_sparse_message(dim, std::move(entries));
}

CompressedMessage compress_ternary_dither(const DenseVector& x, Rng& rng) {
  const std::uint32_t dim = checked_dim(x);
  const double scale = linf_norm(x);
  std::vector<std::int8_t> signs(dim, 0);
  if (scale > 0.0) {
    for (std::uint32_t i = 0; i < dim; ++i) {
      if (x[i] == 0.0) continue;
      const double q = std::fabs(x[i]) / scale;
      const bool keep = (q >= 1.0) || (rng.uniform() < q);
      if (keep) signs[i] = (x[i] > 0.0) ? 1 : -1;
    }
  }
  return make_ternary_message(dim, scale, std::move(signs));
}

CompressedMessage compress(const CompressorSpec& spec, const DenseVector& x, Rng& rng) {
  const std::uint32_t dim = checked_dim(x);
  validate_spec(spec, dim);
  switch (spec.kind) {
    case CompressorKind::Identity: return compress_identity(x);
    case CompressorKind::TopK: return compress_top_k(x, spec.k);
    case CompressorKind::RandK: return compress_rand_k(x, spec.k, rng);
    case CompressorKind::NuRand1: return compress_nu_rand1(x, rng);
    case CompressorKind::WangniK: return compress_wangni(x, spec.k, rng);
    case CompressorKind::TernaryDither: return compress_ternary_dither(x, rng);
    case CompressorKind::Induced: return induced_compress(spec.inner[0], spec.inner[1], x, rng);
  }
  throw ParameterError("compress: unknown compressor kind");
}

}  // namespace compsgd
