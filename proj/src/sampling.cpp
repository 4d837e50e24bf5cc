// SPDX-License-Identifier: Apache-2.0
#include "compsgd/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "compsgd/errors.hpp"

namespace compsgd {

namespace {

constexpr int kMaxExplicitN = 20;
constexpr int kMaxEnumerationN = 12;
constexpr double kPsdTol = -1e-10;

void check_n(int n, const char* who) {
  if (n < 1) throw ParameterError(std::string(who) + ": node count must be >= 1");
}

void require_proper(const SamplingScheme& s, const char* who) {
  if (!is_proper(s)) throw ParameterError(std::string(who) + ": scheme is improper (some p_i = 0)");
}

}  // namespace

SamplingScheme SamplingScheme::full(int n) {
  check_n(n, "SamplingScheme::full");
  SamplingScheme s;
  s.family_ = Family::Full;
  s.n_ = n;
  return s;
}

SamplingScheme SamplingScheme::b_nice(int n, int b) {
  check_n(n, "SamplingScheme::b_nice");
  if (b < 1 || b > n) throw ParameterError("SamplingScheme::b_nice: b must be in [1, n]");
  SamplingScheme s;
  s.family_ = Family::BNice;
  s.n_ = n;
  s.b_ = b;
  return s;
}

SamplingScheme SamplingScheme::independent(std::vector<double> p) {
  check_n(static_cast<int>(p.size()), "SamplingScheme::independent");
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("SamplingScheme::independent: probabilities must be in [0, 1]");
  SamplingScheme s;
  s.family_ = Family::Independent;
  s.n_ = static_cast<int>(p.size());
  s.p_ = std::move(p);
  return s;
}

SamplingScheme SamplingScheme::explicit_table(int n, std::vector<std::pair<std::uint32_t, double>> table) {
  check_n(n, "SamplingScheme::explicit_table");
  if (n > kMaxExplicitN) throw ParameterError("SamplingScheme::explicit_table: n must be <= 20");
  if (table.empty()) throw ParameterError("SamplingScheme::explicit_table: empty table");
  const std::uint32_t limit = (1u << n) - 1u;  // n <= 20 checked above
  double total = 0.0;
  for (const auto& [mask, prob] : table) {
    if (mask > limit) throw ParameterError("SamplingScheme::explicit_table: bitmask exceeds node count");
    if (!(prob >= 0.0) || !std::isfinite(prob))
      throw ParameterError("SamplingScheme::explicit_table: probabilities must be nonnegative");
    total += prob;
  }
  if (std::fabs(total - 1.0) > 1e-12) throw ParameterError("SamplingScheme::explicit_table: probabilities must sum to 1");
  std::vector<std::pair<std::uint32_t, double>> sorted = table;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].first == sorted[i - 1].first)
      throw ParameterError("SamplingScheme::explicit_table: duplicate bitmask");
  SamplingScheme s;
  s.family_ = Family::Explicit;
  s.n_ = n;
  s.table_ = std::move(table);
  return s;
}

std::string SamplingScheme::describe() const {
  std::ostringstream os;
  switch (family_) {
    case Family::Full: os << "full(n=" << n_ << ")"; break;
    case Family::BNice: os << "b_nice(n=" << n_ << ", b=" << b_ << ")"; break;
    case Family::Independent: os << "independent(n=" << n_ << ")"; break;
    case Family::Explicit: os << "explicit(n=" << n_ << ", rows=" << table_.size() << ")"; break;
  }
  return os.str();
}

std::vector<double> probability_vector(const SamplingScheme& s) {
  const int n = s.n();
  std::vector<double> p(n, 0.0);
  switch (s.family()) {
    case SamplingScheme::Family::Full:
      std::fill(p.begin(), p.end(), 1.0);
      break;
    case SamplingScheme::Family::BNice:
      std::fill(p.begin(), p.end(), static_cast<double>(s.b()) / n);
      break;
    case SamplingScheme::Family::Independent:
      p = s.p_;
      break;
    case SamplingScheme::Family::Explicit:
      for (const auto& [mask, prob] : s.table_)
        for (int i = 0; i < n; ++i)
          if (mask & (1u << i)) p[i] += prob;
      break;
  }
  return p;
}

Matrix probability_matrix(const SamplingScheme& s) {
  const int n = s.n();
  const std::vector<double> p = probability_vector(s);
  Matrix m(n, n);
  switch (s.family()) {
    case SamplingScheme::Family::Full:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = 1.0;
      break;
    case SamplingScheme::Family::BNice: {
      const double diag = static_cast<double>(s.b()) / n;
      const double off = (n > 1) ? (static_cast<double>(s.b()) * (s.b() - 1)) / (static_cast<double>(n) * (n - 1)) : diag;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = (i == j) ? diag : off;
      break;
    }
    case SamplingScheme::Family::Independent:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = (i == j) ? p[i] : p[i] * p[j];
      break;
    case SamplingScheme::Family::Explicit:
      for (const auto& [mask, prob] : s.table_)
        for (int i = 0; i < n; ++i) {
          if (!(mask & (1u << i))) continue;
          for (int j = 0; j < n; ++j)
            if (mask & (1u << j)) m(i, j) += prob;
        }
      break;
  }
  return m;
}

bool is_proper(const SamplingScheme& s) {
  for (double v : probability_vector(s))
    if (!(v > 0.0)) return false;
  return true;
}

double expected_cardinality(const SamplingScheme& s) {
  const std::vector<double> p = probability_vector(s);
  return std::accumulate(p.begin(), p.end(), 0.0);
}

std::vector<double> default_eso_vector(const SamplingScheme& s) {
  require_proper(s, "default_eso_vector");
  const std::vector<double> p = probability_vector(s);
  std::vector<double> v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) v[i] = s.n() * (1.0 - p[i]);
  return v;
}

EsoCertificate validate_eso(const SamplingScheme& s, const std::vector<double>& v) {
  require_proper(s, "validate_eso");
  if (s.n() > kMaxExplicitN) throw ParameterError("validate_eso: n must be <= 20");
  if (static_cast<int>(v.size()) != s.n()) throw ParameterError("validate_eso: certificate size mismatch");
  for (double vi : v)
    if (!(vi >= 0.0)) throw ParameterError("validate_eso: certificate entries must be nonnegative");

  const int n = s.n();
  const std::vector<double> p = probability_vector(s);
  const Matrix pm = probability_matrix(s);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double centered = pm(i, j) - p[i] * p[j];
      m(i, j) = ((i == j) ? p[i] * v[i] : 0.0) - centered;
    }
  const std::vector<double> eig = symmetric_eigenvalues(m);
  EsoCertificate cert;
  cert.v = v;
  cert.min_eig = eig.front();
  cert.valid = cert.min_eig >= kPsdTol;
  return cert;
}

std::vector<int> draw_subset(const SamplingScheme& s, Rng& rng) {
  require_proper(s, "draw_subset");
  const int n = s.n();
  std::vector<int> subset;
  switch (s.family()) {
    case SamplingScheme::Family::Full:
      subset.resize(n);
      std::iota(subset.begin(), subset.end(), 0);
      return subset;
    case SamplingScheme::Family::BNice: {
      std::vector<int> pool(n);
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < s.b(); ++i) {
        const std::uint64_t j = i + rng.below(static_cast<std::uint64_t>(n - i));
        std::swap(pool[i], pool[j]);
      }
      subset.assign(pool.begin(), pool.begin() + s.b());
      std::sort(subset.begin(), subset.end());
      return subset;
    }
    case SamplingScheme::Family::Independent:
      for (int i = 0; i < n; ++i)
        if (rng.uniform() < s.p_[i]) subset.push_back(i);
      return subset;
    case SamplingScheme::Family::Explicit: {
      const double target = rng.uniform();
      double cum = 0.0;
      std::uint32_t mask = s.table_.back().first;
      for (const auto& [m, prob] : s.table_) {
        cum += prob;
        if (target < cum) {
          mask = m;
          break;
        }
      }
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) subset.push_back(i);
      return subset;
    }
  }
  throw ParameterError("draw_subset: unknown sampling family");
}

std::vector<std::pair<std::uint32_t, double>> subset_support(const SamplingScheme& s) {
  const int n = s.n();
  if (n > kMaxExplicitN) throw ParameterError("subset_support: n must be <= 20");
  std::vector<std::pair<std::uint32_t, double>> support;
  switch (s.family()) {
    case SamplingScheme::Family::Full:
      support.emplace_back((1u << n) - 1u, 1.0);
      return support;
    case SamplingScheme::Family::BNice: {
      double count = 1.0;  // C(n, b)
      for (int i = 0; i < s.b(); ++i) count = count * (n - i) / (i + 1);
      const double prob = 1.0 / count;
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
        if (std::popcount(mask) == s.b()) support.emplace_back(mask, prob);
      return support;
    }
    case SamplingScheme::Family::Independent:
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double prob = 1.0;
        for (int i = 0; i < n; ++i) prob *= (mask & (1u << i)) ? s.p_[i] : 1.0 - s.p_[i];
        if (prob > 0.0) support.emplace_back(mask, prob);
      }
      return support;
    case SamplingScheme::Family::Explicit:
      for (const auto& row : s.table_)
        if (row.second > 0.0) support.push_back(row);
      return support;
  }
  throw ParameterError("subset_support: unknown sampling family");
}

ParticipationVariance pp_variance_parameters(const SamplingScheme& s, const std::vector<double>& v, double delta) {
  require_proper(s, "pp_variance_parameters");
  if (static_cast<int>(v.size()) != s.n()) throw ParameterError("pp_variance_parameters: certificate size mismatch");
  if (delta < 1.0) throw ParameterError("pp_variance_parameters: delta must be >= 1");
  for (double vi : v)
    if (!(vi >= 0.0)) throw ParameterError("pp_variance_parameters: certificate entries must be nonnegative");
  const std::vector<double> p = probability_vector(s);
  double a_s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a_s = std::max(a_s, v[i] / p[i]);
  ParticipationVariance out;
  out.a_s = a_s;
  out.delta_s = (delta * a_s + (delta - 1.0)) / s.n() + 1.0;
  return out;
}

VarianceInequality check_variance_inequality(const SamplingScheme& s, const std::vector<double>& v,
                                             const std::vector<DenseVector>& zetas) {
  require_proper(s, "check_variance_inequality");
  const int n = s.n();
  if (n > kMaxEnumerationN) throw ParameterError("check_variance_inequality: n must be <= 12");
  if (static_cast<int>(v.size()) != n) throw ParameterError("check_variance_inequality: certificate size mismatch");
  if (static_cast<int>(zetas.size()) != n) throw ParameterError("check_variance_inequality: need one vector per node");
  const std::size_t dim = zetas.front().size();
  for (const DenseVector& z : zetas)
    if (z.size() != dim) throw ParameterError("check_variance_inequality: vectors must share a dimension");

  const std::vector<double> p = probability_vector(s);
  DenseVector mean(dim, 0.0);
  for (const DenseVector& z : zetas) axpy(mean, 1.0 / n, z);

  VarianceInequality out;
  for (const auto& [mask, prob] : subset_support(s)) {
    if (prob <= 0.0) continue;
    DenseVector acc(dim, 0.0);
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) axpy(acc, 1.0 / (n * p[i]), zetas[i]);
    out.lhs += prob * squared_distance(acc, mean);
  }
  for (int i = 0; i < n; ++i) out.rhs += (v[i] / p[i]) * squared_norm(zetas[i]);
  out.rhs /= static_cast<double>(n) * n;
  return out;
}

SamplingScheme load_explicit_sampling(std::istream& in, int n) {
  std::vector<std::pair<std::uint32_t, double>> table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::uint64_t mask = 0;
    double prob = 0.0;
    if (!(ls >> mask)) {
      std::string rest;
      if (ls.clear(), ls >> rest)
        throw FormatError("sampling table line " + std::to_string(lineno) + ": expected 'bitmask probability'");
      continue;  // blank / comment-only line
    }
    if (!(ls >> prob)) throw FormatError("sampling table line " + std::to_string(lineno) + ": missing probability");
    std::string extra;
    if (ls >> extra) throw FormatError("sampling table line " + std::to_string(lineno) + ": trailing tokens");
    if (mask > 0xffffffffull) throw FormatError("sampling table line " + std::to_string(lineno) + ": bitmask too large");
    table.emplace_back(static_cast<std::uint32_t>(mask), prob);
  }
  try {
    return SamplingScheme::explicit_table(n, std::move(table));
  } catch (const ParameterError& e) {
    throw FormatError(std::string("sampling table: ") + e.what());
  }
}

SamplingScheme load_explicit_sampling_file(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open sampling table: " + path);
  return load_explicit_sampling(in, n);
}

}  // namespace compsgd
