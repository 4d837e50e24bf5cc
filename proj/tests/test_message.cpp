// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <vector>

#include "compsgd/errors.hpp"
#include "compsgd/message.hpp"
#include "compsgd/rng.hpp"
#include "doctest.h"

using namespace compsgd;

namespace {

bool same_message(const CompressedMessage& a, const CompressedMessage& b) {
  if (a.dim != b.dim || a.bit_cost != b.bit_cost) return false;
  if (a.payload.index() != b.payload.index()) return false;
  if (const auto* sa = std::get_if<SparsePayload>(&a.payload)) {
    const auto& sb = std::get<SparsePayload>(b.payload);
    if (sa->entries.size() != sb.entries.size()) return false;
    for (std::size_t i = 0; i < sa->entries.size(); ++i)
      if (sa->entries[i].index != sb.entries[i].index || sa->entries[i].value != sb.entries[i].value) return false;
    return true;
  }
  if (const auto* ta = std::get_if<TernaryPayload>(&a.payload)) {
    const auto& tb = std::get<TernaryPayload>(b.payload);
    return ta->scale == tb.scale && ta->signs == tb.signs;
  }
  const auto& ca = std::get<CompositePayload>(a.payload);
  const auto& cb = std::get<CompositePayload>(b.payload);
  if (ca.parts.size() != cb.parts.size()) return false;
  for (std::size_t i = 0; i < ca.parts.size(); ++i)
    if (!same_message(ca.parts[i], cb.parts[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("index_bits follows ceil(log2(dim))") {
  CHECK(index_bits(1) == 0);
  CHECK(index_bits(2) == 1);
  CHECK(index_bits(3) == 2);
  CHECK(index_bits(4) == 2);
  CHECK(index_bits(5) == 3);
  CHECK(index_bits(10) == 4);
  CHECK(index_bits(1024) == 10);
  CHECK(index_bits(1025) == 11);
  CHECK(index_bits(1u << 31) == 31);
}

TEST_CASE("bit costs") {
  // sparse: count * (index_bits + 32)
  auto sparse = make_sparse_message(10, {{1, 2.0}, {7, -3.0}});
  CHECK(sparse.bit_cost == 2 * (4 + 32));
  // one coordinate of a 3-dim vector: 2 + 32 = 34 bits
  auto one = make_sparse_message(3, {{0, -5.5}});
  CHECK(one.bit_cost == 34);
  // ternary: 32 + 2d
  auto tern = make_ternary_message(10, 1.5, std::vector<std::int8_t>(10, 1));
  CHECK(tern.bit_cost == 32 + 20);
  // composite: sum of parts
  auto comp = make_composite_message(make_sparse_message(10, {{0, 1.0}}), tern);
  CHECK(comp.bit_cost == 36 + 52);
  // empty sparse message encodes the zero vector at zero payload bits
  auto empty = make_sparse_message(4, {});
  CHECK(empty.bit_cost == 0);
}

TEST_CASE("decompress reconstructs the dense vector") {
  auto sparse = make_sparse_message(5, {{1, 2.5}, {4, -1.0}});
  CHECK(decompress(sparse) == DenseVector{0.0, 2.5, 0.0, 0.0, -1.0});

  auto tern = make_ternary_message(4, 0.75, {1, 0, -1, 1});
  CHECK(decompress(tern) == DenseVector{0.75, 0.0, -0.75, 0.75});

  auto comp = make_composite_message(sparse, make_sparse_message(5, {{0, 1.0}, {1, 0.5}}));
  CHECK(decompress(comp) == DenseVector{1.0, 3.0, 0.0, 0.0, -1.0});
}

TEST_CASE("factories validate their arguments") {
  CHECK_THROWS_AS(make_sparse_message(0, {}), ParameterError);
  CHECK_THROWS_AS(make_sparse_message(3, {{3, 1.0}}), ParameterError);             // index out of range
  CHECK_THROWS_AS(make_sparse_message(3, {{1, 1.0}, {1, 2.0}}), ParameterError);   // duplicate index
  CHECK_THROWS_AS(make_sparse_message(3, {{2, 1.0}, {0, 2.0}}), ParameterError);   // decreasing
  CHECK_THROWS_AS(make_sparse_message(3, {{0, 0.0}}), ParameterError);             // zero value
  CHECK_THROWS_AS(make_sparse_message(3, {{0, 1.0 / 0.0}}), ParameterError);       // non-finite
  CHECK_THROWS_AS(make_ternary_message(3, -1.0, {0, 0, 0}), ParameterError);       // negative scale
  CHECK_THROWS_AS(make_ternary_message(3, 1.0, {0, 2, 0}), ParameterError);        // sign out of range
  CHECK_THROWS_AS(make_ternary_message(3, 1.0, {0, 0}), ParameterError);           // size mismatch
  CHECK_THROWS_AS(make_ternary_message(3, 0.0, {1, 0, 0}), ParameterError);        // sign without scale
  CHECK_THROWS_AS(make_composite_message(make_sparse_message(3, {}), make_sparse_message(4, {})),
                  ParameterError);  // dimension mismatch
}

TEST_CASE("golden bytes: sparse") {
  auto msg = make_sparse_message(3, {{0, 1.0}, {2, -2.5}});
  const std::vector<std::uint8_t> expected = {
      0x00,                    // sparse tag
      0x03, 0x00, 0x00, 0x00,  // dim = 3
      0x02, 0x00, 0x00, 0x00,  // count = 2
      0x00, 0x00, 0x00, 0x00,  // index 0
      0x00, 0x00, 0x80, 0x3f,  // 1.0f
      0x02, 0x00, 0x00, 0x00,  // index 2
      0x00, 0x00, 0x20, 0xc0,  // -2.5f
  };
  CHECK(serialize(msg) == expected);
  CHECK(same_message(deserialize(expected), msg));
}

TEST_CASE("golden bytes: ternary") {
  auto msg = make_ternary_message(5, 1.5, {1, 0, -1, 1, 0});
  const std::vector<std::uint8_t> expected = {
      0x01,                    // ternary tag
      0x05, 0x00, 0x00, 0x00,  // dim = 5
      0x00, 0x00, 0xc0, 0x3f,  // 1.5f
      0x61,                    // codes 1,0,2,1 packed LSB-first
      0x00,                    // code 0 + padding
  };
  CHECK(serialize(msg) == expected);
  CHECK(same_message(deserialize(expected), msg));
}

TEST_CASE("golden bytes: composite concatenates parts after the tag") {
  auto first = make_sparse_message(3, {{1, 4.0}});
  auto second = make_ternary_message(3, 2.0, {0, -1, 1});
  auto comp = make_composite_message(first, second);
  std::vector<std::uint8_t> expected = {0x02};
  for (std::uint8_t b : serialize(first)) expected.push_back(b);
  for (std::uint8_t b : serialize(second)) expected.push_back(b);
  CHECK(serialize(comp) == expected);
  CHECK(same_message(deserialize(expected), comp));
}

TEST_CASE("serialize/deserialize round-trips f32-representable payloads") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t dim = 1 + static_cast<std::uint32_t>(rng.below(40));
    std::vector<SparseEntry> entries;
    for (std::uint32_t i = 0; i < dim; ++i) {
      if (rng.uniform() < 0.4) {
        // quarter-integer values survive the f32 wire format exactly
        double v = (static_cast<double>(rng.below(64)) - 32.0) * 0.25;
        if (v == 0.0) v = 1.25;
        entries.push_back({i, v});
      }
    }
    auto sparse = make_sparse_message(dim, entries);
    CHECK(same_message(deserialize(serialize(sparse)), sparse));

    std::vector<std::int8_t> signs(dim);
    for (auto& s : signs) s = static_cast<std::int8_t>(static_cast<int>(rng.below(3)) - 1);
    auto tern = make_ternary_message(dim, 0.5 + static_cast<double>(rng.below(8)), signs);
    CHECK(same_message(deserialize(serialize(tern)), tern));

    auto comp = make_composite_message(sparse, tern);
    CHECK(same_message(deserialize(serialize(comp)), comp));
  }
}

TEST_CASE("bit cost is recomputed on parse, never read from the wire") {
  auto msg = make_sparse_message(9, {{2, 1.0}, {5, -2.0}});
  auto parsed = deserialize(serialize(msg));
  CHECK(parsed.bit_cost == msg.bit_cost);
  CHECK(parsed.bit_cost == 2 * (4 + 32));
}

TEST_CASE("strict parser rejects malformed bytes") {
  auto good = serialize(make_sparse_message(3, {{0, 1.0}, {2, -2.5}}));

  SUBCASE("empty input") { CHECK_THROWS_AS(deserialize({}), FormatError); }
  SUBCASE("unknown tag") {
    auto bad = good;
    bad[0] = 0x07;
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("truncation at every prefix length") {
    for (std::size_t len = 0; len < good.size(); ++len) {
      std::vector<std::uint8_t> prefix(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(len));
      CHECK_THROWS_AS(deserialize(prefix), FormatError);
    }
  }
  SUBCASE("trailing bytes") {
    auto bad = good;
    bad.push_back(0x00);
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("zero dimension") {
    std::vector<std::uint8_t> bad = {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("count exceeding dimension") {
    auto bad = good;
    bad[5] = 0x09;  // count 9 > dim 3
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("index out of range") {
    auto bad = good;
    bad[17] = 0x05;  // second index 5 >= dim 3
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("non-increasing indices") {
    auto bad = good;
    bad[17] = 0x00;  // second index 0 <= first index 0
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("zero entry value") {
    auto bad = good;
    bad[13] = 0x00;
    bad[14] = 0x00;
    bad[15] = 0x00;
    bad[16] = 0x00;  // 0.0f
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("non-finite entry value") {
    auto bad = good;
    bad[13] = 0x00;
    bad[14] = 0x00;
    bad[15] = 0xc0;
    bad[16] = 0x7f;  // NaN
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
}

TEST_CASE("strict parser rejects malformed ternary bytes") {
  auto good = serialize(make_ternary_message(5, 1.5, {1, 0, -1, 1, 0}));

  SUBCASE("invalid sign code 3") {
    auto bad = good;
    bad[9] = 0x63;  // first code becomes 3
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("nonzero padding bits") {
    auto bad = good;
    bad[10] = 0x04;  // bits beyond dim=5
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("negative scale") {
    auto bad = good;
    bad[8] = 0xbf;  // 1.5f -> -1.5f
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("nonzero sign with zero scale") {
    auto bad = good;
    bad[5] = bad[6] = bad[7] = bad[8] = 0x00;  // scale 0         with signs set
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("zero scale with all-zero signs parses") {
    auto zero = serialize(make_ternary_message(5, 0.0, {0, 0, 0, 0, 0}));
    CHECK(decompress(deserialize(zero)) == DenseVector(5, 0.0));
  }
}

TEST_CASE("composite parsing guards") {
  auto part = serialize(make_sparse_message(2, {{0, 1.0}}));
  auto other = serialize(make_sparse_message(3, {{0, 1.0}}));

  SUBCASE("parts must agree on dimension") {
    std::vector<std::uint8_t> bad = {0x02};
    bad.insert(bad.end(), part.begin(), part.end());
    bad.insert(bad.end(), other.begin(), other.end());
    CHECK_THROWS_AS(deserialize(bad), FormatError);
  }
  SUBCASE("moderate nesting parses, runaway nesting is rejected") {
    // wrap a sparse part in composite layers: depth 3 is fine
    std::vector<std::uint8_t> nested = part;
    for (int level = 0; level < 3; ++level) {
      std::vector<std::uint8_t> next = {0x02};
      next.insert(next.end(), nested.begin(), nested.end());
      next.insert(next.end(), part.begin(), part.end());
      nested = next;
    }
    CHECK_NOTHROW(deserialize(nested));
    for (int level = 3; level < 12; ++level) {
      std::vector<std::uint8_t> next = {0x02};
      next.insert(next.end(), nested.begin(), nested.end());
      next.insert(next.end(), part.begin(), part.end());
      nested = next;
    }
    CHECK_THROWS_AS(deserialize(nested), FormatError);
  }
}
