// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "compsgd/vec.hpp"

namespace compsgd {

/// One surviving coordinate of a sparse payload. Values are kept at full
/// double precision in memory; the accounted (and serialized) width of a
/// value on the wire is 32 bits.
struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;
};

/// Sorted-by-index list of surviving coordinates. Exact zeros are never
/// stored: an empty list is the canonical encoding of the zero vector.
struct SparsePayload {
  std::vector<SparseEntry> entries;
};

/// One shared 32-bit scale plus a sign in {-1, 0, +1} for every coordinate
/// (2 bits each on the wire).
struct TernaryPayload {
  double scale = 0.0;
  std::vector<std::int8_t> signs;
};

struct CompressedMessage;

/// Exactly two stacked messages of the same dimension; decodes to the sum of
/// its parts and costs the sum of their bit costs.
struct CompositePayload {
  std::vector<CompressedMessage> parts;
};

using MessagePayload = std::variant<SparsePayload, TernaryPayload, CompositePayload>;

struct CompressedMessage {
  std::uint32_t dim = 0;
  MessagePayload payload;
  std::uint64_t bit_cost = 0;
};

/// Bits needed to address a coordinate index in [0, dim): ceil(log2(dim)),
/// zero when dim == 1.
std::uint32_t index_bits(std::uint32_t dim);

/// Factories validate their arguments (throwing ParameterError) and fill in
/// the bit cost:
///   sparse    -> entries * (index_bits(dim) + 32)
///   ternary   -> 32 + 2 * dim
///   composite -> sum of the two parts
/// Sparse entries must be strictly increasing in index, in range, nonzero.
CompressedMessage make_sparse_message(std::uint32_t dim, std::vector<SparseEntry> entries);
CompressedMessage make_ternary_message(std::uint32_t dim, double scale, std::vector<std::int8_t> signs);
CompressedMessage make_composite_message(CompressedMessage first, CompressedMessage second);

/// Reconstruct the dense vector a message encodes.
DenseVector decompress(const CompressedMessage& msg);

/// Canonical little-endian byte encoding. Layout, by payload tag byte:
///   0x00 sparse:    dim u32 | count u32 | count * (index u32, value f32)
///   0x01 ternary:   dim u32 | scale f32 | ceil(dim/4) bytes of 2-bit codes,
///                   packed LSB-first, code 0 -> 0, 1 -> +1, 2 -> -1
///   0x02 composite: part bytes, twice
/// Note the wire format narrows values to f32; serialize/deserialize is only
/// lossless for values representable in single precision.
std::vector<std::uint8_t> serialize(const CompressedMessage& msg);

/// Strict parse of the canonical encoding. Rejects (FormatError) unknown
/// tags, out-of-range or non-increasing indices, invalid sign codes, and
/// trailing bytes. The bit cost is recomputed, never trusted from the wire.
CompressedMessage deserialize(const std::vector<std::uint8_t>& bytes);

}  // namespace compsgd
