// SPDX-License-Identifier: Apache-2.0
#include "compsgd/message.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "compsgd/errors.hpp"

namespace compsgd {

namespace {

constexpr std::uint8_t kSparseTag = 0x00;
constexpr std::uint8_t kTernaryTag = 0x01;
constexpr std::uint8_t kCompositeTag = 0x02;
constexpr int kMaxCompositeDepth = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

struct Cursor {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > bytes.size()) throw FormatError("message: truncated payload");
    return bytes[pos++];
  }
  std::uint32_t u32() {
    if (pos + 4 > bytes.size()) throw FormatError("message: truncated payload");
    std::uint32_t v = static_cast<std::uint32_t>(bytes[pos]) | (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
};

std::uint64_t sparse_bit_cost(std::uint32_t dim, std::size_t count) {
  return static_cast<std::uint64_t>(count) * (index_bits(dim) + 32u);
}

std::uint64_t ternary_bit_cost(std::uint32_t dim) { return 32u + 2ull * dim; }

void serialize_into(const CompressedMessage& msg, std::vector<std::uint8_t>& out);

CompressedMessage parse_message(Cursor& cur, int depth) {
  if (depth > kMaxCompositeDepth) throw FormatError("message: composite nesting too deep");
  const std::uint8_t tag = cur.u8();
  if (tag == kSparseTag) {
    const std::uint32_t dim = cur.u32();
    if (dim == 0) throw FormatError("message: zero dimension");
    const std::uint32_t count = cur.u32();
    if (count > dim) throw FormatError("message: entry count exceeds dimension");
    SparsePayload payload;
    payload.entries.reserve(count);
    std::int64_t prev = -1;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t index = cur.u32();
      const double value = cur.f32();
      if (index >= dim) throw FormatError("message: index out of range");
      if (static_cast<std::int64_t>(index) <= prev) throw FormatError("message: indices not strictly increasing");
      if (!std::isfinite(value) || value == 0.0) throw FormatError("message: invalid entry value");
      prev = index;
      payload.entries.push_back(SparseEntry{index, value});
    }
    return CompressedMessage{dim, std::move(payload), sparse_bit_cost(dim, count)};
  }
  if (tag == kTernaryTag) {
    const std::uint32_t dim = cur.u32();
    if (dim == 0) throw FormatError("message: zero dimension");
    const double scale = cur.f32();
    if (!std::isfinite(scale) || scale < 0.0) throw FormatError("message: invalid ternary scale");
    TernaryPayload payload;
    payload.scale = scale;
    payload.signs.resize(dim, 0);
    const std::uint32_t nbytes = (dim + 3) / 4;
    for (std::uint32_t b = 0; b < nbytes; ++b) {
      const std::uint8_t byte = cur.u8();
      for (std::uint32_t j = 0; j < 4; ++j) {
        const std::uint32_t i = 4 * b + j;
        const std::uint8_t code = (byte >> (2 * j)) & 0x3u;
        if (i >= dim) {
          if (code != 0) throw FormatError("message: nonzero padding bits");
          continue;
        }
        if (code == 0)
          payload.signs[i] = 0;
        else if (code == 1)
          payload.signs[i] = 1;
        else if (code == 2)
          payload.signs[i] = -1;
        else
          throw FormatError("message: invalid sign code");
        if (payload.signs[i] != 0 && scale == 0.0) throw FormatError("message: nonzero sign with zero scale");
      }
    }
    return CompressedMessage{dim, std::move(payload), ternary_bit_cost(dim)};
  }
  if (tag == kCompositeTag) {
    CompressedMessage first = parse_message(cur, depth + 1);
    CompressedMessage second = parse_message(cur, depth + 1);
    if (first.dim != second.dim) throw FormatError("message: composite parts disagree on dimension");
    const std::uint32_t dim = first.dim;
    const std::uint64_t bits = first.bit_cost + second.bit_cost;
    CompositePayload payload;
    payload.parts.reserve(2);
    payload.parts.push_back(std::move(first));
    payload.parts.push_back(std::move(second));
    return CompressedMessage{dim, std::move(payload), bits};
  }
  throw FormatError("message: unknown payload tag");
}

void serialize_into(const CompressedMessage& msg, std::vector<std::uint8_t>& out) {
  if (const auto* sparse = std::get_if<SparsePayload>(&msg.payload)) {
    out.push_back(kSparseTag);
    put_u32(out, msg.dim);
    put_u32(out, static_cast<std::uint32_t>(sparse->entries.size()));
    for (const SparseEntry& e : sparse->entries) {
      put_u32(out, e.index);
      put_f32(out, e.value);
    }
    return;
  }
  if (const auto* ternary = std::get_if<TernaryPayload>(&msg.payload)) {
    out.push_back(kTernaryTag);
    put_u32(out, msg.dim);
    put_f32(out, ternary->scale);
    const std::uint32_t nbytes = (msg.dim + 3) / 4;
    for (std::uint32_t b = 0; b < nbytes; ++b) {
      std::uint8_t byte = 0;
      for (std::uint32_t j = 0; j < 4; ++j) {
        const std::uint32_t i = 4 * b + j;
        if (i >= msg.dim) continue;
        const std::int8_t s = ternary->signs[i];
        const std::uint8_t code = (s == 0) ? 0u : (s == 1 ? 1u : 2u);
        byte = static_cast<std::uint8_t>(byte | (code << (2 * j)));
      }
      out.push_back(byte);
    }
    return;
  }
  const auto& composite = std::get<CompositePayload>(msg.payload);
  out.push_back(kCompositeTag);
  serialize_into(composite.parts[0], out);
  serialize_into(composite.parts[1], out);
}

}  // namespace

std::uint32_t index_bits(std::uint32_t dim) {
  if (dim == 0) throw ParameterError("index_bits: zero dimension");
  return static_cast<std::uint32_t>(std::bit_width(dim - 1));
}

CompressedMessage make_sparse_message(std::uint32_t dim, std::vector<SparseEntry> entries) {
  if (dim == 0) throw ParameterError("make_sparse_message: zero dimension");
  std::int64_t prev = -1;
  for (const SparseEntry& e : entries) {
    if (e.index >= dim) throw ParameterError("make_sparse_message: index out of range");
    if (static_cast<std::int64_t>(e.index) <= prev)
      throw ParameterError("make_sparse_message: indices must be strictly increasing");
    if (!std::isfinite(e.value) || e.value == 0.0)
      throw ParameterError("make_sparse_message: entry values must be finite and nonzero");
    prev = e.index;
  }
  const std::uint64_t bits = sparse_bit_cost(dim, entries.size());
  return CompressedMessage{dim, SparsePayload{std::move(entries)}, bits};
}

CompressedMessage make_ternary_message(std::uint32_t dim, double scale, std::vector<std::int8_t> signs) {
  if (dim == 0) throw ParameterError("make_ternary_message: zero dimension");
  if (signs.size() != dim) throw ParameterError("make_ternary_message: sign count must equal dimension");
  if (!std::isfinite(scale) || scale < 0.0)
    throw ParameterError("make_ternary_message: scale must be finite and nonnegative");
  for (std::int8_t s : signs) {
    if (s < -1 || s > 1) throw ParameterError("make_ternary_message: signs must be in {-1, 0, +1}");
    if (s != 0 && scale == 0.0) throw ParameterError("make_ternary_message: nonzero sign requires positive scale");
  }
  return CompressedMessage{dim, TernaryPayload{scale, std::move(signs)}, ternary_bit_cost(dim)};
}

CompressedMessage make_composite_message(CompressedMessage first, CompressedMessage second) {
  if (first.dim != second.dim) throw ParameterError("make_composite_message: parts must share a dimension");
  const std::uint32_t dim = first.dim;
  const std::uint64_t bits = first.bit_cost + second.bit_cost;
  CompositePayload payload;
  payload.parts.reserve(2);
  payload.parts.push_back(std::move(first));
  payload.parts.push_back(std::move(second));
  return CompressedMessage{dim, std::move(payload), bits};
}

DenseVector decompress(const CompressedMessage& msg) {
  DenseVector x(msg.dim, 0.0);
  if (const auto* sparse = std::get_if<SparsePayload>(&msg.payload)) {
    for (const SparseEntry& e : sparse->entries) x[e.index] = e.value;
    return x;
  }
  if (const auto* ternary = std::get_if<TernaryPayload>(&msg.payload)) {
    for (std::uint32_t i = 0; i < msg.dim; ++i) x[i] = ternary->scale * static_cast<double>(ternary->signs[i]);
    return x;
  }
  const auto& composite = std::get<CompositePayload>(msg.payload);
  for (const CompressedMessage& part : composite.parts) axpy(x, 1.0, decompress(part));
  return x;
}

std::vector<std::uint8_t> serialize(const CompressedMessage& msg) {
  std::vector<std::uint8_t> out;
  serialize_into(msg, out);
  return out;
}

CompressedMessage deserialize(const std::vector<std::uint8_t>& bytes) {
  Cursor cur{bytes, 0};
  CompressedMessage msg = parse_message(cur, 0);
  if (cur.pos != bytes.size()) throw FormatError("message: trailing bytes");
  return msg;
}

}  // namespace compsgd
