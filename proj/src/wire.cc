/*
 * Copyright 2026 The shelora Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "shelora/wire.h"

#include <bit>
#include <limits>
#include <string>
#include <utility>

#include "shelora/errors.h"

namespace shelora::wire {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint32_t narrow32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(std::string(what) + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::bytes(std::span<const std::uint8_t> b) {
  buf_.insert(buf_.end(), b.begin(), b.end());
}

void ByteWriter::str(std::string_view s) {
  u64(s.size());
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const {
  if (n > remaining()) {
    throw FormatError("truncated message: need " + std::to_string(n) +
                      " bytes, have " + std::to_string(remaining()));
  }
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::str() {
  const std::uint64_t n = u64();
  need(n);
  auto b = bytes(n);
  return std::string(b.begin(), b.end());
}

void write_block(ByteWriter& w, const crypto::HeBackend& backend,
                 const crypto::CipherBlock& block) {
  const auto payload = backend.payload_bytes(block);
  w.u32(narrow32(block.rows, "rows"));
  w.u32(narrow32(block.width, "width"));
  w.u32(narrow32(block.level, "level"));
  w.u64(block.params_id());
  w.u32(narrow32(payload.size(), "payload"));
  w.bytes(payload);
}

crypto::CipherBlock read_block(ByteReader& r, const crypto::HeBackend& backend,
                               std::shared_ptr<const crypto::HeParams> params) {
  if (!params) throw FormatError("no parameters to bind the block to");
  crypto::CipherBlock b;
  b.rows = r.u32();
  b.width = r.u32();
  b.level = r.u32();
  const std::uint64_t pid = r.u64();
  if (pid != params->id()) {
    throw IncompatibilityError("block was produced under different HE "
                               "parameters");
  }
  if (b.level > params->max_level()) {
    throw FormatError("block level exceeds the parameter depth");
  }
  const std::uint32_t len = r.u32();
  b.state = backend.load_payload(b.rows, b.width, r.bytes(len));
  b.params = std::move(params);
  b.byte_size = crypto::ciphertext_bytes(*b.params);
  return b;
}

void write_block_list(ByteWriter& w, const crypto::HeBackend& backend,
                      const crypto::CipherBlockList& list) {
  w.u32(narrow32(list.blocks.size(), "block count"));
  for (const auto& b : list.blocks) write_block(w, backend, b);
  w.u32(narrow32(list.rows, "rows"));
  w.u32(narrow32(list.total_cols, "total_cols"));
  w.u32(narrow32(list.covered, "covered"));
  w.u32(narrow32(list.chunk, "chunk"));
}

crypto::CipherBlockList read_block_list(
    ByteReader& r, const crypto::HeBackend& backend,
    std::shared_ptr<const crypto::HeParams> params) {
  crypto::CipherBlockList list;
  const std::uint32_t count = r.u32();
  list.blocks.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    list.blocks.push_back(read_block(r, backend, params));
  }
  list.rows = r.u32();
  list.total_cols = r.u32();
  list.covered = r.u32();
  list.chunk = r.u32();
  if (list.covered > list.total_cols) {
    throw FormatError("block list covers more columns than it spans");
  }
  for (const auto& b : list.blocks) {
    if (b.rows != list.rows) throw FormatError("block rows disagree with list");
  }
  return list;
}

}  // namespace shelora::wire
