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

// Little-endian byte streams and the ciphertext block wire form.
//
// Block layout:
//   u32 rows | u32 width | u32 level | u64 params_id | u32 payload_len | payload
// A block stream is `u32 count` followed by `count` blocks, then
// u32 rows | u32 total_cols | u32 covered | u32 chunk for the list layout. The simulated
// backend's payload is rows·width f64 values in row-major order followed by
// the 16-byte key token.

#ifndef SHELORA_WIRE_H_
#define SHELORA_WIRE_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shelora/he.h"

namespace shelora::wire {

class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> b);
  // u64 length prefix followed by the raw characters.
  void str(std::string_view s);

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string str();

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void write_block(ByteWriter& w, const crypto::HeBackend& backend,
                 const crypto::CipherBlock& block);
crypto::CipherBlock read_block(ByteReader& r, const crypto::HeBackend& backend,
                               std::shared_ptr<const crypto::HeParams> params);

void write_block_list(ByteWriter& w, const crypto::HeBackend& backend,
                      const crypto::CipherBlockList& list);
crypto::CipherBlockList read_block_list(
    ByteReader& r, const crypto::HeBackend& backend,
    std::shared_ptr<const crypto::HeParams> params);

}  // namespace shelora::wire

#endif  // SHELORA_WIRE_H_
