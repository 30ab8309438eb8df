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

// Additively homomorphic block encryption behind a pluggable backend.
//
// The protocol code only talks to HeBackend. SimulatedBackend carries the
// plaintext behind an opaque, immutable state object and a key token, so the
// homomorphic identities hold exactly, while byte sizes and slot limits follow
// the CKKS shape (two ring elements per ciphertext, poly_degree/2 slots).

#ifndef SHELORA_HE_H_
#define SHELORA_HE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "shelora/linalg.h"

namespace shelora::crypto {

using linalg::Matrix;

struct HeParams {
  std::size_t poly_degree = 8192;
  std::vector<int> moduli_bits{60, 40, 40, 60};
  // Bound on the relative error injected at decryption (0 = exact).
  double noise_epsilon = 0.0;

  std::size_t slots() const { return poly_degree / 2; }
  // Remaining multiplicative depth of a fresh ciphertext.
  std::size_t max_level() const {
    return moduli_bits.empty() ? 0 : moduli_bits.size() - 1;
  }
  // Stable fingerprint of (poly_degree, moduli_bits).
  std::uint64_t id() const;
  void validate() const;
};

// 2 · poly_degree · Σ moduli_bits / 8, independent of how many slots are used.
std::size_t ciphertext_bytes(const HeParams& params);

// Widest column slab of a `rows`-row block that fits the slot capacity.
std::size_t chunk_width(const HeParams& params, std::size_t rows);

using KeyToken = std::array<std::uint8_t, 16>;

struct PublicKey {
  std::shared_ptr<const HeParams> params;
  KeyToken token{};
};

struct SecretKey {
  std::shared_ptr<const HeParams> params;
  KeyToken token{};
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;
};

// Backend-defined ciphertext contents. Never mutated once created.
class BlockState {
 public:
  virtual ~BlockState() = default;
};

struct CipherBlock {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::size_t level = 0;
  std::size_t byte_size = 0;
  std::shared_ptr<const HeParams> params;
  std::shared_ptr<const BlockState> state;

  std::uint64_t params_id() const { return params ? params->id() : 0; }
};

class HeBackend {
 public:
  virtual ~HeBackend() = default;

  virtual KeyPair keygen(const HeParams& params, std::uint64_t seed) const = 0;
  virtual CipherBlock encrypt(const Matrix& block,
                              const PublicKey& pk) const = 0;
  virtual CipherBlock add(const CipherBlock& lhs,
                          const CipherBlock& rhs) const = 0;
  // p · c for a plaintext p (m × c.rows). Consumes one level.
  virtual CipherBlock plain_matmul(const Matrix& p,
                                   const CipherBlock& c) const = 0;
  // Scales column j by mask[j]. Consumes one level.
  virtual CipherBlock mask_mul(const CipherBlock& c,
                               std::span<const double> mask) const = 0;
  virtual Matrix decrypt(const CipherBlock& c, const SecretKey& sk) const = 0;

  // Wire payload that follows the block header.
  virtual std::vector<std::uint8_t> payload_bytes(
      const CipherBlock& c) const = 0;
  virtual std::shared_ptr<const BlockState> load_payload(
      std::size_t rows, std::size_t width,
      std::span<const std::uint8_t> payload) const = 0;
};

class SimulatedBackend final : public HeBackend {
 public:
  KeyPair keygen(const HeParams& params, std::uint64_t seed) const override;
  CipherBlock encrypt(const Matrix& block, const PublicKey& pk) const override;
  CipherBlock add(const CipherBlock& lhs,
                  const CipherBlock& rhs) const override;
  CipherBlock plain_matmul(const Matrix& p,
                           const CipherBlock& c) const override;
  CipherBlock mask_mul(const CipherBlock& c,
                       std::span<const double> mask) const override;
  Matrix decrypt(const CipherBlock& c, const SecretKey& sk) const override;

  std::vector<std::uint8_t> payload_bytes(const CipherBlock& c) const override;
  std::shared_ptr<const BlockState> load_payload(
      std::size_t rows, std::size_t width,
      std::span<const std::uint8_t> payload) const override;
};

// Column layout of encrypted slabs.
//
// Blocks live on a grid anchored at the right edge of an n-column matrix:
// slot j (counted from the right) spans [n − (j+1)·chunk, n − j·chunk),
// clipped at column 0. A party encrypting its rightmost k columns uses the
// ⌈k/chunk⌉ rightmost slots and zero-fills the columns of the leftmost slot
// that fall outside its k. Every party therefore produces blocks of identical
// shape at identical positions, which is what lets the server add them.
struct BlockSpan {
  std::size_t begin = 0;
  std::size_t width = 0;
};

std::size_t block_count(std::size_t k, std::size_t chunk);

// Slots covering the rightmost k of n columns, ordered left to right.
std::vector<BlockSpan> covering_spans(std::size_t n, std::size_t k,
                                      std::size_t chunk);

struct CipherBlockList {
  std::size_t rows = 0;        // row count of every block
  std::size_t total_cols = 0;  // n of the underlying grid
  std::size_t covered = 0;     // rightmost columns carried (k)
  std::size_t chunk = 0;
  std::vector<CipherBlock> blocks;  // left to right, one per covering span

  std::size_t byte_size() const;
};

// Encrypts the rightmost k columns of `m` (rows × n) on the right-anchored
// grid. Columns of the leftmost block that lie outside k are zero-filled.
CipherBlockList encrypt_columns(const HeBackend& backend, const PublicKey& pk,
                                const Matrix& m, std::size_t k,
                                std::size_t chunk);

// Decrypts and reassembles the rightmost `covered` columns (rows × k).
Matrix decrypt_columns(const HeBackend& backend, const SecretKey& sk,
                       const CipherBlockList& list);

}  // namespace shelora::crypto

#endif  // SHELORA_HE_H_
