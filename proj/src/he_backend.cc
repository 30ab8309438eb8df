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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <utility>

#include "shelora/errors.h"
#include "shelora/he.h"
#include "shelora/random.h"

namespace shelora::crypto {

namespace {

struct SimulatedState final : BlockState {
  std::vector<double> values;  // row-major rows × width
  KeyToken token{};
};

const SimulatedState& sim_state(const CipherBlock& c) {
  const auto* s = dynamic_cast<const SimulatedState*>(c.state.get());
  if (s == nullptr) {
    throw IncompatibilityError("ciphertext was not produced by the simulated "
                               "backend");
  }
  return *s;
}

KeyToken token_from_seed(std::uint64_t seed) {
  KeyToken t{};
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a);
  std::memcpy(t.data(), &a, 8);
  std::memcpy(t.data() + 8, &b, 8);
  return t;
}

CipherBlock derive(const CipherBlock& like, std::size_t rows, std::size_t width,
                   std::size_t level, std::vector<double> values,
                   const KeyToken& token) {
  auto state = std::make_shared<SimulatedState>();
  state->values = std::move(values);
  state->token = token;
  CipherBlock out;
  out.rows = rows;
  out.width = width;
  out.level = level;
  out.params = like.params;
  out.byte_size = ciphertext_bytes(*like.params);
  out.state = std::move(state);
  return out;
}

void require_level(const CipherBlock& c, const char* op) {
  if (c.level == 0) {
    throw DepthError(std::string(op) + ": multiplicative depth exhausted");
  }
}

}  // namespace

std::uint64_t HeParams::id() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(poly_degree);
  for (int b : moduli_bits) mix(static_cast<std::uint64_t>(b));
  return h;
}

void HeParams::validate() const {
  if (poly_degree < 1024 || poly_degree > 65536 ||
      !std::has_single_bit(poly_degree)) {
    throw ValidationError("poly_degree must be a power of two in [1024, "
                          "65536], got " + std::to_string(poly_degree));
  }
  if (moduli_bits.empty()) throw ValidationError("moduli chain is empty");
  for (int b : moduli_bits) {
    if (b < 1 || b > 60) {
      throw ValidationError("modulus bit size out of range: " +
                            std::to_string(b));
    }
  }
  if (!(noise_epsilon >= 0.0 && noise_epsilon < 1.0)) {
    throw ValidationError("noise_epsilon must lie in [0, 1)");
  }
}

std::size_t ciphertext_bytes(const HeParams& params) {
  const std::size_t bits = static_cast<std::size_t>(
      std::accumulate(params.moduli_bits.begin(), params.moduli_bits.end(), 0));
  return 2 * params.poly_degree * bits / 8;
}

std::size_t chunk_width(const HeParams& params, std::size_t rows) {
  if (rows == 0) throw ValidationError("chunk_width needs rows >= 1");
  const std::size_t chunk = params.slots() / rows;
  if (chunk == 0) {
    throw CapacityError(std::to_string(rows) + " rows exceed " +
                        std::to_string(params.slots()) + " slots");
  }
  return chunk;
}

KeyPair SimulatedBackend::keygen(const HeParams& params,
                                 std::uint64_t seed) const {
  params.validate();
  auto shared = std::make_shared<const HeParams>(params);
  const KeyToken token = token_from_seed(seed);
  return KeyPair{PublicKey{shared, token}, SecretKey{shared, token}};
}

CipherBlock SimulatedBackend::encrypt(const Matrix& block,
                                      const PublicKey& pk) const {
  if (!pk.params) throw ValidationError("public key has no parameters");
  if (block.rows() * block.cols() > pk.params->slots()) {
    throw CapacityError("block " + std::to_string(block.rows()) + "x" +
                        std::to_string(block.cols()) + " exceeds " +
                        std::to_string(pk.params->slots()) + " slots");
  }
  if (!block.all_finite()) throw DomainError("cannot encrypt non-finite values");
  CipherBlock like;
  like.params = pk.params;
  return derive(like, block.rows(), block.cols(), pk.params->max_level(),
                std::vector<double>(block.data().begin(), block.data().end()),
                pk.token);
}

CipherBlock SimulatedBackend::add(const CipherBlock& lhs,
                                  const CipherBlock& rhs) const {
  const auto& a = sim_state(lhs);
  const auto& b = sim_state(rhs);
  if (lhs.rows != rhs.rows || lhs.width != rhs.width) {
    throw IncompatibilityError("he_add shape mismatch");
  }
  if (lhs.params_id() != rhs.params_id()) {
    throw IncompatibilityError("he_add parameter mismatch");
  }
  if (lhs.level != rhs.level) throw IncompatibilityError("he_add level mismatch");
  if (a.token != b.token) throw IncompatibilityError("he_add key mismatch");
  std::vector<double> sum(a.values.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = a.values[i] + b.values[i];
  return derive(lhs, lhs.rows, lhs.width, lhs.level, std::move(sum), a.token);
}

CipherBlock SimulatedBackend::plain_matmul(const Matrix& p,
                                           const CipherBlock& c) const {
  const auto& s = sim_state(c);
  if (p.cols() != c.rows) {
    throw ShapeError("he_plain_matmul: plaintext has " +
                     std::to_string(p.cols()) + " columns, block has " +
                     std::to_string(c.rows) + " rows");
  }
  require_level(c, "he_plain_matmul");
  if (p.rows() * c.width > c.params->slots()) {
    throw CapacityError("he_plain_matmul result " + std::to_string(p.rows()) +
                        "x" + std::to_string(c.width) + " exceeds " +
                        std::to_string(c.params->slots()) + " slots");
  }
  const Matrix plain(c.rows, c.width, s.values);
  const Matrix prod = linalg::matmul(p, plain);
  return derive(c, p.rows(), c.width, c.level - 1,
                std::vector<double>(prod.data().begin(), prod.data().end()),
                s.token);
}

CipherBlock SimulatedBackend::mask_mul(const CipherBlock& c,
                                       std::span<const double> mask) const {
  const auto& s = sim_state(c);
  if (mask.size() != c.width) {
    throw ShapeError("he_plain_mask_mul: mask length " +
                     std::to_string(mask.size()) + " != width " +
                     std::to_string(c.width));
  }
  require_level(c, "he_plain_mask_mul");
  std::vector<double> out = s.values;
  for (std::size_t r = 0; r < c.rows; ++r) {
    for (std::size_t j = 0; j < c.width; ++j) out[r * c.width + j] *= mask[j];
  }
  return derive(c, c.rows, c.width, c.level - 1, std::move(out), s.token);
}

Matrix SimulatedBackend::decrypt(const CipherBlock& c,
                                 const SecretKey& sk) const {
  const auto& s = sim_state(c);
  if (!sk.params || sk.params->id() != c.params_id() || sk.token != s.token) {
    throw AuthenticationError("secret key does not match ciphertext");
  }
  Matrix out(c.rows, c.width, s.values);
  const double eps = sk.params->noise_epsilon;
  if (eps > 0.0) {
    // Deterministic in the ciphertext contents so decryption stays pure.
    std::uint64_t h = 0;
    for (double v : s.values) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
    Rng rng(h);
    std::uniform_real_distribution<double> u(-eps, eps);
    for (double& v : out.data()) v *= 1.0 + u(rng);
  }
  return out;
}

std::vector<std::uint8_t> SimulatedBackend::payload_bytes(
    const CipherBlock& c) const {
  const auto& s = sim_state(c);
  std::vector<std::uint8_t> out(s.values.size() * 8 + s.token.size());
  std::size_t pos = 0;
  for (double v : s.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out[pos++] = static_cast<std::uint8_t>(bits >> (8 * i));
  }
  std::copy(s.token.begin(), s.token.end(), out.begin() + static_cast<long>(pos));
  return out;
}

std::shared_ptr<const BlockState> SimulatedBackend::load_payload(
    std::size_t rows, std::size_t width,
    std::span<const std::uint8_t> payload) const {
  const std::size_t n = rows * width;
  if (payload.size() != n * 8 + 16) {
    throw FormatError("simulated payload has " + std::to_string(payload.size()) +
                      " bytes, expected " + std::to_string(n * 8 + 16));
  }
  auto state = std::make_shared<SimulatedState>();
  state->values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(payload[k * 8 + i]) << (8 * i);
    }
    state->values[k] = std::bit_cast<double>(bits);
  }
  std::copy(payload.begin() + static_cast<long>(n * 8), payload.end(),
            state->token.begin());
  return state;
}

std::size_t block_count(std::size_t k, std::size_t chunk) {
  if (chunk == 0) throw ValidationError("chunk must be positive");
  return (k + chunk - 1) / chunk;
}

std::vector<BlockSpan> covering_spans(std::size_t n, std::size_t k,
                                      std::size_t chunk) {
  if (k > n) throw ValidationError("cannot cover more columns than exist");
  const std::size_t count = block_count(k, chunk);
  std::vector<BlockSpan> spans(count);
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t end = n - j * chunk;
    const std::size_t begin = end > chunk ? end - chunk : 0;
    spans[count - 1 - j] = BlockSpan{begin, end - begin};
  }
  return spans;
}

std::size_t CipherBlockList::byte_size() const {
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.byte_size;
  return total;
}

CipherBlockList encrypt_columns(const HeBackend& backend, const PublicKey& pk,
                                const Matrix& m, std::size_t k,
                                std::size_t chunk) {
  CipherBlockList out;
  out.rows = m.rows();
  out.total_cols = m.cols();
  out.covered = k;
  out.chunk = chunk;
  const std::size_t first_col = m.cols() - k;
  for (const BlockSpan& span : covering_spans(m.cols(), k, chunk)) {
    Matrix slab = linalg::col_range(m, span.begin, span.width);
    for (std::size_t c = 0; span.begin + c < first_col && c < span.width; ++c) {
      for (std::size_t r = 0; r < slab.rows(); ++r) slab(r, c) = 0.0;
    }
    out.blocks.push_back(backend.encrypt(slab, pk));
  }
  return out;
}

Matrix decrypt_columns(const HeBackend& backend, const SecretKey& sk,
                       const CipherBlockList& list) {
  if (list.blocks.empty()) return Matrix(list.rows, 0);
  Matrix joined = backend.decrypt(list.blocks.front(), sk);
  for (std::size_t b = 1; b < list.blocks.size(); ++b) {
    joined = linalg::hcat(joined, backend.decrypt(list.blocks[b], sk));
  }
  if (joined.cols() < list.covered) {
    throw FormatError("cipher blocks cover fewer columns than declared");
  }
  return linalg::col_range(joined, joined.cols() - list.covered, list.covered);
}

}  // namespace shelora::crypto
