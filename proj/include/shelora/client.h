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

// Client side of a round: local LoRA training on the toy regression task,
// the sensitivity bid, column swapping, selective encryption of the uplink
// and reparameterization of the downlink into fresh rank-r adapters.

#ifndef SHELORA_CLIENT_H_
#define SHELORA_CLIENT_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "shelora/he.h"
#include "shelora/linalg.h"
#include "shelora/ope.h"
#include "shelora/sensitivity.h"
#include "shelora/server.h"

namespace shelora::client {

using linalg::Matrix;
using linalg::Permutation;

struct DeviceProfile {
  int type_id = 0;
  std::size_t rank = 1;
  double gamma = 0.0;   // fraction of columns the device can afford to encrypt
  double gflops = 0.0;  // informational

  void validate() const;
};

struct AdapterPair {
  Matrix b;  // m × rank
  Matrix a;  // rank × n
  std::size_t rank = 0;

  std::size_t m() const { return b.rows(); }
  std::size_t n() const { return a.cols(); }
  // b·a.
  Matrix product() const;
  void validate() const;
};

// Standard LoRA start: B = 0, A ~ N(0, 0.02²).
AdapterPair init_adapter(std::size_t m, std::size_t n, std::size_t rank,
                         std::uint64_t seed);

// Samples of the toy task y = W x, stored one sample per row.
struct LocalDataset {
  Matrix x;  // N × n
  Matrix y;  // N × m

  std::size_t size() const { return x.rows(); }
};

// (1 / (N·m)) Σ ‖(W₀ + B·A)·x − y‖².
double mse_loss(const Matrix& w0, const AdapterPair& adapter,
                const LocalDataset& data);
double mse_loss(const Matrix& w, const LocalDataset& data);

// Full-batch gradient descent on mse_loss over B and A. Throws TrainingError
// when the loss exceeds 1e6 or stops being finite.
AdapterPair local_train(const AdapterPair& adapter, const Matrix& w0,
                        const LocalDataset& data, std::size_t steps, double lr);

server::SensitivityBid build_bid(std::size_t client_id,
                                 const sensitivity::ChannelScores& scores,
                                 const DeviceProfile& profile,
                                 const crypto::OpeKey& key);

// Plaintext columns keep their relative order on the left; the globally
// agreed encrypted columns follow in ascending original index on the right.
struct SwapPlan {
  Permutation perm;     // permuted[:, j] = original[:, perm[j]]
  Permutation inverse;
  std::size_t n_plain = 0;
  std::vector<std::size_t> encrypted_columns;  // ascending

  std::size_t n() const { return perm.size(); }
};

SwapPlan make_swap_plan(std::size_t n, std::span<const std::size_t> res);

AdapterPair apply_swap(const AdapterPair& adapter, const SwapPlan& plan);
AdapterPair undo_swap(const AdapterPair& adapter, const SwapPlan& plan);

struct ClientUpdate {
  std::size_t client_id = 0;
  std::size_t round = 0;
  std::size_t rank = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  Matrix b_plain;                  // m × r
  Matrix a_plain;                  // r × (n − k), permuted positions [0, n − k)
  crypto::CipherBlockList cipher;  // r × k, permuted positions [n − k, n)
};

// Splits a swapped adapter into its clear and encrypted parts.
ClientUpdate encrypt_update(const AdapterPair& swapped, std::size_t k,
                            const crypto::HeBackend& backend,
                            const crypto::PublicKey& pk, std::size_t chunk);

// Magic "SHLU", u64 client_id, u64 round, u32 r, u32 n, u32 k, b_plain and
// a_plain as length-prefixed CSV text, then the cipher block stream.
std::vector<std::uint8_t> serialize_update(const ClientUpdate& update,
                                           const crypto::HeBackend& backend);
ClientUpdate deserialize_update(std::span<const std::uint8_t> bytes,
                                const crypto::HeBackend& backend,
                                std::shared_ptr<const crypto::HeParams> params);

struct ReparamResult {
  AdapterPair adapter;
  // Rank of the merged update before padding back to the adapter rank.
  std::size_t effective_rank = 0;
  bool clamped = false;
  // Σ of the discarded squared singular values of B_g·A_g.
  double discarded_energy = 0.0;
};

// Merges the client's slice of the plaintext aggregate with its truncated
// ciphertext aggregate. Only the first n − k plaintext columns are used; the
// ciphertext covers the remaining k. The merged m × n update is refactored at
// the requested rank and its columns are returned to the original order.
ReparamResult reparameterize(const server::PlainSlice& plain,
                             const crypto::CipherBlockList& cipher,
                             const crypto::HeBackend& backend,
                             const crypto::SecretKey& sk, const SwapPlan& plan,
                             std::size_t k, std::size_t rank);

// Same merge from an explicit permuted-coordinate update (m × n). Used by the
// plaintext oracle strategy and by reparameterize itself.
ReparamResult refactor_update(const Matrix& merged, const SwapPlan& plan,
                              std::size_t rank);

}  // namespace shelora::client

#endif  // SHELORA_CLIENT_H_
