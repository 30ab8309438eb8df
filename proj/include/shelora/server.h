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

// Server side of a round: HE subset negotiation over OPE-coded bids, the
// Bayesian search for selection coefficients, column-aware aggregation of the
// clear and encrypted parts, and the per-client downlink.

#ifndef SHELORA_SERVER_H_
#define SHELORA_SERVER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shelora/he.h"
#include "shelora/linalg.h"
#include "shelora/ope.h"

namespace shelora::server {

using linalg::Matrix;

// Column indices travel in clear; only their sensitivities are OPE-coded.
struct SensitivityBid {
  std::size_t client_id = 0;
  std::size_t rank = 0;
  std::size_t k = 0;
  std::vector<std::size_t> columns;     // G_i, descending sensitivity
  std::vector<crypto::OpeCode> codes;   // aligned with columns

  void validate() const;
};

// {"client_id":..,"r_i":..,"k_i":..,"entries":[[col, code], ...]}
std::string bid_to_json(const SensitivityBid& bid);
SensitivityBid bid_from_json(const std::string& text);

// A client's candidate set with one nonnegative weight per column.
struct WeightedSet {
  std::vector<std::size_t> columns;
  std::vector<double> weights;
};

// Code magnitudes as weights, which is all the server can see.
std::vector<WeightedSet> weighted_sets(std::span<const SensitivityBid> bids);

struct ObjectiveTerms {
  double coverage = 1.0;  // min_i |res ∩ G_i| / |G_i|
  double risk = 0.0;      // max_i Σ_{G_i∖res} S / Σ_{G_i} S
  double score = 1.0;     // coverage − risk
};

// Clients with an empty G_i count as fully covered and riskless. A set whose
// weights sum to zero has risk 0.
ObjectiveTerms objective_terms(std::span<const std::size_t> res,
                               std::span<const WeightedSet> sets);
double objective_score(std::span<const std::size_t> res,
                       std::span<const WeightedSet> sets);

struct Coefficients {
  double a = 1.0;  // Clients list share
  double b = 0.0;  // Common list share
  double c = 0.0;  // Sensitivity list share
};

// Ordered candidate lists of one multi-client budget group.
struct SelectionLists {
  std::vector<std::size_t> clients;
  std::vector<std::size_t> common;
  std::vector<std::size_t> sensitivity;
};

// Columns picked for (a, b) from the three lists given the already agreed
// `res`: ⌊aλ⌋ from Clients, ⌊bλ⌋ from Common, and the rest from Sensitivity,
// never repeating a column. Lists that run dry leave their share to the
// Sensitivity list.
std::vector<std::size_t> select_from_lists(const SelectionLists& lists,
                                           std::span<const std::size_t> res,
                                           std::size_t lambda, double a,
                                           double b);

struct OptimizerOptions {
  std::size_t n_opt = 50;
  std::uint64_t seed = 0;
  double grid_step = 0.05;
};

struct OptimizerTrace {
  std::vector<Coefficients> proposals;
  std::vector<double> scores;
};

// Gaussian-process search with expected improvement over the simplex
// a + b + c = 1, evaluated on a grid of step `grid_step`. `objective` maps
// (a, b) to a score; proposals whose floor(aλ), floor(bλ) cell has already
// been scored are skipped. Returns the first proposal attaining the best
// score.
Coefficients optimize_coefficients(
    const std::function<double(double, double)>& objective, std::size_t lambda,
    const OptimizerOptions& options, OptimizerTrace* trace = nullptr);

struct GroupRecord {
  std::size_t budget = 0;
  std::vector<std::size_t> client_ids;
  std::size_t lambda = 0;
  Coefficients coefficients;
  std::vector<std::size_t> selected;
};

struct NegotiationResult {
  std::vector<std::size_t> res;  // ascending column index
  Coefficients coefficients;     // of the last multi-client group
  double score = 0.0;            // objective on code weights
  std::size_t target = 0;        // max_i k_i
  std::size_t shortfall = 0;     // target − |res| when bids cannot fill it
  std::vector<GroupRecord> groups;
};

struct NegotiationOptions {
  OptimizerOptions optimizer;
};

NegotiationResult negotiate(std::span<const SensitivityBid> bids,
                            const NegotiationOptions& options = {});

enum class Alignment { kLeft, kRight };

struct AggregatedPlain {
  Matrix matrix;                    // m × K
  std::vector<std::size_t> counts;  // contributors per column
};

// Column-aware mean. With kLeft, column j averages the inputs wider than j;
// with kRight, inputs are anchored at the right edge instead. Sums run in
// input order and are scaled by 1/count.
AggregatedPlain aggregate_plain(std::span<const Matrix> updates,
                                Alignment alignment = Alignment::kLeft);

struct AggregatedCipher {
  crypto::CipherBlockList blocks;   // m × K*, right-aligned
  std::vector<std::size_t> counts;  // contributors per covered column
};

// Right-aligned homomorphic sum of m-row block lists, then a 1/count mask
// per block. Inputs share one grid (total columns and chunk).
AggregatedCipher aggregate_cipher(const crypto::HeBackend& backend,
                                  std::span<const crypto::CipherBlockList> updates);

// B · block for every block of an uplink list.
crypto::CipherBlockList apply_plain_matmul(const crypto::HeBackend& backend,
                                           const Matrix& p,
                                           const crypto::CipherBlockList& list);

struct PlainSlice {
  Matrix u;                   // m × r_i
  std::vector<double> sigma;  // r_i
  Matrix vt;                  // r_i × K
  bool clamped = false;       // r_i exceeded min(m, K)
};

// One SVD of the aggregate, sliced to each requested rank.
std::vector<PlainSlice> svd_and_slice(const AggregatedPlain& agg,
                                      std::span<const std::size_t> ranks);

// Blocks covering the rightmost k columns; a partially needed block has the
// columns left of the cut masked to zero.
crypto::CipherBlockList truncate_cipher(const crypto::HeBackend& backend,
                                        const AggregatedCipher& agg,
                                        std::size_t k);

struct Downlink {
  PlainSlice plain;
  crypto::CipherBlockList cipher;
};

// Magic "SHLD", U, σ (1 × r) and Vᵀ as length-prefixed CSV text, then the
// cipher block stream.
std::vector<std::uint8_t> serialize_downlink(const Downlink& downlink,
                                             const crypto::HeBackend& backend);
Downlink deserialize_downlink(std::span<const std::uint8_t> bytes,
                              const crypto::HeBackend& backend,
                              std::shared_ptr<const crypto::HeParams> params);

}  // namespace shelora::server

#endif  // SHELORA_SERVER_H_
