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

// One aggregation round of the protocol, driven directly through the client
// and server APIs, plus a brute-force column-aware average to compare with.

#ifndef SHELORA_TESTS_PROTOCOL_HARNESS_H_
#define SHELORA_TESTS_PROTOCOL_HARNESS_H_

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

#include "oracle.h"
#include "shelora/client.h"
#include "shelora/he.h"
#include "shelora/linalg.h"
#include "shelora/server.h"

namespace shelora::testing {

struct Instance {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t chunk = 1;
  std::vector<std::size_t> res;           // agreed encrypted columns
  std::vector<std::size_t> k;             // per client, ≤ |res|
  std::vector<client::AdapterPair> adapters;
};

// Heterogeneous clients whose B factors share an r0-dimensional column
// space, so every aggregate has rank ≤ r0 ≤ min rank.
inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick_m(2, 16);
  std::uniform_int_distribution<std::size_t> pick_n(4, 32);
  std::uniform_int_distribution<std::size_t> pick_clients(2, 8);
  Instance in;
  in.m = pick_m(rng);
  in.n = pick_n(rng);
  const std::size_t clients = pick_clients(rng);
  std::uniform_int_distribution<std::size_t> pick_rank(1, std::min<std::size_t>(in.m, 8));
  std::vector<std::size_t> ranks(clients);
  for (auto& r : ranks) r = pick_rank(rng);
  const std::size_t r_min = *std::min_element(ranks.begin(), ranks.end());
  std::uniform_int_distribution<std::size_t> pick_r0(1, r_min);
  const std::size_t r0 = pick_r0(rng);
  const linalg::Matrix basis = gaussian(in.m, r0, rng);

  std::uniform_int_distribution<std::size_t> pick_kmax(0, in.n);
  const std::size_t k_max = pick_kmax(rng);
  std::vector<std::size_t> cols(in.n);
  for (std::size_t i = 0; i < in.n; ++i) cols[i] = i;
  std::shuffle(cols.begin(), cols.end(), rng);
  in.res.assign(cols.begin(), cols.begin() + static_cast<long>(k_max));
  std::sort(in.res.begin(), in.res.end());
  std::uniform_int_distribution<std::size_t> pick_k(0, k_max);
  for (std::size_t i = 0; i < clients; ++i) in.k.push_back(pick_k(rng));
  if (clients > 0) in.k[0] = k_max;
  std::uniform_int_distribution<std::size_t> pick_chunk(1, 5);
  in.chunk = pick_chunk(rng);

  for (std::size_t i = 0; i < clients; ++i) {
    client::AdapterPair ad;
    ad.rank = ranks[i];
    ad.b = linalg::matmul(basis, gaussian(r0, ranks[i], rng));
    ad.a = gaussian(ranks[i], in.n, rng);
    in.adapters.push_back(std::move(ad));
  }
  return in;
}

// Column-aware average of the clients' B_i·A_i in permuted coordinates, as
// seen by client `who`: its clear columns average the clients whose clear
// part reaches them, its encrypted columns the clients whose encrypted part
// does.
inline linalg::Matrix brute_force_average(const Instance& in, std::size_t who,
                                          const client::SwapPlan& plan) {
  std::vector<linalg::Matrix> prods;
  for (const auto& ad : in.adapters) {
    prods.push_back(linalg::matmul(ad.b, linalg::permute_cols(ad.a, plan.perm)));
  }
  linalg::Matrix out(in.m, in.n);
  const std::size_t cut = in.n - in.k[who];
  for (std::size_t p = 0; p < in.n; ++p) {
    const bool encrypted = p >= cut;
    std::size_t count = 0;
    for (std::size_t j = 0; j < prods.size(); ++j) {
      const bool reaches = encrypted ? p >= in.n - in.k[j] : p < in.n - in.k[j];
      if (!reaches) continue;
      ++count;
      for (std::size_t r = 0; r < in.m; ++r) out(r, p) += prods[j](r, p);
    }
    if (count > 0) {
      for (std::size_t r = 0; r < in.m; ++r) out(r, p) /= static_cast<double>(count);
    }
  }
  // Back to the original column order.
  return linalg::permute_cols(out, plan.inverse);
}

struct RoundOutput {
  std::vector<client::ReparamResult> reparam;
  std::vector<linalg::Matrix> expected;  // brute-force average, original order
  server::AggregatedPlain plain;
  server::AggregatedCipher cipher;
  std::vector<std::vector<linalg::Matrix>> decrypted_inputs;  // per client m × k_i
};

inline RoundOutput run_round(const Instance& in, const crypto::HeBackend& be,
                             const crypto::KeyPair& keys) {
  RoundOutput out;
  const auto plan = client::make_swap_plan(in.n, in.res);
  std::vector<linalg::Matrix> plain_updates;
  std::vector<crypto::CipherBlockList> cipher_updates;
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < in.adapters.size(); ++i) {
    const auto swapped = client::apply_swap(in.adapters[i], plan);
    const auto upd = client::encrypt_update(swapped, in.k[i], be, keys.public_key, in.chunk);
    plain_updates.push_back(linalg::matmul(upd.b_plain, upd.a_plain));
    cipher_updates.push_back(server::apply_plain_matmul(be, upd.b_plain, upd.cipher));
    ranks.push_back(in.adapters[i].rank);
  }
  out.plain = server::aggregate_plain(plain_updates, server::Alignment::kLeft);
  out.cipher = server::aggregate_cipher(be, cipher_updates);
  for (const auto& c : cipher_updates) {
    out.decrypted_inputs.push_back({crypto::decrypt_columns(be, keys.secret_key, c)});
  }
  const auto slices = server::svd_and_slice(out.plain, ranks);
  for (std::size_t i = 0; i < in.adapters.size(); ++i) {
    const auto trunc = server::truncate_cipher(be, out.cipher, in.k[i]);
    out.reparam.push_back(client::reparameterize(slices[i], trunc, be, keys.secret_key,
                                                 plan, in.k[i], in.adapters[i].rank));
    out.expected.push_back(brute_force_average(in, i, plan));
  }
  return out;
}

}  // namespace shelora::testing

#endif  // SHELORA_TESTS_PROTOCOL_HARNESS_H_
