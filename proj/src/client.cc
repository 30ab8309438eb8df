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

#include "shelora/client.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "shelora/errors.h"
#include "shelora/random.h"
#include "shelora/wire.h"

namespace shelora::client {

namespace {

constexpr std::uint32_t kUpdateMagic = 0x554c4853;  // "SHLU"

// Residual (W·xᵀ)ᵀ − y, one sample per row.
Matrix residual(const Matrix& w, const LocalDataset& data) {
  return linalg::matmul(data.x, w.transpose()) - data.y;
}

double mean_square(const Matrix& e) {
  if (e.size() == 0) return 0.0;
  double s = 0.0;
  for (double v : e.data()) s += v * v;
  return s / static_cast<double>(e.size());
}

void check_dataset(const Matrix& w, const LocalDataset& data) {
  if (data.x.cols() != w.cols() || data.y.cols() != w.rows() ||
      data.x.rows() != data.y.rows()) {
    throw ShapeError("dataset does not match a " + std::to_string(w.rows()) +
                     "x" + std::to_string(w.cols()) + " model");
  }
}

}  // namespace

void DeviceProfile::validate() const {
  if (rank < 1) throw ValidationError("device rank must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ValidationError("device gamma must lie in [0, 1]");
  }
}

Matrix AdapterPair::product() const { return linalg::matmul(b, a); }

void AdapterPair::validate() const {
  if (b.cols() != rank || a.rows() != rank) {
    throw ShapeError("adapter factors do not agree on rank " +
                     std::to_string(rank));
  }
}

AdapterPair init_adapter(std::size_t m, std::size_t n, std::size_t rank,
                         std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 0.02);
  AdapterPair out{Matrix(m, rank), Matrix(rank, n), rank};
  for (double& v : out.a.data()) v = g(rng);
  return out;
}

double mse_loss(const Matrix& w, const LocalDataset& data) {
  check_dataset(w, data);
  return mean_square(residual(w, data));
}

double mse_loss(const Matrix& w0, const AdapterPair& adapter,
                const LocalDataset& data) {
  return mse_loss(w0 + adapter.product(), data);
}

AdapterPair local_train(const AdapterPair& adapter, const Matrix& w0,
                        const LocalDataset& data, std::size_t steps,
                        double lr) {
  adapter.validate();
  if (adapter.m() != w0.rows() || adapter.n() != w0.cols()) {
    throw ShapeError("adapter does not match the frozen weight");
  }
  check_dataset(w0, data);
  AdapterPair cur = adapter;
  if (steps == 0 || lr == 0.0 || data.size() == 0) return cur;

  const double scale = 2.0 / static_cast<double>(data.size() * w0.rows());
  for (std::size_t step = 0; step < steps; ++step) {
    const Matrix e = residual(w0 + cur.product(), data);
    const double loss = mean_square(e);
    if (!std::isfinite(loss) || loss > 1e6) {
      throw TrainingError("local training diverged at step " +
                          std::to_string(step) + " (loss " +
                          std::to_string(loss) + ", lr " + std::to_string(lr) +
                          ")");
    }
    const Matrix g = scale * linalg::matmul(e.transpose(), data.x);  // m × n
    const Matrix db = linalg::matmul(g, cur.a.transpose());
    const Matrix da = linalg::matmul(cur.b.transpose(), g);
    cur.b = cur.b - lr * db;
    cur.a = cur.a - lr * da;
  }
  const double final_loss = mse_loss(w0, cur, data);
  if (!std::isfinite(final_loss) || final_loss > 1e6) {
    throw TrainingError("local training diverged after " +
                        std::to_string(steps) + " steps (loss " +
                        std::to_string(final_loss) + ")");
  }
  return cur;
}

server::SensitivityBid build_bid(std::size_t client_id,
                                 const sensitivity::ChannelScores& scores,
                                 const DeviceProfile& profile,
                                 const crypto::OpeKey& key) {
  profile.validate();
  const auto sel = sensitivity::select_subset(scores, profile.gamma);
  std::vector<double> picked;
  picked.reserve(sel.columns.size());
  for (std::size_t c : sel.columns) picked.push_back(scores.scores[c]);
  server::SensitivityBid bid;
  bid.client_id = client_id;
  bid.rank = profile.rank;
  bid.k = sel.k;
  bid.columns = sel.columns;
  bid.codes = crypto::ope_encode(picked, key);
  return bid;
}

SwapPlan make_swap_plan(std::size_t n, std::span<const std::size_t> res) {
  std::vector<bool> enc(n, false);
  for (std::size_t c : res) {
    if (c >= n) throw ValidationError("encrypted column out of range");
    if (enc[c]) throw ValidationError("duplicate encrypted column");
    enc[c] = true;
  }
  SwapPlan plan;
  plan.perm.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (!enc[c]) plan.perm.push_back(c);
  }
  plan.n_plain = plan.perm.size();
  for (std::size_t c = 0; c < n; ++c) {
    if (enc[c]) {
      plan.perm.push_back(c);
      plan.encrypted_columns.push_back(c);
    }
  }
  plan.inverse = linalg::inverse_permutation(plan.perm);
  return plan;
}

AdapterPair apply_swap(const AdapterPair& adapter, const SwapPlan& plan) {
  return {adapter.b, linalg::permute_cols(adapter.a, plan.perm), adapter.rank};
}

AdapterPair undo_swap(const AdapterPair& adapter, const SwapPlan& plan) {
  return {adapter.b, linalg::permute_cols(adapter.a, plan.inverse),
          adapter.rank};
}

ClientUpdate encrypt_update(const AdapterPair& swapped, std::size_t k,
                            const crypto::HeBackend& backend,
                            const crypto::PublicKey& pk, std::size_t chunk) {
  swapped.validate();
  const std::size_t n = swapped.n();
  if (k > n) throw ValidationError("cannot encrypt more columns than exist");
  ClientUpdate u;
  u.rank = swapped.rank;
  u.n = n;
  u.k = k;
  u.b_plain = swapped.b;
  u.a_plain = linalg::col_range(swapped.a, 0, n - k);
  u.cipher = crypto::encrypt_columns(backend, pk, swapped.a, k, chunk);
  return u;
}

std::vector<std::uint8_t> serialize_update(const ClientUpdate& update,
                                           const crypto::HeBackend& backend) {
  wire::ByteWriter w;
  w.u32(kUpdateMagic);
  w.u64(update.client_id);
  w.u64(update.round);
  w.u32(static_cast<std::uint32_t>(update.rank));
  w.u32(static_cast<std::uint32_t>(update.n));
  w.u32(static_cast<std::uint32_t>(update.k));
  w.str(linalg::to_csv(update.b_plain));
  w.str(linalg::to_csv(update.a_plain));
  wire::write_block_list(w, backend, update.cipher);
  return w.take();
}

ClientUpdate deserialize_update(std::span<const std::uint8_t> bytes,
                                const crypto::HeBackend& backend,
                                std::shared_ptr<const crypto::HeParams> params) {
  wire::ByteReader r(bytes);
  if (r.u32() != kUpdateMagic) throw FormatError("not a client update");
  ClientUpdate u;
  u.client_id = r.u64();
  u.round = r.u64();
  u.rank = r.u32();
  u.n = r.u32();
  u.k = r.u32();
  u.b_plain = linalg::from_csv(r.str());
  u.a_plain = linalg::from_csv(r.str());
  u.cipher = wire::read_block_list(r, backend, std::move(params));
  if (!r.at_end()) throw FormatError("trailing bytes after client update");
  if (u.k > u.n || u.a_plain.cols() != u.n - u.k ||
      u.cipher.covered != u.k || u.b_plain.cols() != u.rank) {
    throw FormatError("client update header disagrees with its contents");
  }
  return u;
}

ReparamResult refactor_update(const Matrix& merged, const SwapPlan& plan,
                              std::size_t rank) {
  if (merged.cols() != plan.n()) {
    throw ShapeError("merged update has " + std::to_string(merged.cols()) +
                     " columns, plan covers " + std::to_string(plan.n()));
  }
  const auto f = linalg::low_rank_factor(merged, rank);
  ReparamResult out;
  out.effective_rank = f.rank;
  out.clamped = f.clamped;
  const auto s = linalg::svd(merged);
  for (std::size_t i = f.rank; i < s.sigma.size(); ++i) {
    out.discarded_energy += s.sigma[i] * s.sigma[i];
  }
  Matrix b = f.b;
  Matrix a = f.a;
  if (f.rank < rank) {
    b = linalg::zero_pad(b, b.rows(), rank, linalg::Placement::kLeft);
    a = linalg::zero_pad(a, rank, a.cols(), linalg::Placement::kTop);
  }
  out.adapter = {std::move(b), linalg::permute_cols(a, plan.inverse), rank};
  return out;
}

ReparamResult reparameterize(const server::PlainSlice& plain,
                             const crypto::CipherBlockList& cipher,
                             const crypto::HeBackend& backend,
                             const crypto::SecretKey& sk, const SwapPlan& plan,
                             std::size_t k, std::size_t rank) {
  if (rank < 1) throw ValidationError("adapter rank must be >= 1");
  const std::size_t n = plan.n();
  if (k > n) throw ValidationError("k exceeds the column count");
  if (cipher.covered != k) {
    throw ShapeError("cipher part covers " + std::to_string(cipher.covered) +
                     " columns, expected " + std::to_string(k));
  }
  const std::size_t n_plain = n - k;
  const std::size_t m = plain.u.rows() > 0 ? plain.u.rows() : 0;

  // Clear part: B_p = U·√Σ, A_p = √Σ·Vᵀ restricted to this client's columns.
  std::vector<Matrix> bs;
  std::vector<Matrix> as;
  if (n_plain > 0) {
    if (plain.vt.cols() < n_plain) {
      throw ShapeError("plaintext slice covers fewer columns than required");
    }
    Matrix bp = plain.u;
    Matrix ap = linalg::col_range(plain.vt, 0, n_plain);
    for (std::size_t i = 0; i < plain.sigma.size(); ++i) {
      const double s = std::sqrt(plain.sigma[i]);
      for (std::size_t r = 0; r < bp.rows(); ++r) bp(r, i) *= s;
      for (double& v : ap.row(i)) v *= s;
    }
    bs.push_back(std::move(bp));
    as.push_back(linalg::zero_pad(ap, ap.rows(), n, linalg::Placement::kLeft));
  }

  // Encrypted part: decrypt the slab and factor it at full rank.
  if (k > 0) {
    const Matrix slab = crypto::decrypt_columns(backend, sk, cipher);
    if (m > 0 && slab.rows() != m) {
      throw ShapeError("cipher slab row count disagrees with the plain slice");
    }
    const auto f = linalg::low_rank_factor(
        slab, std::min(slab.rows(), slab.cols()));
    bs.push_back(f.b);
    as.push_back(linalg::zero_pad(f.a, f.a.rows(), n, linalg::Placement::kRight));
  }

  if (bs.empty()) {
    throw ShapeError("reparameterize needs a plaintext or ciphertext part");
  }
  Matrix bg = bs.front();
  Matrix ag = as.front();
  if (bs.size() == 2) {
    bg = linalg::hcat(bg, bs[1]);
    ag = linalg::vcat(ag, as[1]);
  }
  return refactor_update(linalg::matmul(bg, ag), plan, rank);
}

}  // namespace shelora::client
