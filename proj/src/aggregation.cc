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
#include <string>
#include <utility>

#include "shelora/errors.h"
#include "shelora/server.h"
#include "shelora/wire.h"

namespace shelora::server {

namespace {

constexpr std::uint32_t kDownlinkMagic = 0x444c4853;  // "SHLD"

}  // namespace

AggregatedPlain aggregate_plain(std::span<const Matrix> updates,
                                Alignment alignment) {
  if (updates.empty()) throw ValidationError("nothing to aggregate");
  const std::size_t m = updates.front().rows();
  std::size_t width = 0;
  for (const auto& u : updates) {
    if (u.rows() != m) {
      throw ShapeError("aggregate_plain: row counts differ (" +
                       std::to_string(u.rows()) + " vs " + std::to_string(m) +
                       ")");
    }
    width = std::max(width, u.cols());
  }
  AggregatedPlain out{Matrix(m, width), std::vector<std::size_t>(width, 0)};
  for (const auto& u : updates) {
    const std::size_t offset =
        alignment == Alignment::kLeft ? 0 : width - u.cols();
    for (std::size_t c = 0; c < u.cols(); ++c) ++out.counts[offset + c];
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < u.cols(); ++c) {
        out.matrix(r, offset + c) += u(r, c);
      }
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    const double inv = 1.0 / static_cast<double>(out.counts[c]);
    for (std::size_t r = 0; r < m; ++r) out.matrix(r, c) *= inv;
  }
  return out;
}

crypto::CipherBlockList apply_plain_matmul(const crypto::HeBackend& backend,
                                           const Matrix& p,
                                           const crypto::CipherBlockList& list) {
  crypto::CipherBlockList out = list;
  out.rows = p.rows();
  for (auto& b : out.blocks) b = backend.plain_matmul(p, b);
  return out;
}

AggregatedCipher aggregate_cipher(
    const crypto::HeBackend& backend,
    std::span<const crypto::CipherBlockList> updates) {
  if (updates.empty()) throw ValidationError("nothing to aggregate");
  const std::size_t n = updates.front().total_cols;
  const std::size_t chunk = updates.front().chunk;
  const std::size_t rows = updates.front().rows;
  std::size_t k_max = 0;
  for (const auto& u : updates) {
    if (u.total_cols != n || u.chunk != chunk || u.rows != rows) {
      throw IncompatibilityError("aggregate_cipher: block grids differ");
    }
    if (u.blocks.size() != crypto::block_count(u.covered, chunk)) {
      throw IncompatibilityError("aggregate_cipher: block count disagrees "
                                 "with coverage");
    }
    k_max = std::max(k_max, u.covered);
  }

  AggregatedCipher out;
  out.blocks.rows = rows;
  out.blocks.total_cols = n;
  out.blocks.covered = k_max;
  out.blocks.chunk = chunk;
  out.counts.assign(k_max, 0);
  for (const auto& u : updates) {
    for (std::size_t c = k_max - u.covered; c < k_max; ++c) ++out.counts[c];
  }

  // Slot j from the right: sum in input order over the lists that reach it.
  const auto spans = crypto::covering_spans(n, k_max, chunk);
  const std::size_t n_blocks = spans.size();
  std::vector<crypto::CipherBlock> acc(n_blocks);
  std::vector<bool> seeded(n_blocks, false);
  for (const auto& u : updates) {
    const std::size_t nb = u.blocks.size();
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t slot = n_blocks - nb + j;
      if (!seeded[slot]) {
        acc[slot] = u.blocks[j];
        seeded[slot] = true;
      } else {
        acc[slot] = backend.add(acc[slot], u.blocks[j]);
      }
    }
  }

  const std::size_t first_col = n - k_max;
  for (std::size_t s = 0; s < n_blocks; ++s) {
    std::vector<double> mask(spans[s].width, 0.0);
    for (std::size_t c = 0; c < spans[s].width; ++c) {
      const std::size_t col = spans[s].begin + c;
      if (col >= first_col) {
        mask[c] = 1.0 / static_cast<double>(out.counts[col - first_col]);
      }
    }
    out.blocks.blocks.push_back(backend.mask_mul(acc[s], mask));
  }
  return out;
}

std::vector<PlainSlice> svd_and_slice(const AggregatedPlain& agg,
                                      std::span<const std::size_t> ranks) {
  const Matrix& m = agg.matrix;
  const std::size_t p = std::min(m.rows(), m.cols());
  linalg::SvdResult s;
  if (p > 0) s = linalg::svd(m);
  std::vector<PlainSlice> out;
  out.reserve(ranks.size());
  for (std::size_t r : ranks) {
    if (r < 1) throw ValidationError("client rank must be >= 1");
    PlainSlice slice;
    const std::size_t keep = std::min(r, p);
    slice.clamped = r > p;
    if (keep > 0) {
      slice.u = linalg::col_range(s.u, 0, keep);
      slice.sigma.assign(s.sigma.begin(), s.sigma.begin() + static_cast<long>(keep));
      slice.vt = linalg::row_range(s.vt, 0, keep);
    } else {
      slice.u = Matrix(m.rows(), 0);
      slice.vt = Matrix(0, m.cols());
    }
    out.push_back(std::move(slice));
  }
  return out;
}

crypto::CipherBlockList truncate_cipher(const crypto::HeBackend& backend,
                                        const AggregatedCipher& agg,
                                        std::size_t k) {
  const auto& src = agg.blocks;
  if (k > src.covered) {
    throw ValidationError("truncate_cipher: k = " + std::to_string(k) +
                          " exceeds K* = " + std::to_string(src.covered));
  }
  crypto::CipherBlockList out;
  out.rows = src.rows;
  out.total_cols = src.total_cols;
  out.covered = k;
  out.chunk = src.chunk;
  if (k == 0) return out;

  const auto spans = crypto::covering_spans(src.total_cols, k, src.chunk);
  const std::size_t skip = src.blocks.size() - spans.size();
  const std::size_t cut = src.total_cols - k;
  for (std::size_t j = 0; j < spans.size(); ++j) {
    const auto& block = src.blocks[skip + j];
    if (j == 0 && spans[0].begin < cut) {
      std::vector<double> mask(spans[0].width, 1.0);
      for (std::size_t c = 0; spans[0].begin + c < cut; ++c) mask[c] = 0.0;
      out.blocks.push_back(backend.mask_mul(block, mask));
    } else {
      out.blocks.push_back(block);
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize_downlink(const Downlink& downlink,
                                             const crypto::HeBackend& backend) {
  wire::ByteWriter w;
  w.u32(kDownlinkMagic);
  w.str(linalg::to_csv(downlink.plain.u));
  const Matrix sigma(1, downlink.plain.sigma.size(), downlink.plain.sigma);
  w.str(linalg::to_csv(sigma));
  w.str(linalg::to_csv(downlink.plain.vt));
  w.u32(downlink.plain.clamped ? 1 : 0);
  wire::write_block_list(w, backend, downlink.cipher);
  return w.take();
}

Downlink deserialize_downlink(std::span<const std::uint8_t> bytes,
                              const crypto::HeBackend& backend,
                              std::shared_ptr<const crypto::HeParams> params) {
  wire::ByteReader r(bytes);
  if (r.u32() != kDownlinkMagic) throw FormatError("not a downlink message");
  Downlink d;
  d.plain.u = linalg::from_csv(r.str());
  const Matrix sigma = linalg::from_csv(r.str());
  d.plain.sigma.assign(sigma.data().begin(), sigma.data().end());
  d.plain.vt = linalg::from_csv(r.str());
  d.plain.clamped = r.u32() != 0;
  d.cipher = wire::read_block_list(r, backend, std::move(params));
  if (!r.at_end()) throw FormatError("trailing bytes after downlink");
  if (d.plain.u.cols() != d.plain.sigma.size() ||
      d.plain.vt.rows() != d.plain.sigma.size()) {
    throw FormatError("downlink factors disagree on rank");
  }
  return d;
}

}  // namespace shelora::server
