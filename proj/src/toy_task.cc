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

#include "shelora/toy_task.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "shelora/errors.h"

namespace shelora::orchestrator {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

}  // namespace

ToyTask make_toy_task(const ToyTaskSpec& spec, std::uint64_t seed) {
  if (spec.m == 0 || spec.n == 0 || spec.n_clusters == 0) {
    throw ValidationError("toy task dimensions must be positive");
  }
  if (spec.hot_features > spec.n) {
    throw ValidationError("more hot features than columns");
  }
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ToyTask task;
  task.spec = spec;
  task.w0 = Matrix(spec.m, spec.n);
  const double w0_scale = 1.0 / std::sqrt(static_cast<double>(spec.n));
  for (double& v : task.w0.data()) v = w0_scale * g(rng);

  Matrix u(spec.m, spec.teacher_rank);
  Matrix vt(spec.teacher_rank, spec.n);
  for (double& v : u.data()) v = g(rng);
  for (double& v : vt.data()) v = g(rng);
  const double t_scale =
      spec.teacher_scale / std::sqrt(static_cast<double>(std::max<std::size_t>(spec.teacher_rank, 1)));
  task.w_star = task.w0 + t_scale * linalg::matmul(u, vt);

  std::vector<std::size_t> cols(spec.n);
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    std::iota(cols.begin(), cols.end(), 0);
    shuffle(cols, rng);
    std::vector<std::size_t> hot(cols.begin(),
                                 cols.begin() + static_cast<long>(spec.hot_features));
    std::sort(hot.begin(), hot.end());
    task.hot.push_back(std::move(hot));
  }
  return task;
}

client::LocalDataset sample_dataset(const ToyTask& task,
                                    std::span<const std::size_t> clusters,
                                    Rng& rng) {
  const auto& s = task.spec;
  std::normal_distribution<double> g(0.0, 1.0);
  client::LocalDataset d{Matrix(clusters.size(), s.n),
                         Matrix(clusters.size(), s.m)};
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i] >= s.n_clusters) throw ValidationError("cluster out of range");
    auto x = d.x.row(i);
    for (double& v : x) v = g(rng);
    for (std::size_t f : task.hot[clusters[i]]) x[f] *= s.hot_scale;
    auto y = d.y.row(i);
    for (std::size_t r = 0; r < s.m; ++r) {
      const auto w = task.w_star.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < s.n; ++c) acc += w[c] * x[c];
      y[r] = acc + s.noise_std * g(rng);
    }
  }
  return d;
}

std::vector<std::size_t> draw_clusters(std::span<const double> mix,
                                       std::size_t count, Rng& rng) {
  std::discrete_distribution<std::size_t> pick(mix.begin(), mix.end());
  std::vector<std::size_t> out(count);
  for (auto& c : out) c = pick(rng);
  return out;
}

std::vector<double> dirichlet(std::size_t k, double rho, Rng& rng) {
  if (!(rho > 0.0)) throw ValidationError("Dirichlet concentration must be > 0");
  std::gamma_distribution<double> gam(rho, 1.0);
  std::vector<double> q(k);
  double total = 0.0;
  for (double& v : q) {
    v = gam(rng);
    total += v;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::fill(q.begin(), q.end(), 0.0);
    q[pick(rng)] = 1.0;
    return q;
  }
  for (double& v : q) v /= total;
  return q;
}

Partition partition_noniid(std::span<const std::size_t> labels,
                           std::size_t n_clusters, std::size_t n_clients,
                           double rho, std::uint64_t seed) {
  if (n_clients == 0) throw ValidationError("need at least one client");
  if (n_clients > labels.size()) {
    throw ValidationError("more clients (" + std::to_string(n_clients) +
                          ") than samples (" + std::to_string(labels.size()) +
                          ")");
  }
  if (!(rho > 0.0)) throw ValidationError("rho must be > 0");
  Rng rng(seed);
  Partition p;
  p.indices.resize(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) {
    p.mixes.push_back(dirichlet(n_clusters, rho, rng));
  }

  std::vector<std::vector<std::size_t>> by_cluster(n_clusters);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (labels[s] >= n_clusters) throw ValidationError("label out of range");
    by_cluster[labels[s]].push_back(s);
  }

  for (std::size_t c = 0; c < n_clusters; ++c) {
    auto& pool = by_cluster[c];
    if (pool.empty()) continue;
    shuffle(pool, rng);
    double col_sum = 0.0;
    for (const auto& q : p.mixes) col_sum += q[c];
    std::vector<double> want(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) {
      want[i] = col_sum > 0.0
                    ? static_cast<double>(pool.size()) * p.mixes[i][c] / col_sum
                    : static_cast<double>(pool.size()) / static_cast<double>(n_clients);
    }
    std::vector<std::size_t> got(n_clients);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      got[i] = static_cast<std::size_t>(std::floor(want[i]));
      assigned += got[i];
    }
    std::vector<std::size_t> order(n_clients);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return want[a] - std::floor(want[a]) > want[b] - std::floor(want[b]);
    });
    for (std::size_t j = 0; assigned < pool.size(); j = (j + 1) % n_clients) {
      ++got[order[j]];
      ++assigned;
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      for (std::size_t t = 0; t < got[i]; ++t) p.indices[i].push_back(pool[pos++]);
    }
  }
  for (auto& idx : p.indices) std::sort(idx.begin(), idx.end());
  return p;
}

}  // namespace shelora::orchestrator
