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

// Teacher-student linear regression used as the stand-in fine-tuning task.
//
// Features come from a mixture of clusters. Each cluster amplifies its own
// subset of "hot" input features, so clients with different cluster mixes
// disagree on which columns of A matter most. Targets follow a teacher
// W* = W₀ + U·V with a low-rank U·V plus Gaussian noise.

#ifndef SHELORA_TOY_TASK_H_
#define SHELORA_TOY_TASK_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shelora/client.h"
#include "shelora/linalg.h"
#include "shelora/random.h"

namespace shelora::orchestrator {

using linalg::Matrix;

struct ToyTaskSpec {
  std::size_t m = 8;
  std::size_t n = 256;
  std::size_t n_clusters = 4;
  std::size_t hot_features = 32;  // per cluster
  double hot_scale = 3.0;
  std::size_t teacher_rank = 2;
  double teacher_scale = 0.3;  // entry scale of the teacher perturbation
  double noise_std = 0.01;
};

struct ToyTask {
  ToyTaskSpec spec;
  Matrix w0;      // frozen base weight, m × n
  Matrix w_star;  // teacher, m × n
  std::vector<std::vector<std::size_t>> hot;  // hot feature indices per cluster
};

ToyTask make_toy_task(const ToyTaskSpec& spec, std::uint64_t seed);

// One labelled sample per cluster entry, in order.
client::LocalDataset sample_dataset(const ToyTask& task,
                                    std::span<const std::size_t> clusters,
                                    Rng& rng);

// Cluster labels drawn i.i.d. from `mix`.
std::vector<std::size_t> draw_clusters(std::span<const double> mix,
                                       std::size_t count, Rng& rng);

// Dirichlet(ρ) draw over `k` categories. Falls back to a one-hot vector when
// every gamma variate underflows to zero.
std::vector<double> dirichlet(std::size_t k, double rho, Rng& rng);

struct Partition {
  std::vector<std::vector<std::size_t>> indices;  // sample indices per client
  std::vector<std::vector<double>> mixes;         // drawn cluster shares
};

// Per client, cluster shares q_i ~ Dirichlet(ρ). Each cluster's samples are
// shuffled and dealt to clients in proportion to q_i[c] / Σ_j q_j[c] with
// largest-remainder rounding. Exhaustive and disjoint.
Partition partition_noniid(std::span<const std::size_t> labels,
                           std::size_t n_clusters, std::size_t n_clients,
                           double rho, std::uint64_t seed);

}  // namespace shelora::orchestrator

#endif  // SHELORA_TOY_TASK_H_
