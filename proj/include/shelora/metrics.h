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

// Leakage and privacy measurements: a KDE mutual-information estimator, MI
// curves for column-masking strategies, the Bayesian Cramér-Rao bound on
// reconstruction error, a Monte Carlo check of the column-permutation noise,
// and the utility of a model whose encrypted columns are masked out.

#ifndef SHELORA_METRICS_H_
#define SHELORA_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shelora/client.h"
#include "shelora/linalg.h"
#include "shelora/sensitivity.h"

namespace shelora::metrics {

using linalg::Matrix;

enum class MiUnit { kBits, kNats };

struct MiOptions {
  double bandwidth = 0.2;
  std::size_t cap = 10000;  // samples kept after subsampling
  std::uint64_t seed = 0;   // subsampling seed
  MiUnit unit = MiUnit::kBits;
};

struct MiEstimate {
  double value = 0.0;
  std::size_t sample_count = 0;
  double bandwidth = 0.0;
  MiUnit unit = MiUnit::kBits;
};

// Mean over the retained pairs of log p̂(x,y) − log p̂(x) − log p̂(y), with
// Gaussian kernels of the same bandwidth in every coordinate. The estimate
// is evaluated at the samples it was fitted on. O(N²) in the retained count.
MiEstimate kde_mutual_info(std::span<const double> x, std::span<const double> y,
                           const MiOptions& options = {});

enum class Strategy { kMax, kMin, kRandom };

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

// Column order in which a strategy masks columns. kRandom draws one seeded
// shuffle, so masked sets are nested across budgets.
std::vector<std::size_t> masking_order(const sensitivity::ChannelScores& scores,
                                       Strategy strategy, std::uint64_t seed);

struct CurvePoint {
  double gamma = 0.0;
  std::size_t masked = 0;
  double mi = 0.0;
};

// MI between W and W with ⌊n·γ⌋ columns zeroed, for each γ.
std::vector<CurvePoint> leakage_curve(const Matrix& w,
                                      const sensitivity::ChannelScores& scores,
                                      Strategy strategy,
                                      std::span<const double> gammas,
                                      const MiOptions& options = {},
                                      std::uint64_t strategy_seed = 0);

struct BoundInputs {
  double d = 0.0;            // data dimension
  double n = 0.0;            // column count
  double gamma = 0.0;        // encrypted fraction
  double s2 = 0.0;           // equivalent noise variance
  double grad_max_sq = 0.0;  // largest squared input-gradient norm
  double lambda_e = 0.0;     // top eigenvalue of the prior Fisher matrix

  void validate() const;
};

// d² / ((n(1−γ)/s²)·grad_max_sq + λ_e); +∞ when the denominator is zero.
// With s² = 0 the exposure term is infinite unless n(1−γ)·grad_max_sq = 0.
double crlb_bound(const BoundInputs& in);

struct PermutationNoiseReport {
  std::size_t trials = 0;
  double mean = 0.0;
  double empirical_var = 0.0;
  // Σ_i (1/(n−1))·Σ_k(Q_ik − Q̄_i)²·Σ_k(G_ik − Ḡ_i)², the per-row form.
  double analytic_var = 0.0;
  // Exact variance over uniform permutations, including cross-row terms:
  // (1/(n−1))·Σ_{k,l}(Σ_i Q̃_ik·G̃_il)².
  double exact_var = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

// Samples ⟨Q, G·(P − I)⟩ over uniform random column permutations P. Trial t
// draws from its own stream derived from (seed, t).
PermutationNoiseReport permutation_noise_check(const Matrix& g, const Matrix& q,
                                               std::size_t trials,
                                               std::uint64_t seed = 0);

// Variance terms only, without sampling.
double permutation_analytic_var(const Matrix& g, const Matrix& q);
double permutation_exact_var(const Matrix& g, const Matrix& q);

// r × n Gaussian matrix whose columns have log-uniform scales in [0.2, 1],
// except `heavy` randomly placed columns with scale `heavy_scale`.
Matrix planted_heavy_matrix(std::size_t rows, std::size_t cols,
                            std::size_t heavy, double heavy_scale,
                            std::uint64_t seed);

struct MaskedUtility {
  double true_loss = 0.0;
  double masked_loss = 0.0;  // encrypted columns of A zeroed
};

MaskedUtility masked_utility(const Matrix& w0, const client::AdapterPair& adapter,
                             std::span<const std::size_t> encrypted_columns,
                             const client::LocalDataset& data);

}  // namespace shelora::metrics

#endif  // SHELORA_METRICS_H_
