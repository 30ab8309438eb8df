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

#include "shelora/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "shelora/errors.h"
#include "shelora/random.h"

namespace shelora::metrics {

namespace {

// Row-centred copy.
Matrix centre_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    const double mean =
        std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    for (double& v : row) v -= mean;
  }
  return out;
}

void check_pair(const Matrix& g, const Matrix& q) {
  if (g.rows() != q.rows() || g.cols() != q.cols()) {
    throw ShapeError("G and Q must have the same shape");
  }
  if (g.cols() < 3) throw ValidationError("permutation check needs n >= 3");
}

}  // namespace

MiEstimate kde_mutual_info(std::span<const double> x, std::span<const double> y,
                           const MiOptions& options) {
  if (x.size() != y.size()) throw ShapeError("x and y differ in length");
  if (x.size() < 2) throw ValidationError("MI needs at least 2 samples");
  if (!(options.bandwidth > 0.0)) throw ValidationError("bandwidth must be > 0");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw DomainError("MI samples must be finite");
    }
  }

  const std::size_t n = x.size();
  const std::size_t keep = std::min(std::max<std::size_t>(options.cap, 2), n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (keep < n) {
    Rng rng(options.seed);
    // Partial Fisher-Yates: the first `keep` entries are a uniform draw
    // without replacement.
    for (std::size_t i = 0; i < keep; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(keep);
  }
  std::vector<double> xs(keep);
  std::vector<double> ys(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }

  const double h = options.bandwidth;
  const double inv2h2 = 1.0 / (2.0 * h * h);
  const double log_norm1 = std::log(std::sqrt(2.0 * M_PI) * h);
  const double log_norm2 = std::log(2.0 * M_PI * h * h);
  const double log_n = std::log(static_cast<double>(keep));

  double total = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    double sx = 0.0;
    double sy = 0.0;
    double sxy = 0.0;
    for (std::size_t j = 0; j < keep; ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      const double ex = std::exp(-dx * dx * inv2h2);
      const double ey = std::exp(-dy * dy * inv2h2);
      sx += ex;
      sy += ey;
      sxy += ex * ey;
    }
    const double log_px = std::log(sx) - log_n - log_norm1;
    const double log_py = std::log(sy) - log_n - log_norm1;
    const double log_pxy = std::log(sxy) - log_n - log_norm2;
    total += log_pxy - log_px - log_py;
  }
  double value = total / static_cast<double>(keep);
  if (options.unit == MiUnit::kBits) value /= std::log(2.0);
  return {value, keep, h, options.unit};
}

Strategy parse_strategy(const std::string& name) {
  if (name == "max") return Strategy::kMax;
  if (name == "min") return Strategy::kMin;
  if (name == "random") return Strategy::kRandom;
  throw ValidationError("unknown strategy '" + name +
                        "' (expected max, min or random)");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kMax: return "max";
    case Strategy::kMin: return "min";
    case Strategy::kRandom: return "random";
  }
  return "unknown";
}

std::vector<std::size_t> masking_order(const sensitivity::ChannelScores& scores,
                                       Strategy strategy, std::uint64_t seed) {
  std::vector<std::size_t> order(scores.n());
  std::iota(order.begin(), order.end(), 0);
  const auto& s = scores.scores;
  switch (strategy) {
    case Strategy::kMax:
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
      break;
    case Strategy::kMin:
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
      break;
    case Strategy::kRandom: {
      Rng rng(seed);
      for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
      }
      break;
    }
  }
  return order;
}

std::vector<CurvePoint> leakage_curve(const Matrix& w,
                                      const sensitivity::ChannelScores& scores,
                                      Strategy strategy,
                                      std::span<const double> gammas,
                                      const MiOptions& options,
                                      std::uint64_t strategy_seed) {
  if (scores.n() != w.cols()) {
    throw ShapeError("scores do not match the matrix width");
  }
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (i > 0 && gammas[i] < gammas[i - 1]) {
      throw ValidationError("gammas must be ascending");
    }
  }
  const auto order = masking_order(scores, strategy, strategy_seed);
  std::vector<CurvePoint> out;
  for (double gamma : gammas) {
    const std::size_t k = sensitivity::budget_columns(w.cols(), gamma);
    Matrix masked = w;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t r = 0; r < w.rows(); ++r) masked(r, order[i]) = 0.0;
    }
    const auto mi = kde_mutual_info(w.data(), masked.data(), options);
    out.push_back({gamma, k, mi.value});
  }
  return out;
}

void BoundInputs::validate() const {
  for (double v : {d, n, s2, grad_max_sq, lambda_e}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("bound inputs must be finite and nonnegative");
    }
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ValidationError("gamma must lie in [0, 1]");
  }
}

double crlb_bound(const BoundInputs& in) {
  in.validate();
  const double exposure = in.n * (1.0 - in.gamma) * in.grad_max_sq;
  double denom = in.lambda_e;
  if (exposure > 0.0) {
    if (in.s2 == 0.0) return 0.0;
    denom += exposure / in.s2;
  }
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return in.d * in.d / denom;
}

double permutation_analytic_var(const Matrix& g, const Matrix& q) {
  check_pair(g, q);
  const Matrix gc = centre_rows(g);
  const Matrix qc = centre_rows(q);
  double total = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double sg = 0.0;
    double sq = 0.0;
    for (double v : gc.row(i)) sg += v * v;
    for (double v : qc.row(i)) sq += v * v;
    total += sq * sg;
  }
  return total / static_cast<double>(g.cols() - 1);
}

double permutation_exact_var(const Matrix& g, const Matrix& q) {
  check_pair(g, q);
  const Matrix gc = centre_rows(g);
  const Matrix qc = centre_rows(q);
  const Matrix gg = linalg::matmul(gc, gc.transpose());
  const Matrix qq = linalg::matmul(qc, qc.transpose());
  double total = 0.0;
  for (std::size_t i = 0; i < gg.size(); ++i) total += gg.data()[i] * qq.data()[i];
  return total / static_cast<double>(g.cols() - 1);
}

PermutationNoiseReport permutation_noise_check(const Matrix& g, const Matrix& q,
                                               std::size_t trials,
                                               std::uint64_t seed) {
  check_pair(g, q);
  if (trials < 2) throw ValidationError("need at least 2 trials");
  const std::size_t r = g.rows();
  const std::size_t n = g.cols();

  double base = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) base += q.data()[i] * g.data()[i];

  std::vector<double> samples(trials);
  std::vector<std::size_t> perm(n);
  for (std::size_t t = 0; t < trials; ++t) {
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, {t}));
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i - 1], perm[pick(rng)]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const auto qrow = q.row(i);
      const auto grow = g.row(i);
      for (std::size_t k = 0; k < n; ++k) s += qrow[k] * grow[perm[k]];
    }
    samples[t] = s - base;
  }

  PermutationNoiseReport rep;
  rep.trials = trials;
  rep.analytic_var = permutation_analytic_var(g, q);
  rep.exact_var = permutation_exact_var(g, q);
  const double tn = static_cast<double>(trials);
  rep.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / tn;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double v : samples) {
    const double d = v - rep.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  rep.empirical_var = m2 / (tn - 1.0);
  const double pop_var = m2 / tn;
  if (pop_var > 0.0) {
    rep.skewness = (m3 / tn) / std::pow(pop_var, 1.5);
    rep.excess_kurtosis = (m4 / tn) / (pop_var * pop_var) - 3.0;
  }
  return rep;
}

Matrix planted_heavy_matrix(std::size_t rows, std::size_t cols,
                            std::size_t heavy, double heavy_scale,
                            std::uint64_t seed) {
  if (heavy > cols) throw ValidationError("more heavy columns than columns");
  Rng rng(seed);
  std::uniform_real_distribution<double> log_scale(std::log(0.2), 0.0);
  std::vector<double> scale(cols);
  for (double& s : scale) s = std::exp(log_scale(rng));
  std::vector<std::size_t> idx(cols);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < heavy; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cols - 1);
    std::swap(idx[i], idx[pick(rng)]);
    scale[idx[i]] = heavy_scale;
  }
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix w(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) w(r, c) = g(rng) * scale[c];
  }
  return w;
}

MaskedUtility masked_utility(const Matrix& w0, const client::AdapterPair& adapter,
                             std::span<const std::size_t> encrypted_columns,
                             const client::LocalDataset& data) {
  client::AdapterPair masked = adapter;
  for (std::size_t c : encrypted_columns) {
    if (c >= masked.a.cols()) throw ValidationError("masked column out of range");
    for (std::size_t r = 0; r < masked.a.rows(); ++r) masked.a(r, c) = 0.0;
  }
  return {client::mse_loss(w0, adapter, data),
          client::mse_loss(w0, masked, data)};
}

}  // namespace shelora::metrics
