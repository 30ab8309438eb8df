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
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "shelora/errors.h"
#include "shelora/random.h"
#include "shelora/server.h"

namespace shelora::server {

namespace {

constexpr double kLengthScale = 0.2;
constexpr double kNoise = 1e-6;
constexpr double kXi = 0.01;

struct Candidate {
  double a = 0.0;
  double b = 0.0;
};

double kernel(const Candidate& x, const Candidate& y) {
  const double da = x.a - y.a;
  const double db = x.b - y.b;
  return std::exp(-(da * da + db * db) / (2.0 * kLengthScale * kLengthScale));
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::pair<long, long> cell_of(const Candidate& c, std::size_t lambda) {
  const double l = static_cast<double>(lambda);
  return {static_cast<long>(std::floor(c.a * l + 1e-9)),
          static_cast<long>(std::floor(c.b * l + 1e-9))};
}

// Expected improvement of every candidate under a GP fitted to (xs, ys).
std::vector<double> expected_improvement(const std::vector<Candidate>& xs,
                                         const std::vector<double>& ys,
                                         const std::vector<Candidate>& cands) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = ys[static_cast<std::size_t>(i)];
  const double mean = y.mean();
  double sd = std::sqrt((y.array() - mean).square().mean());
  if (!(sd > 1e-12)) sd = 1.0;
  const Eigen::VectorXd yn = (y.array() - mean) / sd;

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = kernel(xs[static_cast<std::size_t>(i)],
                       xs[static_cast<std::size_t>(j)]);
    }
    k(i, i) += kNoise;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  const Eigen::VectorXd alpha = llt.solve(yn);
  const double best = yn.maxCoeff();

  std::vector<double> ei(cands.size());
  Eigen::VectorXd ks(n);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      ks(i) = kernel(cands[c], xs[static_cast<std::size_t>(i)]);
    }
    const double mu = ks.dot(alpha);
    const double var = std::max(0.0, 1.0 + kNoise - ks.dot(llt.solve(ks)));
    const double s = std::sqrt(var);
    const double imp = mu - best - kXi;
    if (s < 1e-12) {
      ei[c] = std::max(0.0, imp);
    } else {
      const double z = imp / s;
      ei[c] = imp * normal_cdf(z) + s * normal_pdf(z);
    }
  }
  return ei;
}

}  // namespace

Coefficients optimize_coefficients(
    const std::function<double(double, double)>& objective, std::size_t lambda,
    const OptimizerOptions& options, OptimizerTrace* trace) {
  if (lambda < 1) throw ValidationError("optimize_coefficients needs lambda >= 1");
  if (options.n_opt < 1) throw ValidationError("n_opt must be >= 1");
  if (!(options.grid_step > 0.0 && options.grid_step <= 1.0)) {
    throw ValidationError("grid_step must lie in (0, 1]");
  }
  const auto steps = static_cast<long>(std::lround(1.0 / options.grid_step));

  // Grid over the simplex, one representative per selection cell.
  std::vector<Candidate> cands;
  std::set<std::pair<long, long>> cells;
  auto add_candidate = [&](long i, long j) {
    const Candidate c{static_cast<double>(i) / static_cast<double>(steps),
                      static_cast<double>(j) / static_cast<double>(steps)};
    if (cells.insert(cell_of(c, lambda)).second) cands.push_back(c);
  };
  // Centre and vertices first so the initial design is stable.
  const long third = std::lround(static_cast<double>(steps) / 3.0);
  add_candidate(third, third);
  add_candidate(steps, 0);
  add_candidate(0, steps);
  add_candidate(0, 0);
  const std::size_t n_fixed = cands.size();
  for (long i = 0; i <= steps; ++i) {
    for (long j = 0; i + j <= steps; ++j) add_candidate(i, j);
  }

  std::vector<bool> used(cands.size(), false);
  std::vector<Candidate> xs;
  std::vector<double> ys;
  auto evaluate = [&](std::size_t idx) {
    used[idx] = true;
    xs.push_back(cands[idx]);
    ys.push_back(objective(cands[idx].a, cands[idx].b));
  };

  const std::size_t budget = std::min(options.n_opt, cands.size());
  for (std::size_t i = 0; i < n_fixed && xs.size() < budget; ++i) evaluate(i);

  Rng rng(derive_seed(options.seed, {lambda}));
  const std::size_t n_random = std::min<std::size_t>(2, budget - xs.size());
  for (std::size_t r = 0; r < n_random; ++r) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (!used[i]) free.push_back(i);
    }
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    evaluate(free[pick(rng)]);
  }

  while (xs.size() < budget) {
    const auto ei = expected_improvement(xs, ys, cands);
    std::size_t best = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      if (best == cands.size() || ei[i] > ei[best]) best = i;
    }
    evaluate(best);
  }

  std::size_t arg = 0;
  for (std::size_t i = 1; i < ys.size(); ++i) {
    if (ys[i] > ys[arg]) arg = i;
  }
  if (trace != nullptr) {
    trace->proposals.clear();
    for (const auto& x : xs) trace->proposals.push_back({x.a, x.b, 1.0 - x.a - x.b});
    trace->scores = ys;
  }
  const Candidate& w = xs[arg];
  return {w.a, w.b, std::max(0.0, 1.0 - w.a - w.b)};
}

}  // namespace shelora::server
