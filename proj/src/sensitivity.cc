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

#include "shelora/sensitivity.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shelora/errors.h"

namespace shelora::sensitivity {

namespace {

std::vector<double> column_norms(const Matrix& x) {
  std::vector<double> norms(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) norms[c] += x(r, c) * x(r, c);
  }
  for (double& v : norms) v = std::sqrt(v);
  return norms;
}

void check_shapes(const Matrix& w, const Matrix& x) {
  if (w.cols() != x.cols()) {
    throw ShapeError("weights have " + std::to_string(w.cols()) +
                     " columns but calibration input has " +
                     std::to_string(x.cols()));
  }
}

}  // namespace

Matrix wanda_scores(const Matrix& w, const Matrix& x) {
  check_shapes(w, x);
  const std::vector<double> norms = column_norms(x);
  Matrix out(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      out(i, j) = std::abs(w(i, j)) * norms[j];
    }
  }
  return out;
}

ChannelScores channel_importance(const Matrix& w, const Matrix& x) {
  const Matrix s = wanda_scores(w, x);
  ChannelScores out{std::vector<double>(w.cols(), 0.0)};
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) out.scores[j] += s(i, j);
  }
  return out;
}

std::size_t budget_columns(std::size_t n, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ValidationError("encryption budget ratio must lie in [0, 1], got " +
                          std::to_string(gamma));
  }
  const double exact = static_cast<double>(n) * gamma;
  const auto k = static_cast<std::size_t>(std::floor(exact + 1e-9));
  return std::min(k, n);
}

SubsetSelection select_subset(const ChannelScores& scores, double gamma) {
  SubsetSelection out;
  out.gamma = gamma;
  out.k = budget_columns(scores.n(), gamma);
  std::vector<std::size_t> order(scores.n());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.scores[a] > scores.scores[b];
  });
  out.columns.assign(order.begin(), order.begin() + static_cast<long>(out.k));
  return out;
}

}  // namespace shelora::sensitivity
