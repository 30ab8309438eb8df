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

// Wanda-style sensitivity of adapter weights and the per-client choice of
// which columns (channels) to encrypt.

#ifndef SHELORA_SENSITIVITY_H_
#define SHELORA_SENSITIVITY_H_

#include <cstddef>
#include <vector>

#include "shelora/linalg.h"

namespace shelora::sensitivity {

using linalg::Matrix;

struct ChannelScores {
  std::vector<double> scores;  // one nonnegative importance per column

  std::size_t n() const { return scores.size(); }
};

struct SubsetSelection {
  std::vector<std::size_t> columns;  // descending importance
  std::size_t k = 0;
  double gamma = 0.0;
};

// out[i][j] = |w[i][j]| · ‖x[:, j]‖₂.
Matrix wanda_scores(const Matrix& w, const Matrix& x);

// Column sums of wanda_scores.
ChannelScores channel_importance(const Matrix& w, const Matrix& x);

// ⌊n·γ⌋, tolerant of the representation error in products such as 3·(2/3).
std::size_t budget_columns(std::size_t n, double gamma);

// Top-⌊n·γ⌋ columns by score; equal scores resolve to the lower index.
SubsetSelection select_subset(const ChannelScores& scores, double gamma);

}  // namespace shelora::sensitivity

#endif  // SHELORA_SENSITIVITY_H_
