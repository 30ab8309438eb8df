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
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "shelora/errors.h"
#include "shelora/server.h"

namespace shelora::server {

namespace {

using Columns = std::vector<std::size_t>;

std::size_t share(double coeff, std::size_t lambda) {
  const double v = std::floor(coeff * static_cast<double>(lambda) + 1e-9);
  return v <= 0.0 ? 0 : std::min(lambda, static_cast<std::size_t>(v));
}

// Appends up to `count` entries of `list` that are not yet in `taken`.
void take_from(const Columns& list, std::size_t count,
               std::unordered_set<std::size_t>& taken, Columns& out) {
  for (std::size_t c : list) {
    if (count == 0) return;
    if (taken.insert(c).second) {
      out.push_back(c);
      --count;
    }
  }
}

struct ColumnStats {
  std::size_t freq = 0;
  std::uint64_t max_code = 0;
};

}  // namespace

void SensitivityBid::validate() const {
  if (columns.size() != codes.size()) {
    throw ValidationError("bid " + std::to_string(client_id) +
                          ": columns and codes differ in length");
  }
  std::unordered_set<std::size_t> seen;
  for (std::size_t c : columns) {
    if (!seen.insert(c).second) {
      throw ValidationError("bid " + std::to_string(client_id) +
                            ": duplicate column " + std::to_string(c));
    }
  }
}

std::string bid_to_json(const SensitivityBid& bid) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < bid.columns.size(); ++i) {
    entries.push_back({bid.columns[i], bid.codes[i].code});
  }
  nlohmann::json j = {{"client_id", bid.client_id},
                      {"r_i", bid.rank},
                      {"k_i", bid.k},
                      {"entries", entries}};
  return j.dump();
}

SensitivityBid bid_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SensitivityBid bid;
    bid.client_id = j.at("client_id").get<std::size_t>();
    bid.rank = j.at("r_i").get<std::size_t>();
    bid.k = j.at("k_i").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 2) {
        throw FormatError("bid entry must be [column, code]");
      }
      bid.columns.push_back(e[0].get<std::size_t>());
      bid.codes.push_back({e[1].get<std::uint64_t>()});
    }
    bid.validate();
    return bid;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed bid: ") + ex.what());
  }
}

std::vector<WeightedSet> weighted_sets(std::span<const SensitivityBid> bids) {
  std::vector<WeightedSet> out;
  out.reserve(bids.size());
  for (const auto& bid : bids) {
    WeightedSet s;
    s.columns = bid.columns;
    for (const auto& code : bid.codes) {
      s.weights.push_back(static_cast<double>(code.code));
    }
    out.push_back(std::move(s));
  }
  return out;
}

ObjectiveTerms objective_terms(std::span<const std::size_t> res,
                               std::span<const WeightedSet> sets) {
  const std::unordered_set<std::size_t> in_res(res.begin(), res.end());
  ObjectiveTerms t;
  for (const auto& s : sets) {
    if (s.columns.empty()) continue;
    std::size_t hit = 0;
    double total = 0.0;
    double exposed = 0.0;
    for (std::size_t i = 0; i < s.columns.size(); ++i) {
      const bool covered = in_res.count(s.columns[i]) > 0;
      hit += covered ? 1 : 0;
      total += s.weights[i];
      if (!covered) exposed += s.weights[i];
    }
    t.coverage = std::min(
        t.coverage,
        static_cast<double>(hit) / static_cast<double>(s.columns.size()));
    if (total > 0.0) t.risk = std::max(t.risk, exposed / total);
  }
  t.score = t.coverage - t.risk;
  return t;
}

double objective_score(std::span<const std::size_t> res,
                       std::span<const WeightedSet> sets) {
  return objective_terms(res, sets).score;
}

std::vector<std::size_t> select_from_lists(const SelectionLists& lists,
                                           std::span<const std::size_t> res,
                                           std::size_t lambda, double a,
                                           double b) {
  std::unordered_set<std::size_t> taken(res.begin(), res.end());
  Columns out;
  const std::size_t na = share(a, lambda);
  const std::size_t nb = std::min(share(b, lambda), lambda - na);
  take_from(lists.clients, na, taken, out);
  take_from(lists.common, nb, taken, out);
  take_from(lists.sensitivity, lambda - out.size(), taken, out);
  return out;
}

NegotiationResult negotiate(std::span<const SensitivityBid> bids,
                            const NegotiationOptions& options) {
  if (bids.empty()) throw ValidationError("negotiate needs at least one bid");
  for (const auto& b : bids) b.validate();

  std::map<std::size_t, ColumnStats> stats;
  for (const auto& b : bids) {
    for (std::size_t i = 0; i < b.columns.size(); ++i) {
      auto& s = stats[b.columns[i]];
      ++s.freq;
      s.max_code = std::max(s.max_code, b.codes[i].code);
    }
  }
  SelectionLists lists;
  for (const auto& [c, s] : stats) lists.common.push_back(c);
  lists.sensitivity = lists.common;
  std::stable_sort(lists.common.begin(), lists.common.end(),
                   [&](std::size_t x, std::size_t y) {
                     const auto& sx = stats[x];
                     const auto& sy = stats[y];
                     if (sx.freq != sy.freq) return sx.freq > sy.freq;
                     return sx.max_code > sy.max_code;
                   });
  std::stable_sort(lists.sensitivity.begin(), lists.sensitivity.end(),
                   [&](std::size_t x, std::size_t y) {
                     return stats[x].max_code > stats[y].max_code;
                   });

  const auto sets = weighted_sets(bids);
  NegotiationResult result;
  for (const auto& b : bids) result.target = std::max(result.target, b.k);

  std::map<std::size_t, std::vector<std::size_t>> groups;  // k -> bid indices
  for (std::size_t i = 0; i < bids.size(); ++i) groups[bids[i].k].push_back(i);

  Columns res;
  for (const auto& [k, members] : groups) {
    if (k <= res.size()) continue;
    const std::size_t lambda = k - res.size();
    GroupRecord rec;
    rec.budget = k;
    rec.lambda = lambda;
    for (std::size_t i : members) rec.client_ids.push_back(bids[i].client_id);

    if (members.size() == 1) {
      const auto& bid = bids[members.front()];
      std::vector<std::size_t> order(bid.columns.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (bid.codes[x] != bid.codes[y]) return bid.codes[x] > bid.codes[y];
        return bid.columns[x] < bid.columns[y];
      });
      Columns own;
      for (std::size_t i : order) own.push_back(bid.columns[i]);
      std::unordered_set<std::size_t> taken(res.begin(), res.end());
      take_from(own, lambda, taken, rec.selected);
      // Topped up from the global ranking when the client's own set is spent.
      take_from(lists.sensitivity, lambda - rec.selected.size(), taken,
                rec.selected);
      rec.coefficients = {1.0, 0.0, 0.0};
    } else {
      std::map<std::size_t, std::uint64_t> min_code;
      for (std::size_t i : members) {
        const auto& bid = bids[i];
        for (std::size_t j = 0; j < bid.columns.size(); ++j) {
          auto [it, fresh] = min_code.emplace(bid.columns[j], bid.codes[j].code);
          if (!fresh) it->second = std::min(it->second, bid.codes[j].code);
        }
      }
      lists.clients.clear();
      for (const auto& [c, code] : min_code) lists.clients.push_back(c);
      std::stable_sort(lists.clients.begin(), lists.clients.end(),
                       [&](std::size_t x, std::size_t y) {
                         return min_code[x] > min_code[y];
                       });
      auto objective = [&](double a, double b) {
        Columns trial = res;
        const auto pick = select_from_lists(lists, res, lambda, a, b);
        trial.insert(trial.end(), pick.begin(), pick.end());
        return objective_score(trial, sets);
      };
      rec.coefficients =
          optimize_coefficients(objective, lambda, options.optimizer);
      rec.selected = select_from_lists(lists, res, lambda, rec.coefficients.a,
                                       rec.coefficients.b);
      result.coefficients = rec.coefficients;
    }
    res.insert(res.end(), rec.selected.begin(), rec.selected.end());
    result.groups.push_back(std::move(rec));
  }

  std::sort(res.begin(), res.end());
  result.res = std::move(res);
  result.shortfall = result.target - result.res.size();
  if (result.shortfall > 0) {
    spdlog::warn("negotiation: budget {} exceeds the {} proposed columns",
                 result.target, result.res.size());
  }
  result.score = objective_score(result.res, sets);
  return result;
}

}  // namespace shelora::server
