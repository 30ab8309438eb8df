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

#include "shelora/orchestrator.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "shelora/config.h"
#include "shelora/errors.h"
#include "shelora/he.h"
#include "shelora/toy_task.h"

namespace shelora::orchestrator {
namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_clients = 6;
  c.rounds = 3;
  c.m = 4;
  c.n = 32;
  c.profiles = {{{1, 2, 0.1, 0.0}, 3}, {{2, 4, 0.2, 0.0}, 3}};
  c.n_clusters = 3;
  c.hot_features = 6;
  c.samples_per_client = 20;
  c.eval_samples = 64;
  c.calibration_rows = 8;
  c.chunk_override = 3;
  c.seed = 11;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(DefaultProfiles, TableValues) {
  const auto p = default_profiles();
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0].profile.rank, 8u);
  EXPECT_DOUBLE_EQ(p[0].profile.gamma, 0.004);
  EXPECT_EQ(p[0].count, 20u);
  EXPECT_EQ(p[3].profile.rank, 32u);
  EXPECT_DOUBLE_EQ(p[3].profile.gamma, 0.016);
  EXPECT_EQ(p[3].count, 5u);
  std::size_t total = 0;
  for (const auto& s : p) total += s.count;
  EXPECT_EQ(total, 50u);
}

std::vector<std::size_t> labels_for(std::size_t clusters, std::size_t per) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < clusters; ++c) out.insert(out.end(), per, c);
  return out;
}

TEST(PartitionNoniid, LargeConcentrationIsNearUniform) {
  const auto labels = labels_for(4, 500);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = partition_noniid(labels, 4, 10, 1000.0, seed);
    for (const auto& mix : p.mixes) {
      for (double q : mix) EXPECT_LT(std::abs(q - 0.25), 0.1) << "seed " << seed;
    }
  }
}

TEST(PartitionNoniid, ExhaustiveAndDisjoint) {
  const auto labels = labels_for(3, 37);
  const auto p = partition_noniid(labels, 3, 7, 0.3, 5);
  ASSERT_EQ(p.indices.size(), 7u);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& idx : p.indices) {
    total += idx.size();
    seen.insert(idx.begin(), idx.end());
  }
  EXPECT_EQ(total, labels.size());
  EXPECT_EQ(seen.size(), labels.size());
  EXPECT_EQ(*seen.rbegin(), labels.size() - 1);
}

TEST(PartitionNoniid, SmallConcentrationIsSkewed) {
  const auto labels = labels_for(4, 100);
  int skewed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = partition_noniid(labels, 4, 10, 0.1, seed);
    bool any = false;
    for (const auto& mix : p.mixes) {
      any = any || *std::max_element(mix.begin(), mix.end()) > 0.6;
    }
    skewed += any ? 1 : 0;
  }
  EXPECT_GE(skewed, 16);
}

TEST(PartitionNoniid, DeterministicAndValidated) {
  const auto labels = labels_for(2, 10);
  EXPECT_EQ(partition_noniid(labels, 2, 4, 0.5, 3).indices,
            partition_noniid(labels, 2, 4, 0.5, 3).indices);
  EXPECT_THROW(partition_noniid(labels, 2, 21, 0.5, 3), ValidationError);
  EXPECT_THROW(partition_noniid(labels, 2, 4, 0.0, 3), ValidationError);
}

TEST(Config, JsonRoundTrip) {
  auto c = small_config();
  c.strategy = StrategyKind::kFullEncryptOracle;
  c.negotiation_period = 4;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.strategy, StrategyKind::kFullEncryptOracle);
  EXPECT_EQ(back.profiles.size(), 2u);
  EXPECT_EQ(back.chunk(), 3u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json(R"({"roundz": 3})"), FormatError);
  EXPECT_THROW(config_from_json("{not json"), FormatError);
  EXPECT_THROW(config_from_json(R"({"dirichlet_rho": 0})"), ValidationError);
  EXPECT_THROW(config_from_json(R"({"n_clients": 7})"), ValidationError);
  EXPECT_THROW(parse_strategy_kind("secure"), ValidationError);
}

TEST(Config, ChunkFromSlots) {
  ExperimentConfig c;
  EXPECT_EQ(c.chunk(), 4096u / 32u);
}

TEST(RunExperiment, AccountingAndConservation) {
  const auto cfg = small_config();
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.reports.size(), cfg.rounds);
  const std::size_t block = crypto::ciphertext_bytes(cfg.he);
  for (const auto& r : res.reports) {
    ASSERT_FALSE(r.error.has_value()) << *r.error;
    ASSERT_TRUE(r.loss.has_value());
    EXPECT_TRUE(std::isfinite(*r.loss));
    std::size_t expected_total = 0;
    for (std::size_t i = 0; i < cfg.n_clients; ++i) {
      EXPECT_EQ(r.k[i] + r.plain_cols[i], cfg.n);
      EXPECT_EQ(r.blocks[i], crypto::block_count(r.k[i], cfg.chunk()));
      EXPECT_EQ(r.cipher_bytes[i], r.blocks[i] * block);
      expected_total += (r.k[i] + cfg.chunk() - 1) / cfg.chunk() * block;
    }
    EXPECT_EQ(r.cipher_bytes_total, expected_total);
    EXPECT_GE(r.coverage, 0.0);
    EXPECT_LE(r.risk, 1.0);
  }
}

TEST(RunExperiment, MatchesPlainOracle) {
  auto cfg = small_config();
  cfg.rounds = 10;
  const auto she = run_experiment(cfg);
  cfg.strategy = StrategyKind::kPlainFedAvgOracle;
  const auto plain = run_experiment(cfg);
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    ASSERT_TRUE(she.reports[r].loss && plain.reports[r].loss);
    EXPECT_NEAR(*she.reports[r].loss, *plain.reports[r].loss, 1e-6) << "round " << r + 1;
  }
}

TEST(RunExperiment, SingleClientWithoutEncryption) {
  auto cfg = small_config();
  cfg.n_clients = 1;
  cfg.profiles = {{{1, 4, 0.0, 0.0}, 1}};
  cfg.rounds = 2;
  const auto res = run_experiment(cfg);
  ASSERT_FALSE(res.reports.back().error.has_value());
  EXPECT_EQ(res.reports.back().k[0], 0u);
  EXPECT_EQ(res.reports.back().cipher_bytes_total, 0u);
  const auto after = res.adapters[0].product();
  const auto& local = res.local_updates[0];
  double diff = 0.0;
  for (std::size_t i = 0; i < after.size(); ++i) {
    diff = std::max(diff, std::abs(after.data()[i] - local.data()[i]));
  }
  EXPECT_LT(diff, 1e-8);
}

TEST(RunExperiment, FullEncryptionRatio) {
  auto cfg = small_config();
  cfg.rounds = 1;
  const auto she = run_experiment(cfg);
  cfg.strategy = StrategyKind::kFullEncryptOracle;
  const auto full = run_experiment(cfg);
  const std::size_t chunk = cfg.chunk();
  for (std::size_t i = 0; i < cfg.n_clients; ++i) {
    const auto& s = she.reports[0];
    const auto& f = full.reports[0];
    EXPECT_EQ(f.k[i], cfg.n);
    EXPECT_EQ(s.cipher_bytes[i] * crypto::block_count(cfg.n, chunk),
              f.cipher_bytes[i] * crypto::block_count(s.k[i], chunk));
  }
}

TEST(RunExperiment, ReportsAreByteIdenticalAcrossRuns) {
  const auto cfg = small_config();
  const auto base = std::filesystem::temp_directory_path() / "shelora_orch_test";
  std::filesystem::remove_all(base);
  write_reports((base / "a").string(), run_experiment(cfg).reports);
  write_reports((base / "b").string(), run_experiment(cfg).reports);
  for (const char* f : {"rounds.jsonl", "summary.csv"}) {
    const auto a = slurp(base / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(base / "b" / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(base / "a" / "timing.jsonl"));
  std::filesystem::remove_all(base);
}

TEST(RunExperiment, DefaultTaskLossNonincreasing) {
  constexpr std::size_t kRounds = 20;
  std::vector<std::vector<double>> per_round(kRounds);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg;
    cfg.rounds = kRounds;
    cfg.seed = seed;
    const auto res = run_experiment(cfg);
    for (std::size_t r = 0; r < kRounds; ++r) {
      ASSERT_TRUE(res.reports[r].loss.has_value()) << "seed " << seed;
      per_round[r].push_back(*res.reports[r].loss);
    }
  }
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < kRounds; ++r) {
    auto v = per_round[r];
    std::nth_element(v.begin(), v.begin() + 2, v.end());
    const double median = v[2];
    EXPECT_TRUE(std::isfinite(median));
    EXPECT_LE(median, prev) << "round " << r + 1;
    prev = median;
  }
}

TEST(NegotiateOnly, TargetsLargestBudget) {
  const auto cfg = small_config();
  const auto neg = negotiate_only(cfg);
  EXPECT_EQ(neg.target, sensitivity::budget_columns(cfg.n, 0.2));
  EXPECT_EQ(neg.res.size() + neg.shortfall, neg.target);
  EXPECT_TRUE(std::is_sorted(neg.res.begin(), neg.res.end()));
}

}  // namespace
}  // namespace shelora::orchestrator
