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

// shelora command line; the subcommands are listed in the README. Log level
// comes from SHELORA_LOG (trace, debug, info, warn, error, off); the default
// is warn. Logs go to stderr.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "shelora/config.h"
#include "shelora/errors.h"
#include "shelora/linalg.h"
#include "shelora/metrics.h"
#include "shelora/orchestrator.h"
#include "shelora/sensitivity.h"

namespace {

using namespace shelora;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("shelora");
  spdlog::set_default_logger(logger);
  const char* level = std::getenv("SHELORA_LOG");
  spdlog::set_level(level != nullptr ? spdlog::level::from_str(level)
                                     : spdlog::level::warn);
}

orchestrator::ExperimentConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    orchestrator::ExperimentConfig cfg;
    cfg.validate();
    return cfg;
  }
  return orchestrator::load_config(path);
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& strategy, const std::string& out) {
  auto cfg = orchestrator::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (!strategy.empty()) cfg.strategy = orchestrator::parse_strategy_kind(strategy);
  cfg.validate();
  const auto result = orchestrator::run_experiment(cfg);
  orchestrator::write_reports(out, result.reports);
  const auto& last = result.reports.back();
  if (last.error) {
    std::cerr << "round " << last.round << " failed: " << *last.error << "\n";
    return 1;
  }
  std::cout << "completed " << result.reports.size() << " rounds, final loss "
            << *last.loss << ", reports in " << out << "\n";
  return 0;
}

int cmd_negotiate(const std::string& config_path) {
  const auto cfg = config_or_default(config_path);
  std::cout << orchestrator::negotiation_to_json(orchestrator::negotiate_only(cfg))
            << "\n";
  return 0;
}

int cmd_metrics(const std::string& curve, const std::vector<double>& gammas,
                const std::string& matrix_path, std::size_t rows,
                std::size_t cols, std::size_t heavy, std::uint64_t seed) {
  const auto strategy = metrics::parse_strategy(curve);
  const linalg::Matrix w =
      matrix_path.empty()
          ? metrics::planted_heavy_matrix(rows, cols, heavy, 4.0, seed)
          : linalg::load_csv(matrix_path);
  // Channel importance against an identity calibration batch is the column
  // sum of |W|.
  const auto scores = sensitivity::channel_importance(
      w, linalg::Matrix::identity(w.cols()));
  metrics::MiOptions opts;
  opts.seed = seed;
  const auto points = metrics::leakage_curve(w, scores, strategy, gammas, opts, seed);
  std::cout << "gamma,masked_columns,mi_bits\n";
  for (const auto& p : points) {
    std::cout << p.gamma << ',' << p.masked << ',' << p.mi << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Selective-HE federated LoRA simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string out = "shelora_out";
  auto* run = app.add_subcommand("run", "Run a federated experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the root seed");
  run->add_option("--strategy", strategy,
                  "she_lora | plain_fedavg_oracle | full_encrypt_oracle")
      ->check(CLI::IsMember({"she_lora", "plain_fedavg_oracle",
                             "full_encrypt_oracle"}));
  run->add_option("--out", out, "Report directory")->capture_default_str();

  std::string neg_config;
  auto* neg = app.add_subcommand("negotiate-only",
                                 "Negotiate the first round and print the result");
  neg->add_option("--config", neg_config, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);

  std::string curve;
  std::vector<double> gammas;
  std::string matrix_path;
  std::size_t rows = 16;
  std::size_t cols = 64;
  std::size_t heavy = 5;
  std::uint64_t metric_seed = 0;
  auto* met = app.add_subcommand("metrics", "Emit a leakage curve as CSV");
  met->add_option("--curve", curve, "max | min | random")
      ->required()
      ->check(CLI::IsMember({"max", "min", "random"}));
  met->add_option("--gammas", gammas, "Ascending encryption ratios")
      ->required()
      ->delimiter(',');
  met->add_option("--matrix", matrix_path, "Weight matrix CSV (default: planted)")
      ->check(CLI::ExistingFile);
  met->add_option("--rows", rows, "Planted matrix rows")->capture_default_str();
  met->add_option("--cols", cols, "Planted matrix columns")->capture_default_str();
  met->add_option("--heavy", heavy, "Planted heavy columns")->capture_default_str();
  met->add_option("--seed", metric_seed, "Seed")->capture_default_str();

  auto* def = app.add_subcommand("default-config", "Print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed, strategy, out);
    if (*neg) return cmd_negotiate(neg_config);
    if (*met) {
      return cmd_metrics(curve, gammas, matrix_path, rows, cols, heavy, metric_seed);
    }
    if (*def) {
      std::cout << orchestrator::config_to_json(orchestrator::ExperimentConfig{});
      return 0;
    }
  } catch (const shelora::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
