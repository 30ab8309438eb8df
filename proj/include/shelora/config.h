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

// Experiment configuration and its JSON document form.
//
// Every field is optional in the document; missing keys keep the defaults
// below. Unknown keys are rejected so typos do not pass silently.

#ifndef SHELORA_CONFIG_H_
#define SHELORA_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shelora/client.h"
#include "shelora/he.h"

namespace shelora::orchestrator {

struct ProfileSlot {
  client::DeviceProfile profile;
  std::size_t count = 0;
};

// Four device types: ranks 8/16/16/32, budgets 0.4%/0.4%/0.8%/1.6%,
// 20/15/10/5 clients.
std::vector<ProfileSlot> default_profiles();

enum class StrategyKind { kSheLora, kPlainFedAvgOracle, kFullEncryptOracle };

StrategyKind parse_strategy_kind(const std::string& name);
std::string strategy_kind_name(StrategyKind kind);

struct ExperimentConfig {
  std::size_t n_clients = 50;
  std::size_t rounds = 50;
  std::size_t m = 8;
  std::size_t n = 256;
  std::vector<ProfileSlot> profiles = default_profiles();
  double dirichlet_rho = 0.3;
  crypto::HeParams he;
  std::size_t chunk_override = 0;  // 0 = ⌊slots / max(m, max rank)⌋
  std::size_t negotiation_period = 1;
  std::uint64_t seed = 0;
  StrategyKind strategy = StrategyKind::kSheLora;

  // Toy task.
  std::size_t n_clusters = 4;
  std::size_t hot_features = 32;
  double hot_scale = 3.0;
  std::size_t teacher_rank = 2;
  double teacher_scale = 0.3;
  double noise_std = 0.01;
  std::size_t samples_per_client = 40;
  std::size_t eval_samples = 512;
  std::size_t calibration_rows = 32;

  // Local training.
  std::size_t local_steps = 10;
  double lr = 0.02;

  // Server and reporting.
  std::size_t n_opt = 50;
  bool report_mi = false;
  std::size_t workers = 1;

  void validate() const;
  std::size_t max_rank() const;
  // Column slab width shared by every encrypted block of the run.
  std::size_t chunk() const;
  // Profile of each client in id order.
  std::vector<client::DeviceProfile> client_profiles() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

}  // namespace shelora::orchestrator

#endif  // SHELORA_CONFIG_H_
