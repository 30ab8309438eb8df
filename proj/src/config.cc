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

#include "shelora/config.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shelora/errors.h"

namespace shelora::orchestrator {

using nlohmann::json;

std::vector<ProfileSlot> default_profiles() {
  return {
      {{1, 8, 0.004, 0.0}, 20},
      {{2, 16, 0.004, 0.0}, 15},
      {{3, 16, 0.008, 0.0}, 10},
      {{4, 32, 0.016, 0.0}, 5},
  };
}

StrategyKind parse_strategy_kind(const std::string& name) {
  if (name == "she_lora") return StrategyKind::kSheLora;
  if (name == "plain_fedavg_oracle") return StrategyKind::kPlainFedAvgOracle;
  if (name == "full_encrypt_oracle") return StrategyKind::kFullEncryptOracle;
  throw ValidationError("unknown strategy '" + name + "'");
}

std::string strategy_kind_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kSheLora: return "she_lora";
    case StrategyKind::kPlainFedAvgOracle: return "plain_fedavg_oracle";
    case StrategyKind::kFullEncryptOracle: return "full_encrypt_oracle";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  if (profiles.empty()) throw ValidationError("no device profiles");
  std::size_t total = 0;
  for (const auto& p : profiles) {
    p.profile.validate();
    total += p.count;
  }
  if (total != n_clients) {
    throw ValidationError("profile counts sum to " + std::to_string(total) +
                          ", n_clients is " + std::to_string(n_clients));
  }
  if (n_clients == 0) throw ValidationError("n_clients must be >= 1");
  if (m == 0 || n == 0) throw ValidationError("model dims must be positive");
  if (!(dirichlet_rho > 0.0)) throw ValidationError("dirichlet_rho must be > 0");
  if (negotiation_period == 0) {
    throw ValidationError("negotiation_period must be >= 1");
  }
  if (n_clusters == 0) throw ValidationError("n_clusters must be >= 1");
  if (hot_features > n) throw ValidationError("hot_features exceeds n");
  if (calibration_rows == 0) throw ValidationError("calibration_rows must be >= 1");
  if (eval_samples == 0) throw ValidationError("eval_samples must be >= 1");
  if (!(lr >= 0.0)) throw ValidationError("lr must be >= 0");
  if (n_opt == 0) throw ValidationError("n_opt must be >= 1");
  if (workers == 0) throw ValidationError("workers must be >= 1");
  he.validate();
  const std::size_t c = chunk();
  if (c * std::max(m, max_rank()) > he.slots()) {
    throw CapacityError("chunk " + std::to_string(c) + " does not fit " +
                        std::to_string(he.slots()) + " slots");
  }
}

std::size_t ExperimentConfig::max_rank() const {
  std::size_t r = 0;
  for (const auto& p : profiles) r = std::max(r, p.profile.rank);
  return r;
}

std::size_t ExperimentConfig::chunk() const {
  if (chunk_override > 0) return chunk_override;
  return crypto::chunk_width(he, std::max(m, max_rank()));
}

std::vector<client::DeviceProfile> ExperimentConfig::client_profiles() const {
  std::vector<client::DeviceProfile> out;
  for (const auto& p : profiles) {
    for (std::size_t i = 0; i < p.count; ++i) out.push_back(p.profile);
  }
  return out;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "n_clients",     "rounds",          "m",
      "n",             "profiles",        "dirichlet_rho",
      "he",            "chunk",           "negotiation_period",
      "seed",          "strategy",        "n_clusters",
      "hot_features",  "hot_scale",       "teacher_rank",
      "teacher_scale", "noise_std",       "samples_per_client",
      "eval_samples",  "calibration_rows", "local_steps",
      "lr",            "n_opt",           "report_mi",
      "workers"};
  return keys;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (known_keys().count(key) == 0) {
        throw FormatError("unknown config key '" + key + "'");
      }
    }
    read(j, "n_clients", cfg.n_clients);
    read(j, "rounds", cfg.rounds);
    read(j, "m", cfg.m);
    read(j, "n", cfg.n);
    read(j, "dirichlet_rho", cfg.dirichlet_rho);
    read(j, "chunk", cfg.chunk_override);
    read(j, "negotiation_period", cfg.negotiation_period);
    read(j, "seed", cfg.seed);
    read(j, "n_clusters", cfg.n_clusters);
    read(j, "hot_features", cfg.hot_features);
    read(j, "hot_scale", cfg.hot_scale);
    read(j, "teacher_rank", cfg.teacher_rank);
    read(j, "teacher_scale", cfg.teacher_scale);
    read(j, "noise_std", cfg.noise_std);
    read(j, "samples_per_client", cfg.samples_per_client);
    read(j, "eval_samples", cfg.eval_samples);
    read(j, "calibration_rows", cfg.calibration_rows);
    read(j, "local_steps", cfg.local_steps);
    read(j, "lr", cfg.lr);
    read(j, "n_opt", cfg.n_opt);
    read(j, "report_mi", cfg.report_mi);
    read(j, "workers", cfg.workers);
    if (j.contains("strategy")) {
      cfg.strategy = parse_strategy_kind(j.at("strategy").get<std::string>());
    }
    if (j.contains("he")) {
      const json& h = j.at("he");
      read(h, "poly_degree", cfg.he.poly_degree);
      read(h, "moduli_bits", cfg.he.moduli_bits);
      read(h, "noise_epsilon", cfg.he.noise_epsilon);
    }
    if (j.contains("profiles")) {
      cfg.profiles.clear();
      for (const json& p : j.at("profiles")) {
        ProfileSlot slot;
        slot.profile.type_id = p.at("type").get<int>();
        slot.profile.rank = p.at("rank").get<std::size_t>();
        slot.profile.gamma = p.at("gamma").get<double>();
        read(p, "gflops", slot.profile.gflops);
        slot.count = p.at("count").get<std::size_t>();
        cfg.profiles.push_back(slot);
      }
      if (!j.contains("n_clients")) {
        cfg.n_clients = 0;
        for (const auto& p : cfg.profiles) cfg.n_clients += p.count;
      }
    }
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed config: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json profiles = json::array();
  for (const auto& p : cfg.profiles) {
    profiles.push_back({{"type", p.profile.type_id},
                        {"rank", p.profile.rank},
                        {"gamma", p.profile.gamma},
                        {"gflops", p.profile.gflops},
                        {"count", p.count}});
  }
  json j = {
      {"n_clients", cfg.n_clients},
      {"rounds", cfg.rounds},
      {"m", cfg.m},
      {"n", cfg.n},
      {"profiles", profiles},
      {"dirichlet_rho", cfg.dirichlet_rho},
      {"he",
       {{"poly_degree", cfg.he.poly_degree},
        {"moduli_bits", cfg.he.moduli_bits},
        {"noise_epsilon", cfg.he.noise_epsilon}}},
      {"chunk", cfg.chunk_override},
      {"negotiation_period", cfg.negotiation_period},
      {"seed", cfg.seed},
      {"strategy", strategy_kind_name(cfg.strategy)},
      {"n_clusters", cfg.n_clusters},
      {"hot_features", cfg.hot_features},
      {"hot_scale", cfg.hot_scale},
      {"teacher_rank", cfg.teacher_rank},
      {"teacher_scale", cfg.teacher_scale},
      {"noise_std", cfg.noise_std},
      {"samples_per_client", cfg.samples_per_client},
      {"eval_samples", cfg.eval_samples},
      {"calibration_rows", cfg.calibration_rows},
      {"local_steps", cfg.local_steps},
      {"lr", cfg.lr},
      {"n_opt", cfg.n_opt},
      {"report_mi", cfg.report_mi},
      {"workers", cfg.workers},
  };
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace shelora::orchestrator
