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

// End-to-end federated rounds over in-process message passing.
//
// Each round: sensitivity assessment and (re)negotiation when due, local
// training, column swap and selective encryption, uplink, clear and
// encrypted aggregation, SVD slicing and cipher truncation, downlink, and
// reparameterization. Messages cross the client/server boundary in their
// serialized form.

#ifndef SHELORA_ORCHESTRATOR_H_
#define SHELORA_ORCHESTRATOR_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "shelora/client.h"
#include "shelora/config.h"
#include "shelora/server.h"

namespace shelora::orchestrator {

struct PhaseTimes {
  double sensitivity = 0.0;
  double negotiation = 0.0;
  double training = 0.0;
  double encryption = 0.0;
  double aggregation = 0.0;
  double downlink = 0.0;
  double reparameterization = 0.0;
};

struct RoundReport {
  std::size_t round = 0;  // 1-based
  std::string strategy;
  std::optional<double> loss;             // mean eval MSE over clients
  std::vector<std::size_t> k;             // encrypted columns per client
  std::vector<std::size_t> plain_cols;    // clear columns per client
  std::vector<std::size_t> blocks;        // cipher blocks per client
  std::vector<std::size_t> cipher_bytes;  // uplink cipher bytes per client
  std::size_t cipher_bytes_total = 0;
  std::size_t uplink_bytes_total = 0;     // serialized uplink messages
  double coverage = 1.0;                  // min-Coverage on true sensitivities
  double risk = 0.0;                      // max-Risk on true sensitivities
  double negotiation_score = 0.0;         // server-side objective on codes
  bool renegotiated = false;
  std::size_t res_size = 0;
  std::size_t shortfall = 0;
  std::size_t clamped_clients = 0;
  std::optional<double> mi;               // bits, client 0
  PhaseTimes wall_ms;
  std::optional<std::string> error;
};

struct ExperimentResult {
  std::vector<RoundReport> reports;
  // Adapters after the last completed round, original column order.
  std::vector<client::AdapterPair> adapters;
  // B·A of each client right after local training in the last round.
  std::vector<linalg::Matrix> local_updates;
  server::NegotiationResult last_negotiation;
};

// Runs every configured round. A module error ends the run after recording
// it in the failing round's report.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Sensitivity assessment and negotiation of the first round only.
server::NegotiationResult negotiate_only(const ExperimentConfig& config);

// rounds.jsonl and summary.csv depend only on config and seed; wall times go
// to timing.jsonl.
void write_reports(const std::string& dir, const std::vector<RoundReport>& reports);
std::string report_to_json(const RoundReport& report);
std::string negotiation_to_json(const server::NegotiationResult& result);

}  // namespace shelora::orchestrator

#endif  // SHELORA_ORCHESTRATOR_H_
