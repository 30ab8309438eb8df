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
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "shelora/errors.h"
#include "shelora/metrics.h"
#include "shelora/random.h"
#include "shelora/sensitivity.h"
#include "shelora/toy_task.h"
#include "shelora/wire.h"

namespace shelora::orchestrator {

namespace {

using Clock = std::chrono::steady_clock;
using linalg::Matrix;
using ojson = nlohmann::ordered_json;

enum SeedTag : std::uint64_t {
  kTaskSeed = 1,
  kLabelSeed,
  kPartitionSeed,
  kSampleSeed,
  kCalibrationSeed,
  kInitSeed,
  kEvalSeed,
  kHeSeed,
  kOpeSeed,
  kNegotiationSeed,
  kMiSeed,
};

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Runs fn(i) for every client. Results must be written to per-index slots;
// the first failure by client index is rethrown.
template <typename Fn>
void for_each_client(std::size_t count, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  const std::size_t n_threads = std::min(workers, count);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += n_threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct ClientState {
  client::DeviceProfile profile;
  client::AdapterPair adapter;
  client::LocalDataset data;
  Matrix calibration;  // L × n
  sensitivity::ChannelScores scores;
  server::SensitivityBid bid;
};

struct World {
  ExperimentConfig cfg;
  ToyTask task;
  std::vector<ClientState> clients;
  client::LocalDataset eval;
  crypto::SimulatedBackend backend;
  crypto::KeyPair keys;
  crypto::OpeKey ope;
  std::size_t chunk = 0;
};

World build_world(const ExperimentConfig& cfg) {
  cfg.validate();
  World w;
  w.cfg = cfg;
  const std::uint64_t seed = cfg.seed;
  ToyTaskSpec spec;
  spec.m = cfg.m;
  spec.n = cfg.n;
  spec.n_clusters = cfg.n_clusters;
  spec.hot_features = cfg.hot_features;
  spec.hot_scale = cfg.hot_scale;
  spec.teacher_rank = cfg.teacher_rank;
  spec.teacher_scale = cfg.teacher_scale;
  spec.noise_std = cfg.noise_std;
  w.task = make_toy_task(spec, derive_seed(seed, {kTaskSeed}));

  const std::size_t total = cfg.samples_per_client * cfg.n_clients;
  const std::vector<double> uniform(cfg.n_clusters, 1.0);
  Rng label_rng(derive_seed(seed, {kLabelSeed}));
  const auto labels = draw_clusters(uniform, total, label_rng);
  const auto part = partition_noniid(labels, cfg.n_clusters, cfg.n_clients,
                                     cfg.dirichlet_rho,
                                     derive_seed(seed, {kPartitionSeed}));
  Rng sample_rng(derive_seed(seed, {kSampleSeed}));
  const auto all = sample_dataset(w.task, labels, sample_rng);

  Rng eval_rng(derive_seed(seed, {kEvalSeed}));
  const auto eval_labels = draw_clusters(uniform, cfg.eval_samples, eval_rng);
  w.eval = sample_dataset(w.task, eval_labels, eval_rng);

  const auto profiles = cfg.client_profiles();
  w.clients.resize(cfg.n_clients);
  for (std::size_t i = 0; i < cfg.n_clients; ++i) {
    auto& c = w.clients[i];
    c.profile = profiles[i];
    c.adapter = client::init_adapter(cfg.m, cfg.n, c.profile.rank,
                                     derive_seed(seed, {kInitSeed, i}));
    const auto& idx = part.indices[i];
    c.data = {Matrix(idx.size(), cfg.n), Matrix(idx.size(), cfg.m)};
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy(all.x.row(idx[r]).begin(), all.x.row(idx[r]).end(),
                c.data.x.row(r).begin());
      std::copy(all.y.row(idx[r]).begin(), all.y.row(idx[r]).end(),
                c.data.y.row(r).begin());
    }
    Rng calib_rng(derive_seed(seed, {kCalibrationSeed, i}));
    const auto calib_labels =
        draw_clusters(part.mixes[i], cfg.calibration_rows, calib_rng);
    c.calibration = sample_dataset(w.task, calib_labels, calib_rng).x;
  }

  w.keys = w.backend.keygen(cfg.he, derive_seed(seed, {kHeSeed}));
  w.ope.seed = derive_seed(seed, {kOpeSeed});
  w.chunk = cfg.chunk();
  return w;
}

server::WeightedSet true_set(const ClientState& c) {
  server::WeightedSet s;
  s.columns = c.bid.columns;
  for (std::size_t col : c.bid.columns) s.weights.push_back(c.scores.scores[col]);
  return s;
}

void assess_sensitivity(World& w) {
  for_each_client(w.clients.size(), w.cfg.workers, [&](std::size_t i) {
    auto& c = w.clients[i];
    c.scores = sensitivity::channel_importance(c.adapter.a, c.calibration);
    c.bid = client::build_bid(i, c.scores, c.profile, w.ope);
  });
}

// Bids travel as JSON text.
server::NegotiationResult run_negotiation(const World& w, std::size_t round) {
  const auto& cfg = w.cfg;
  std::vector<server::SensitivityBid> received;
  received.reserve(w.clients.size());
  for (const auto& c : w.clients) {
    received.push_back(server::bid_from_json(server::bid_to_json(c.bid)));
  }
  server::NegotiationOptions opts;
  opts.optimizer.n_opt = cfg.n_opt;
  opts.optimizer.seed = derive_seed(cfg.seed, {kNegotiationSeed, round});
  return server::negotiate(received, opts);
}

// Per-column means over the clear-side and encrypted-side contributors, in
// permuted coordinates.
struct OracleMeans {
  Matrix plain;
  Matrix cipher;
};

OracleMeans oracle_means(const std::vector<Matrix>& deltas,
                         const std::vector<std::size_t>& ks, std::size_t n) {
  const std::size_t m = deltas.front().rows();
  OracleMeans out{Matrix(m, n), Matrix(m, n)};
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t np = 0;
    std::size_t nc = 0;
    for (std::size_t j = 0; j < deltas.size(); ++j) {
      Matrix& dst = p < n - ks[j] ? out.plain : out.cipher;
      (p < n - ks[j] ? np : nc) += 1;
      for (std::size_t r = 0; r < m; ++r) dst(r, p) += deltas[j](r, p);
    }
    for (std::size_t r = 0; r < m; ++r) {
      if (np > 0) out.plain(r, p) *= 1.0 / static_cast<double>(np);
      if (nc > 0) out.cipher(r, p) *= 1.0 / static_cast<double>(nc);
    }
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  World w = build_world(config);
  const auto& cfg = w.cfg;
  const std::size_t n = cfg.n;
  const std::size_t n_clients = cfg.n_clients;
  const std::string strategy = strategy_kind_name(cfg.strategy);
  const bool full = cfg.strategy == StrategyKind::kFullEncryptOracle;
  const bool oracle = cfg.strategy == StrategyKind::kPlainFedAvgOracle;
  const auto params = w.keys.public_key.params;

  ExperimentResult result;
  server::NegotiationResult neg;
  client::SwapPlan plan = client::make_swap_plan(n, {});
  std::vector<std::size_t> ks(n_clients, 0);
  if (full) {
    neg.res.resize(n);
    std::iota(neg.res.begin(), neg.res.end(), 0);
    neg.target = n;
    neg.score = 1.0;
    plan = client::make_swap_plan(n, neg.res);
    std::fill(ks.begin(), ks.end(), n);
  }

  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    RoundReport rep;
    rep.round = round;
    rep.strategy = strategy;
    try {
      // Sensitivity assessment and negotiation.
      if (!full && (round - 1) % cfg.negotiation_period == 0) {
        auto t0 = Clock::now();
        assess_sensitivity(w);
        rep.wall_ms.sensitivity = ms_since(t0);
        auto t1 = Clock::now();
        neg = run_negotiation(w, round);
        rep.wall_ms.negotiation = ms_since(t1);
        rep.renegotiated = true;
        plan = client::make_swap_plan(n, neg.res);
        for (std::size_t i = 0; i < n_clients; ++i) {
          ks[i] = std::min(w.clients[i].bid.k, neg.res.size());
        }
      }
      rep.res_size = neg.res.size();
      rep.shortfall = neg.shortfall;
      rep.negotiation_score = neg.score;
      if (!full) {
        std::vector<server::WeightedSet> sets;
        for (const auto& c : w.clients) sets.push_back(true_set(c));
        const auto terms = server::objective_terms(neg.res, sets);
        rep.coverage = terms.coverage;
        rep.risk = terms.risk;
      }

      // Local training.
      auto t_train = Clock::now();
      result.local_updates.assign(n_clients, Matrix());
      for_each_client(n_clients, cfg.workers, [&](std::size_t i) {
        auto& c = w.clients[i];
        c.adapter = client::local_train(c.adapter, w.task.w0, c.data,
                                        cfg.local_steps, cfg.lr);
        result.local_updates[i] = c.adapter.product();
      });
      rep.wall_ms.training = ms_since(t_train);

      rep.k = ks;
      rep.plain_cols.resize(n_clients);
      rep.blocks.assign(n_clients, 0);
      rep.cipher_bytes.assign(n_clients, 0);
      for (std::size_t i = 0; i < n_clients; ++i) rep.plain_cols[i] = n - ks[i];

      std::vector<client::ReparamResult> fresh(n_clients);
      if (oracle) {
        auto t_agg = Clock::now();
        std::vector<Matrix> deltas(n_clients);
        for (std::size_t i = 0; i < n_clients; ++i) {
          deltas[i] = linalg::permute_cols(result.local_updates[i], plan.perm);
        }
        const auto means = oracle_means(deltas, ks, n);
        rep.wall_ms.aggregation = ms_since(t_agg);
        auto t_rep = Clock::now();
        for_each_client(n_clients, cfg.workers, [&](std::size_t i) {
          Matrix target(cfg.m, n);
          for (std::size_t r = 0; r < cfg.m; ++r) {
            for (std::size_t p = 0; p < n; ++p) {
              target(r, p) = p < n - ks[i] ? means.plain(r, p) : means.cipher(r, p);
            }
          }
          fresh[i] = client::refactor_update(target, plan,
                                             w.clients[i].profile.rank);
        });
        rep.wall_ms.reparameterization = ms_since(t_rep);
      } else {
        // Swap, encrypt and serialize the uplink.
        auto t_enc = Clock::now();
        std::vector<std::vector<std::uint8_t>> uplink(n_clients);
        for_each_client(n_clients, cfg.workers, [&](std::size_t i) {
          const auto swapped = client::apply_swap(w.clients[i].adapter, plan);
          auto upd = client::encrypt_update(swapped, ks[i], w.backend,
                                            w.keys.public_key, w.chunk);
          upd.client_id = i;
          upd.round = round;
          uplink[i] = client::serialize_update(upd, w.backend);
        });
        rep.wall_ms.encryption = ms_since(t_enc);

        // Server: parse in client order and aggregate.
        auto t_agg = Clock::now();
        std::vector<Matrix> plain_deltas;
        std::vector<crypto::CipherBlockList> cipher_deltas;
        std::vector<std::size_t> ranks;
        for (std::size_t i = 0; i < n_clients; ++i) {
          rep.uplink_bytes_total += uplink[i].size();
          const auto upd = client::deserialize_update(uplink[i], w.backend, params);
          rep.blocks[i] = upd.cipher.blocks.size();
          rep.cipher_bytes[i] = upd.cipher.byte_size();
          rep.cipher_bytes_total += rep.cipher_bytes[i];
          plain_deltas.push_back(linalg::matmul(upd.b_plain, upd.a_plain));
          if (upd.k > 0) {
            cipher_deltas.push_back(
                server::apply_plain_matmul(w.backend, upd.b_plain, upd.cipher));
          }
          ranks.push_back(upd.rank);
        }
        const auto agg_plain = server::aggregate_plain(plain_deltas);
        server::AggregatedCipher agg_cipher;
        agg_cipher.blocks.rows = cfg.m;
        agg_cipher.blocks.total_cols = n;
        agg_cipher.blocks.chunk = w.chunk;
        if (!cipher_deltas.empty()) {
          agg_cipher = server::aggregate_cipher(w.backend, cipher_deltas);
        }
        rep.wall_ms.aggregation = ms_since(t_agg);

        auto t_down = Clock::now();
        const auto slices = server::svd_and_slice(agg_plain, ranks);
        std::vector<std::vector<std::uint8_t>> downlink(n_clients);
        for (std::size_t i = 0; i < n_clients; ++i) {
          server::Downlink d{slices[i],
                             server::truncate_cipher(w.backend, agg_cipher, ks[i])};
          downlink[i] = server::serialize_downlink(d, w.backend);
        }
        rep.wall_ms.downlink = ms_since(t_down);

        auto t_rep = Clock::now();
        for_each_client(n_clients, cfg.workers, [&](std::size_t i) {
          const auto d = server::deserialize_downlink(downlink[i], w.backend, params);
          fresh[i] = client::reparameterize(d.plain, d.cipher, w.backend,
                                            w.keys.secret_key, plan, ks[i],
                                            w.clients[i].profile.rank);
        });
        rep.wall_ms.reparameterization = ms_since(t_rep);
      }

      if (cfg.report_mi) {
        const auto swapped = client::apply_swap(w.clients[0].adapter, plan);
        Matrix visible = swapped.a;
        for (std::size_t r = 0; r < visible.rows(); ++r) {
          for (std::size_t p = n - ks[0]; p < n; ++p) visible(r, p) = 0.0;
        }
        metrics::MiOptions mo;
        mo.seed = derive_seed(cfg.seed, {kMiSeed, round});
        rep.mi = metrics::kde_mutual_info(swapped.a.data(), visible.data(), mo).value;
      }

      double loss = 0.0;
      for (std::size_t i = 0; i < n_clients; ++i) {
        w.clients[i].adapter = fresh[i].adapter;
        if (fresh[i].clamped) ++rep.clamped_clients;
        loss += client::mse_loss(w.task.w0, w.clients[i].adapter, w.eval);
      }
      rep.loss = loss / static_cast<double>(n_clients);
      spdlog::info("round {}/{} [{}] loss {:.6g} cipher bytes {}", round,
                   cfg.rounds, strategy, *rep.loss, rep.cipher_bytes_total);
    } catch (const Error& e) {
      rep.error = e.what();
      spdlog::error("round {} aborted: {}", round, e.what());
      result.reports.push_back(std::move(rep));
      break;
    }
    result.reports.push_back(std::move(rep));
  }

  for (const auto& c : w.clients) result.adapters.push_back(c.adapter);
  result.last_negotiation = neg;
  return result;
}

server::NegotiationResult negotiate_only(const ExperimentConfig& config) {
  World w = build_world(config);
  assess_sensitivity(w);
  return run_negotiation(w, 1);
}

std::string report_to_json(const RoundReport& r) {
  ojson j;
  j["round"] = r.round;
  j["strategy"] = r.strategy;
  j["loss"] = r.loss ? ojson(*r.loss) : ojson(nullptr);
  j["cipher_bytes_total"] = r.cipher_bytes_total;
  j["uplink_bytes_total"] = r.uplink_bytes_total;
  j["cipher_bytes"] = r.cipher_bytes;
  j["blocks"] = r.blocks;
  j["k"] = r.k;
  j["plain_cols"] = r.plain_cols;
  j["coverage"] = r.coverage;
  j["risk"] = r.risk;
  j["negotiation_score"] = r.negotiation_score;
  j["renegotiated"] = r.renegotiated;
  j["res_size"] = r.res_size;
  j["shortfall"] = r.shortfall;
  j["clamped_clients"] = r.clamped_clients;
  j["mi_bits"] = r.mi ? ojson(*r.mi) : ojson(nullptr);
  j["error"] = r.error ? ojson(*r.error) : ojson(nullptr);
  return j.dump();
}

std::string negotiation_to_json(const server::NegotiationResult& result) {
  ojson groups = ojson::array();
  for (const auto& g : result.groups) {
    groups.push_back({{"budget", g.budget},
                      {"clients", g.client_ids},
                      {"lambda", g.lambda},
                      {"coefficients", {g.coefficients.a, g.coefficients.b,
                                        g.coefficients.c}},
                      {"selected", g.selected}});
  }
  ojson j;
  j["res"] = result.res;
  j["coefficients"] = {result.coefficients.a, result.coefficients.b,
                       result.coefficients.c};
  j["score"] = result.score;
  j["target"] = result.target;
  j["shortfall"] = result.shortfall;
  j["groups"] = groups;
  return j.dump(2);
}

void write_reports(const std::string& dir, const std::vector<RoundReport>& reports) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  std::ofstream rounds(base / "rounds.jsonl");
  std::ofstream summary(base / "summary.csv");
  std::ofstream timing(base / "timing.jsonl");
  if (!rounds || !summary || !timing) {
    throw FormatError("cannot write reports to " + dir);
  }
  summary << "round,strategy,loss,cipher_bytes_total,coverage,risk,"
             "negotiation_score,res_size,error\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    rounds << report_to_json(r) << '\n';
    summary << r.round << ',' << r.strategy << ','
            << (r.loss ? num(*r.loss) : std::string()) << ','
            << r.cipher_bytes_total << ',' << num(r.coverage) << ','
            << num(r.risk) << ',' << num(r.negotiation_score) << ','
            << r.res_size << ',' << (r.error ? "error" : "") << '\n';
    ojson t;
    t["round"] = r.round;
    t["wall_ms"] = {{"sensitivity", r.wall_ms.sensitivity},
                    {"negotiation", r.wall_ms.negotiation},
                    {"training", r.wall_ms.training},
                    {"encryption", r.wall_ms.encryption},
                    {"aggregation", r.wall_ms.aggregation},
                    {"downlink", r.wall_ms.downlink},
                    {"reparameterization", r.wall_ms.reparameterization}};
    timing << t.dump() << '\n';
  }
}

}  // namespace shelora::orchestrator
