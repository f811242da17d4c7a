#include "fedsim/federation.hpp"

#include <cstdint>
#include <cstdio>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;      // "init"
constexpr std::uint64_t kPretrainStream = 0x70726574;  // "pret"

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void FederationConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds", "rounds must be >= 1");
  if (local_epochs < 1) throw ConfigError("local_epochs", "local_epochs must be >= 1");
  if (client_count < 1) throw ConfigError("client_count", "client_count must be >= 1");
  if (pretrain_epochs < 1) throw ConfigError("pretrain_epochs", "pretrain_epochs must be >= 1");
  if (pretrain_target_accuracy && !(*pretrain_target_accuracy >= 0.0 && *pretrain_target_accuracy <= 1.0)) {
    throw ConfigError("pretrain_target_accuracy", "pretrain_target_accuracy must lie in [0, 1]");
  }
  for (const auto& [id, spec] : attack_assignments) {
    if (id < 0 || static_cast<std::size_t>(id) >= client_count) {
      throw ConfigError("client." + std::to_string(id), "attack assigned to client " + std::to_string(id) +
                                                            " but client_count is " + std::to_string(client_count));
    }
    spec.validate();
  }
  TrainConfig t = train_cfg;
  t.epochs = local_epochs;
  t.validate();
  if (pretrain_learning_rate && !(*pretrain_learning_rate > 0.0)) {
    throw ConfigError("pretrain_learning_rate", "pretrain_learning_rate must be positive");
  }
}

std::vector<std::size_t> FederationConfig::architecture(std::size_t input_dim, std::size_t classes) const {
  std::vector<std::size_t> arch{input_dim};
  arch.insert(arch.end(), hidden_layers.begin(), hidden_layers.end());
  arch.push_back(classes);
  return arch;
}

std::uint64_t client_seed(std::uint64_t master_seed, int client_id, std::size_t round_idx) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(client_id), round_idx);
}

PretrainResult pretrain(const Dataset& subset0, const Dataset& test, const FederationConfig& cfg, const LogFn& log) {
  if (subset0.empty()) throw InvalidInput("pretrain: subset is empty");
  const auto arch = cfg.architecture(subset0.dim(), subset0.class_count);
  ModelParams params = init_params(arch, derive_seed(cfg.master_seed, kInitStream));

  PretrainResult best{params, -1.0, 0, false};
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    TrainConfig t = cfg.train_cfg;
    t.epochs = 1;
    t.learning_rate = cfg.pretrain_learning_rate.value_or(cfg.train_cfg.learning_rate);
    t.seed = derive_seed(cfg.master_seed, kPretrainStream, epoch);
    params = train_local(params, subset0, t);
    const double acc = evaluate(params, test).accuracy;
    if (log) log("pretrain epoch " + std::to_string(epoch + 1) + ": test accuracy " + fmt4(acc));
    if (!cfg.pretrain_target_accuracy) {
      best = {params, acc, epoch + 1, true};
      continue;
    }
    if (acc > best.accuracy) best = {params, acc, epoch + 1, false};
    if (acc >= *cfg.pretrain_target_accuracy) {
      best = {params, acc, epoch + 1, true};
      break;
    }
  }
  if (!best.reached_target && log) {
    log("warning: pretraining stopped at " + fmt4(best.accuracy) + " below target " +
        fmt4(*cfg.pretrain_target_accuracy) + " after " + std::to_string(cfg.pretrain_epochs) + " epochs");
  }
  return best;
}

RoundResult run_round(const ModelParams& global, std::span<const ClientData> clients, const ServerOptState& state,
                      const FederationConfig& cfg, std::size_t round_idx) {
  if (clients.empty()) throw InvalidInput("run_round: no clients");
  std::vector<ClientUpdate> updates(clients.size());
  const auto count = static_cast<std::int64_t>(clients.size());
  // One client per iteration; the kernels inside run serially here because
  // nested parallelism is off.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t sc = 0; sc < count; ++sc) {
    const auto c = static_cast<std::size_t>(sc);
    const int id = static_cast<int>(c);
    TrainConfig t = cfg.train_cfg;
    t.epochs = cfg.local_epochs;
    t.seed = client_seed(cfg.master_seed, id, round_idx);
    ClientUpdate u{id, train_local(global, clients[c].data, t), clients[c].data.size()};
    updates[c] = inflate_report(u, clients[c].attack.weight_multiplier);
  }

  RoundResult result{global, state, std::move(updates), std::nullopt};
  switch (cfg.strategy) {
    case Strategy::fedbayes: {
      result.fedbayes = fedbayes_aggregate_detailed(global, result.updates);
      result.global = result.fedbayes->params;
      break;
    }
    case Strategy::fedavg: result.global = fedavg_aggregate(result.updates); break;
    default: {
      auto [next, next_state] = server_opt_step(state, global, result.updates);
      result.global = std::move(next);
      result.state = std::move(next_state);
      break;
    }
  }
  return result;
}

double attack_success_rate(const ModelParams& params, const TriggeredTestSet& test) {
  const auto pred = predict(params, test.data.features);
  std::size_t eligible = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!test.triggered[i] || test.data.labels[i] == test.target_label) continue;
    ++eligible;
    if (pred[i] == test.target_label) ++hits;
  }
  return eligible == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(eligible);
}

ExperimentResult run_experiment(const FederationConfig& cfg, std::span<const Dataset> partitions,
                                const Dataset& clean_test, const std::optional<TriggeredTestSet>& triggered_test,
                                const LogFn& log) {
  cfg.validate();
  if (partitions.size() != cfg.client_count + 1) {
    throw InvalidInput("run_experiment: expected " + std::to_string(cfg.client_count + 1) + " partitions, got " +
                       std::to_string(partitions.size()));
  }
  bool has_backdoor = false;
  for (const auto& [id, spec] : cfg.attack_assignments) has_backdoor |= spec.kind == AttackKind::backdoor;
  if (has_backdoor && !triggered_test) {
    throw ConfigError("triggered_test", "a backdoor attack is assigned but no triggered test set was provided");
  }

  std::vector<ClientData> clients;
  clients.reserve(cfg.client_count);
  for (std::size_t k = 0; k < cfg.client_count; ++k) {
    AttackSpec spec;
    if (auto it = cfg.attack_assignments.find(static_cast<int>(k)); it != cfg.attack_assignments.end()) {
      spec = it->second;
    }
    clients.push_back({apply_attack(partitions[k + 1], spec), spec});
    if (spec.kind != AttackKind::none && log) {
      log("client " + std::to_string(k) + ": " + to_string(spec.kind) + " fraction " + fmt4(spec.fraction) +
          " target " + std::to_string(spec.target_label) + " weight x" + fmt4(spec.weight_multiplier));
    }
  }

  ExperimentResult result;
  result.pretrain = pretrain(partitions[0], clean_test, cfg, log);
  ModelParams global = result.pretrain.params;
  ServerOptState state = init_server_state(cfg.strategy, cfg.server, global);

  auto measure = [&](std::size_t round, const ModelParams& model, std::vector<double> per_client) {
    const auto clean = evaluate(model, clean_test);
    MetricsRecord rec{round, clean.accuracy, clean.loss, std::nullopt, std::nullopt, std::move(per_client)};
    if (triggered_test) {
      rec.triggered_accuracy = evaluate(model, triggered_test->data).accuracy;
      if (has_backdoor) rec.attack_success_rate = attack_success_rate(model, *triggered_test);
    }
    return rec;
  };

  result.records.push_back(
      measure(0, global, std::vector<double>(cfg.client_count, result.pretrain.accuracy)));
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    RoundResult r = run_round(global, clients, state, cfg, round);
    std::vector<double> per_client(cfg.client_count);
    for (std::size_t k = 0; k < cfg.client_count; ++k) {
      per_client[k] = evaluate(r.updates[k].params, clean_test).accuracy;
    }
    global = std::move(r.global);
    state = std::move(r.state);
    result.records.push_back(measure(round, global, std::move(per_client)));
    if (log) {
      const auto& rec = result.records.back();
      std::string line = to_string(cfg.strategy) + " round " + std::to_string(round) + ": clean accuracy " +
                         fmt4(rec.clean_accuracy);
      if (rec.attack_success_rate) line += ", attack success " + fmt4(*rec.attack_success_rate);
      if (r.fedbayes) {
        std::size_t suppressed = 0;
        for (bool f : r.fedbayes->fallback) suppressed += f ? 1 : 0;
        line += ", prior kept on " + std::to_string(suppressed) + " layer(s), mean Pn per client [";
        for (std::size_t k = 0; k < cfg.client_count; ++k) {
          double mean_pn = 0.0;
          for (const auto& layer : r.fedbayes->probabilities) mean_pn += layer[k].penalized;
          mean_pn /= static_cast<double>(r.fedbayes->probabilities.size());
          line += (k == 0 ? "" : " ") + fmt4(mean_pn);
        }
        line += "]";
      }
      log(line);
    }
  }
  return result;
}

}  // namespace fedsim
