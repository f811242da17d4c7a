#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/attacks.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/nn.hpp"

namespace fedsim {

/// Client ids are 0-based: client 0 is the first client (the attacker in the
/// single-attacker scenarios), and CSV column client_k_acc belongs to client k.
struct FederationConfig {
  std::size_t rounds = 100;
  std::size_t local_epochs = 5;
  std::size_t client_count = 8;
  Strategy strategy = Strategy::fedbayes;
  // Desk defaults: small local steps keep benign clients inside the FedBayes
  // penalty band (CDF gap < 0.01) on the synthetic track.
  TrainConfig train_cfg{5, 64, 0.0025, 0};  // epochs come from local_epochs
  std::map<int, AttackSpec> attack_assignments;
  std::uint64_t master_seed = 0;
  std::size_t pretrain_epochs = 20;
  std::optional<double> pretrain_target_accuracy = 0.8;
  std::optional<double> pretrain_learning_rate = 0.05;  // unset means train_cfg.learning_rate
  std::vector<std::size_t> hidden_layers{64};
  ServerHyperparams server;

  void validate() const;
  std::vector<std::size_t> architecture(std::size_t input_dim, std::size_t classes) const;
};

struct MetricsRecord {
  std::size_t round = 0;
  double clean_accuracy = 0.0;
  double clean_loss = 0.0;
  std::optional<double> triggered_accuracy;
  std::optional<double> attack_success_rate;
  std::vector<double> per_client_accuracy;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

using LogFn = std::function<void(const std::string&)>;

struct PretrainResult {
  ModelParams params;
  double accuracy = 0.0;
  std::size_t epochs_run = 0;
  bool reached_target = true;
};

/// Trains from a seeded init one epoch at a time, evaluating on `test` after
/// each epoch. Stops at pretrain_epochs or as soon as accuracy reaches
/// pretrain_target_accuracy. A missed target is logged as a warning and the
/// best epoch's parameters are returned.
PretrainResult pretrain(const Dataset& subset0, const Dataset& test, const FederationConfig& cfg,
                        const LogFn& log = {});

struct ClientData {
  Dataset data;  // already poisoned
  AttackSpec attack;
};

struct RoundResult {
  ModelParams global;
  ServerOptState state;
  std::vector<ClientUpdate> updates;  // after report inflation, in client order
  std::optional<FedBayesResult> fedbayes;
};

/// Client k trains a copy of `global` with seed derive_seed(master_seed, k, round),
/// reports its example count scaled by its weight multiplier, and the server
/// aggregates with cfg.strategy (FedBayes uses `global` as the prior). Clients
/// train in parallel; results do not depend on scheduling.
RoundResult run_round(const ModelParams& global, std::span<const ClientData> clients, const ServerOptState& state,
                      const FederationConfig& cfg, std::size_t round_idx);

/// Seed used by client `client_id` in round `round_idx`.
std::uint64_t client_seed(std::uint64_t master_seed, int client_id, std::size_t round_idx);

/// Fraction of triggered examples whose true label differs from the target
/// that the model classifies as the target.
double attack_success_rate(const ModelParams& params, const TriggeredTestSet& test);

struct ExperimentResult {
  std::vector<MetricsRecord> records;  // records[0] is the pretrained model
  PretrainResult pretrain;
};

/// partitions[0] pretrains, partitions[k + 1] belongs to client k. Attacks are
/// applied once before round 1. Throws ConfigError if a backdoor is assigned
/// and `triggered_test` is missing.
ExperimentResult run_experiment(const FederationConfig& cfg, std::span<const Dataset> partitions,
                                const Dataset& clean_test, const std::optional<TriggeredTestSet>& triggered_test,
                                const LogFn& log = {});

}  // namespace fedsim
