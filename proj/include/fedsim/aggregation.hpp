#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

enum class Strategy { fedavg, fedbayes, fedadagrad, fedadam, fedyogi };

std::string to_string(Strategy s);
/// Throws InvalidInput listing the valid names.
Strategy strategy_from_string(const std::string& name);
const std::vector<std::string>& strategy_names();

// ---- FedBayes ----------------------------------------------------------------
//
// Each layer of the prior (the global model broadcast this round) defines a
// normal distribution N(mu, sigma) from the mean and population standard
// deviation of its elements. A client layer is scored by how far its values
// move under that distribution's CDF:
//
//   gap = mean_i |Phi(prior_i) - Phi(client_i)|
//   Pn  = clamp(1 - 100 * gap, 0, 1)
//
// and the new layer is sum_n(client_n * Pn_n) / sum_n(Pn_n). Nothing the client
// reports about itself (example counts) enters the rule.

/// Phi((x - mean) / stddev). Throws InvalidInput for stddev <= 0.
double normal_cdf(double x, double mean, double stddev);

struct LayerStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Throws InvalidInput on an empty layer.
LayerStats layer_stats(const Tensor2D& prior_layer);

inline constexpr double kPenaltyFactor = 100.0;
inline constexpr double kStddevFloor = 1e-6;
inline constexpr double kSuppressedLayerEpsilon = 1e-12;

struct AdjustedProbability {
  double raw_cdf_gap = 0.0;
  double penalized = 1.0;
};

/// clamp(1 - 100 * raw_cdf_gap, 0, 1)
double penalize(double raw_cdf_gap) noexcept;

/// Scores one client layer against the prior layer. stats.stddev must already
/// be floored (> 0). Throws InvalidInput on a shape mismatch.
AdjustedProbability client_layer_probability(const Tensor2D& client_layer, const Tensor2D& prior_layer,
                                             const LayerStats& stats);

struct FedBayesResult {
  ModelParams params;
  // probabilities[layer][client], in update order.
  std::vector<std::vector<AdjustedProbability>> probabilities;
  // Layers where every client was suppressed and the prior was kept.
  std::vector<bool> fallback;
};

FedBayesResult fedbayes_aggregate_detailed(const ModelParams& prior, std::span<const ClientUpdate> updates);

/// Throws InvalidInput on an empty update list or a shape mismatch.
ModelParams fedbayes_aggregate(const ModelParams& prior, std::span<const ClientUpdate> updates);

// ---- FedAvg --------------------------------------------------------------------

/// Weighted mean with weights reported_examples / sum(reported_examples).
ModelParams fedavg_aggregate(std::span<const ClientUpdate> updates);

// ---- adaptive server optimizers ----------------------------------------------
//
// Pseudo-gradient delta = fedavg(updates) - global, then
//   m <- b1 m + (1 - b1) delta
//   FedAdagrad: v <- v + delta^2
//   FedAdam:    v <- b2 v + (1 - b2) delta^2
//   FedYogi:    v <- v - (1 - b2) delta^2 sign(v - delta^2)
//   global <- global + eta m / (sqrt(v) + tau)

struct ServerHyperparams {
  double server_lr = 0.1;  // eta
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
};

struct ServerOptState {
  Strategy strategy = Strategy::fedadam;
  ServerHyperparams hyper;
  ModelParams m;
  ModelParams v;
};

/// Zero moments shaped like `like`.
ServerOptState init_server_state(Strategy strategy, const ServerHyperparams& hyper, const ModelParams& like);

/// Throws InvalidInput for fedavg/fedbayes states or mismatched shapes.
std::pair<ModelParams, ServerOptState> server_opt_step(const ServerOptState& state, const ModelParams& global,
                                                       std::span<const ClientUpdate> updates);

}  // namespace fedsim
