#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/kernels.hpp"
#include "fedsim/normal.hpp"

namespace fedsim {

namespace kp = kernels::parallel;

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"fedavg", "fedbayes", "fedadagrad", "fedadam", "fedyogi"};
  return names;
}

std::string to_string(Strategy s) { return strategy_names()[static_cast<std::size_t>(s)]; }

Strategy strategy_from_string(const std::string& name) {
  const auto& names = strategy_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Strategy>(i);
  }
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw InvalidInput("unknown strategy '" + name + "' (valid: " + valid + ")");
}

double normal_cdf(double x, double mean, double stddev) {
  if (!(stddev > 0.0)) throw InvalidInput("normal_cdf: stddev must be positive");
  return standard_normal_cdf((x - mean) / stddev);
}

LayerStats layer_stats(const Tensor2D& prior_layer) {
  if (prior_layer.empty()) throw InvalidInput("layer_stats: empty layer");
  const auto v = prior_layer.values();
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

double penalize(double raw_cdf_gap) noexcept {
  return std::clamp(1.0 - kPenaltyFactor * raw_cdf_gap, 0.0, 1.0);
}

AdjustedProbability client_layer_probability(const Tensor2D& client_layer, const Tensor2D& prior_layer,
                                             const LayerStats& stats) {
  if (!client_layer.same_shape(prior_layer)) throw InvalidInput("client_layer_probability: shape mismatch");
  if (prior_layer.empty()) throw InvalidInput("client_layer_probability: empty layer");
  if (!(stats.stddev > 0.0)) throw InvalidInput("client_layer_probability: stddev must be floored above 0");
  const double gap = kp::cdf_gap_sum(prior_layer.values(), client_layer.values(), stats.mean, stats.stddev) /
                     static_cast<double>(prior_layer.size());
  return {gap, penalize(gap)};
}

namespace {

void check_updates(const ModelParams& reference, std::span<const ClientUpdate> updates, const char* op) {
  if (updates.empty()) throw InvalidInput(std::string(op) + ": no client updates");
  for (const auto& u : updates) {
    if (!u.params.compatible_with(reference)) {
      throw InvalidInput(std::string(op) + ": update from client " + std::to_string(u.client_id) +
                         " does not match the model shape");
    }
  }
}

}  // namespace

FedBayesResult fedbayes_aggregate_detailed(const ModelParams& prior, std::span<const ClientUpdate> updates) {
  check_updates(prior, updates, "fedbayes_aggregate");
  FedBayesResult result{prior, {}, std::vector<bool>(prior.layer_count(), false)};
  result.probabilities.resize(prior.layer_count());

  std::vector<std::span<const double>> inputs(updates.size());
  std::vector<double> weights(updates.size());
  for (std::size_t l = 0; l < prior.layer_count(); ++l) {
    const Tensor2D& prior_layer = prior.tensor(l);
    LayerStats stats = layer_stats(prior_layer);
    stats.stddev = std::max(stats.stddev, kStddevFloor);

    auto& probs = result.probabilities[l];
    double total = 0.0;
    for (std::size_t n = 0; n < updates.size(); ++n) {
      probs.push_back(client_layer_probability(updates[n].params.tensor(l), prior_layer, stats));
      inputs[n] = updates[n].params.tensor(l).values();
      weights[n] = probs.back().penalized;
      total += weights[n];
    }
    if (total < kSuppressedLayerEpsilon) {
      result.fallback[l] = true;
      continue;  // keep the prior layer
    }
    auto out = result.params.tensor(l).values();
    kp::weighted_sum(inputs, weights, out);
    for (double& x : out) x /= total;
  }
  return result;
}

ModelParams fedbayes_aggregate(const ModelParams& prior, std::span<const ClientUpdate> updates) {
  return fedbayes_aggregate_detailed(prior, updates).params;
}

ModelParams fedavg_aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw InvalidInput("fedavg_aggregate: no client updates");
  check_updates(updates.front().params, updates, "fedavg_aggregate");
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.reported_examples == 0) throw InvalidInput("fedavg_aggregate: reported_examples must be >= 1");
    total += static_cast<double>(u.reported_examples);
  }
  std::vector<double> weights;
  for (const auto& u : updates) weights.push_back(static_cast<double>(u.reported_examples) / total);

  ModelParams out = updates.front().params;
  std::vector<std::span<const double>> inputs(updates.size());
  for (std::size_t l = 0; l < out.layer_count(); ++l) {
    for (std::size_t n = 0; n < updates.size(); ++n) inputs[n] = updates[n].params.tensor(l).values();
    kp::weighted_sum(inputs, weights, out.tensor(l).values());
  }
  return out;
}

ServerOptState init_server_state(Strategy strategy, const ServerHyperparams& hyper, const ModelParams& like) {
  return {strategy, hyper, ModelParams::zeros(like.architecture()), ModelParams::zeros(like.architecture())};
}

std::pair<ModelParams, ServerOptState> server_opt_step(const ServerOptState& state, const ModelParams& global,
                                                       std::span<const ClientUpdate> updates) {
  if (state.strategy == Strategy::fedavg || state.strategy == Strategy::fedbayes) {
    throw InvalidInput("server_opt_step: " + to_string(state.strategy) + " is not a server optimizer");
  }
  if (!state.m.compatible_with(global) || !state.v.compatible_with(global)) {
    throw InvalidInput("server_opt_step: optimizer state does not match the model shape");
  }
  check_updates(global, updates, "server_opt_step");
  const ModelParams avg = fedavg_aggregate(updates);
  const auto& h = state.hyper;

  ModelParams next = global;
  ServerOptState s = state;
  for (std::size_t l = 0; l < next.layer_count(); ++l) {
    auto w = next.tensor(l).values();
    auto m = s.m.tensor(l).values();
    auto v = s.v.tensor(l).values();
    const auto a = avg.tensor(l).values();
    const auto g = global.tensor(l).values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double delta = a[i] - g[i];
      const double d2 = delta * delta;
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * delta;
      switch (s.strategy) {
        case Strategy::fedadagrad: v[i] = v[i] + d2; break;
        case Strategy::fedadam: v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * d2; break;
        case Strategy::fedyogi: {
          const double diff = v[i] - d2;
          const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          v[i] = v[i] - (1.0 - h.beta2) * d2 * sign;
          break;
        }
        default: break;
      }
      w[i] = g[i] + h.server_lr * m[i] / (std::sqrt(v[i]) + h.tau);
    }
  }
  return {std::move(next), std::move(s)};
}

}  // namespace fedsim
