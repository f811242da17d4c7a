// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed here.
// Usage: fedsim_acceptance [--exploratory] [criterion numbers...]
// Exit status is nonzero if any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/attacks.hpp"
#include "fedsim/config.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/runner.hpp"

using namespace fedsim;

namespace {

constexpr double kPenaltyTol = 1e-12;
constexpr int kRandomTrials = 100;
constexpr double kFixpointTol = 1e-12;
constexpr double kHullTol = 1e-12;
constexpr double kCdfTol = 1e-6;
constexpr int kCdfGridPoints = 1000;
constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kParityGap = 0.03;
constexpr double kParityFloor = 0.90;
constexpr double kBackdoorAsrMax = 0.10;
constexpr double kFedAvgAsrMin = 0.50;
constexpr double kCeilingCentre = 0.50;
constexpr double kCeilingTol = 0.05;
constexpr double kCeilingCleanMin = 0.95;
constexpr std::size_t kStabilityWindow = 10;
const std::vector<std::uint64_t> kStabilitySeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

ExperimentFile load(const char* name, std::optional<std::uint64_t> seed = std::nullopt) {
  return parse_config(std::string(FEDSIM_CONFIG_DIR) + "/" + name, seed);
}

const ExperimentSection& section(const ExperimentFile& f, Strategy s) {
  for (const auto& e : f.experiments) {
    if (e.federation.strategy == s) return e;
  }
  throw std::runtime_error("config has no " + to_string(s) + " experiment");
}

ExperimentResult run(const ExperimentSection& s) {
  const auto data = prepare_data(s);
  return run_experiment(s.federation, data.partitions, data.test, data.triggered_test);
}

double population_stddev(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

ModelParams random_params(const std::vector<std::size_t>& arch, Rng& rng, double scale) {
  ModelParams p = ModelParams::zeros(arch);
  for (auto& l : p.layers()) {
    for (double& v : l.tensor.values()) v = rng.uniform(-scale, scale);
  }
  return p;
}

std::vector<ClientUpdate> random_updates(const ModelParams& prior, Rng& rng) {
  std::vector<ClientUpdate> ups;
  const std::size_t n = 1 + rng.below(10);
  for (std::size_t k = 0; k < n; ++k) {
    ModelParams p = prior;
    const double step = rng.uniform() < 0.7 ? rng.uniform(0.0, 0.01) : rng.uniform(0.0, 1.0);
    for (auto& l : p.layers()) {
      for (double& v : l.tensor.values()) v += rng.uniform(-step, step);
    }
    ups.push_back({static_cast<int>(k), std::move(p), 1 + rng.below(5000)});
  }
  return ups;
}

// ---- criteria ----------------------------------------------------------------

Outcome penalty_arithmetic() {
  const double pn = penalize(0.003);
  return {std::abs(pn - 0.7) <= kPenaltyTol, "penalize(0.003) = " + num(pn, 15) + ", want 0.7 +- 1e-12"};
}

Outcome weight_attack_immunity() {
  Rng rng(0x1a);
  int identical = 0;
  for (int t = 0; t < kRandomTrials; ++t) {
    const auto prior = random_params({1 + rng.below(8), 1 + rng.below(8), 2 + rng.below(4)}, rng, 1.0);
    const auto ups = random_updates(prior, rng);
    const auto base = fedbayes_aggregate(prior, ups);
    bool same = true;
    for (std::uint64_t mult : {1ULL, 2ULL, 3ULL, 1000ULL}) {
      auto inflated = ups;
      for (auto& u : inflated) u.reported_examples *= mult;
      same = same && fedbayes_aggregate(prior, inflated) == base;
    }
    identical += same ? 1 : 0;
  }
  return {identical == kRandomTrials,
          std::to_string(identical) + "/" + std::to_string(kRandomTrials) +
              " update sets bitwise identical under multipliers {1, 2, 3, 1000}"};
}

Outcome fixpoint_and_hull() {
  Rng rng(0x2b);
  double worst_fix = 0.0;
  double worst_hull = 0.0;
  for (int t = 0; t < kRandomTrials; ++t) {
    const auto prior = random_params({1 + rng.below(8), 1 + rng.below(8), 2 + rng.below(4)}, rng,
                                     rng.uniform(0.01, 5.0));
    const std::vector<ClientUpdate> copies(8, ClientUpdate{0, prior, 1});
    const auto fix = fedbayes_aggregate(prior, copies);
    for (std::size_t l = 0; l < prior.layer_count(); ++l) {
      for (std::size_t i = 0; i < prior.tensor(l).size(); ++i) {
        worst_fix = std::max(worst_fix, std::abs(fix.tensor(l).values()[i] - prior.tensor(l).values()[i]));
      }
    }

    const auto ups = random_updates(prior, rng);
    const auto res = fedbayes_aggregate_detailed(prior, ups);
    for (std::size_t l = 0; l < prior.layer_count(); ++l) {
      for (std::size_t i = 0; i < prior.tensor(l).size(); ++i) {
        double lo = INFINITY;
        double hi = -INFINITY;
        if (res.fallback[l]) {
          lo = hi = prior.tensor(l).values()[i];
        } else {
          for (std::size_t n = 0; n < ups.size(); ++n) {
            if (res.probabilities[l][n].penalized <= 0.0) continue;
            lo = std::min(lo, ups[n].params.tensor(l).values()[i]);
            hi = std::max(hi, ups[n].params.tensor(l).values()[i]);
          }
        }
        const double v = res.params.tensor(l).values()[i];
        worst_hull = std::max({worst_hull, lo - v, v - hi});
      }
    }
  }
  return {worst_fix <= kFixpointTol && worst_hull <= kHullTol,
          "max fixpoint deviation " + sci(worst_fix) + ", max hull excursion " + sci(worst_hull) + " over " +
              std::to_string(kRandomTrials) + " trials each (tolerance 1e-12)"};
}

Outcome cdf_oracle() {
  // Cumulative trapezoid integration of the density from -12 sigma, with fine
  // sub-steps between consecutive grid points over [mu - 6 sigma, mu + 6 sigma].
  const double mu = 0.7;
  const double sigma = 1.9;
  const auto pdf = [&](double x) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
  };
  const auto integrate = [&](double a, double b, int steps) {
    const double h = (b - a) / steps;
    double s = 0.5 * (pdf(a) + pdf(b));
    for (int i = 1; i < steps; ++i) s += pdf(a + h * i);
    return s * h;
  };
  const double lo = mu - 6.0 * sigma;
  const double hi = mu + 6.0 * sigma;
  double acc = integrate(mu - 12.0 * sigma, lo, 200000);
  double worst = 0.0;
  double prev_x = lo;
  double prev_cdf = -1.0;
  bool monotone = true;
  for (int k = 0; k < kCdfGridPoints; ++k) {
    const double x = lo + (hi - lo) * k / (kCdfGridPoints - 1);
    if (k > 0) acc += integrate(prev_x, x, 2000);
    prev_x = x;
    const double c = normal_cdf(x, mu, sigma);
    monotone = monotone && c >= prev_cdf;
    prev_cdf = c;
    worst = std::max(worst, std::abs(c - acc));
  }
  return {worst <= kCdfTol && monotone, "max |normal_cdf - integral| " + sci(worst) + " on " +
                                            std::to_string(kCdfGridPoints) + " points, monotone " +
                                            (monotone ? "yes" : "no")};
}

Outcome gradient_correctness() {
  Rng rng(0x3c);
  double worst = 0.0;
  std::size_t largest = 0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t in = 4 + rng.below(12);
    const std::size_t hidden = 4 + rng.below(30);
    const std::size_t out = 2 + rng.below(6);
    const auto params = init_params({in, hidden, out}, rng.next());
    if (params.parameter_count() > 1000) continue;
    largest = std::max(largest, params.parameter_count());
    Dataset d;
    d.features = Tensor2D(16, in);
    for (double& v : d.features.values()) v = rng.uniform();
    for (std::size_t i = 0; i < 16; ++i) d.labels.push_back(static_cast<int>(rng.below(out)));
    d.image_height = 1;
    d.image_width = in;
    d.class_count = out;
    worst = std::max(worst, gradient_check(params, d, kGradEps));
  }
  return {worst < kGradTol, "max relative error " + sci(worst) + " (largest net " + std::to_string(largest) +
                                " parameters, epsilon 1e-5)"};
}

Outcome baseline_parity() {
  const auto f = load("baseline.ini");
  const auto bayes = run(section(f, Strategy::fedbayes));
  const auto avg = run(section(f, Strategy::fedavg));
  const double b = bayes.records.back().clean_accuracy;
  const double a = avg.records.back().clean_accuracy;
  const bool pass = std::abs(b - a) <= kParityGap && b >= kParityFloor;
  return {pass, "final clean accuracy fedbayes " + num(b) + ", fedavg " + num(a) + ", gap " + num(std::abs(b - a)) +
                    " (max 0.03); fedbayes >= 0.90"};
}

Outcome backdoor_defense() {
  const auto f = load("backdoor.ini");
  const auto bayes = run(section(f, Strategy::fedbayes));
  const auto avg = run(section(f, Strategy::fedavg));
  const auto& b0 = bayes.records.front();
  const auto& b20 = bayes.records.back();
  const auto& a20 = avg.records.back();
  const bool clean_ok = b20.clean_accuracy >= b0.clean_accuracy;
  const bool bayes_ok = *b20.attack_success_rate < kBackdoorAsrMax;
  const bool avg_ok = *a20.attack_success_rate > kFedAvgAsrMin;
  return {clean_ok && bayes_ok && avg_ok,
          "fedbayes clean " + num(b0.clean_accuracy) + " -> " + num(b20.clean_accuracy) + " (must not drop), asr " +
              num(*b20.attack_success_rate) + " (< 0.10); fedavg asr " + num(*a20.attack_success_rate) +
              " (> 0.50) at round " + std::to_string(b20.round)};
}

Outcome triggered_ceiling() {
  // Train one model centrally on the clean pool plus a fully backdoored copy,
  // so triggered inputs always go to the target and clean inputs stay correct.
  const auto f = load("backdoor.ini");
  const auto& s = section(f, Strategy::fedavg);
  const auto data = prepare_data(s);
  AttackSpec full = s.federation.attack_assignments.at(0);
  full.fraction = 1.0;
  full.weight_multiplier = 1.0;

  std::vector<Dataset> pools;
  for (const auto& p : data.partitions) {
    pools.push_back(p);
    pools.push_back(apply_backdoor(p, full));
  }
  Dataset train = pools.front();
  std::size_t rows = 0;
  for (const auto& p : pools) rows += p.size();
  train.features = Tensor2D(rows, pools.front().dim());
  train.labels.clear();
  std::size_t r = 0;
  for (const auto& p : pools) {
    for (std::size_t i = 0; i < p.size(); ++i, ++r) {
      std::copy(p.features.row(i).begin(), p.features.row(i).end(), train.features.row(r).begin());
      train.labels.push_back(p.labels[i]);
    }
  }

  ModelParams model = init_params(s.federation.architecture(train.dim(), train.class_count), 17);
  model = train_local(model, train, {5, 64, 0.05, 23});

  const auto& t = *data.triggered_test;
  std::vector<std::size_t> clean_idx;
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    if (!t.triggered[i]) clean_idx.push_back(i);
  }
  const double clean_half = evaluate(model, t.data.subset(clean_idx)).accuracy;
  const double triggered = evaluate(model, t.data).accuracy;
  const double asr = attack_success_rate(model, t);
  const bool pass = std::abs(triggered - kCeilingCentre) <= kCeilingTol && clean_half >= kCeilingCleanMin;
  return {pass, "triggered_accuracy " + num(triggered) + " (0.50 +- 0.05), clean half " + num(clean_half) +
                    " (>= 0.95), attack success " + num(asr)};
}

Outcome label_flip_stability() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : kStabilitySeeds) {
    const auto f = load("labelflip.ini", seed);
    double sd[2];
    int i = 0;
    for (Strategy st : {Strategy::fedbayes, Strategy::fedavg}) {
      const auto res = run(section(f, st));
      std::vector<double> acc;
      for (const auto& rec : res.records) acc.push_back(rec.clean_accuracy);
      sd[i++] = population_stddev(std::span<const double>(acc).last(kStabilityWindow));
    }
    const bool win = sd[0] < sd[1];
    wins += win ? 1 : 0;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " sd fedbayes " +
              num(sd[0], 5) + " vs fedavg " + num(sd[1], 5);
  }
  return {2 * wins > static_cast<int>(kStabilitySeeds.size()),
          std::to_string(wins) + "/" + std::to_string(kStabilitySeeds.size()) + " seeds favour fedbayes (" + detail +
              ")"};
}

void exploratory_sweep() {
  const auto f = load("sweep.ini");
  for (const auto& s : f.experiments) {
    const auto res = run(s);
    std::string series;
    for (const auto& rec : res.records) {
      series += " " + std::to_string(rec.round) + ":" + num(rec.clean_accuracy, 3) + "/" +
                num(rec.attack_success_rate.value_or(0.0), 3);
    }
    std::printf("  %s (round:accuracy/asr)%s\n", s.name.c_str(), series.c_str());
    std::fflush(stdout);
  }
}

}  // namespace

int main(int argc, char** argv) {
  bool exploratory = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--exploratory") {
      exploratory = true;
    } else {
      only.insert(std::atoi(a.c_str()));
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"penalty arithmetic", penalty_arithmetic},
      {"weight-attack immunity", weight_attack_immunity},
      {"fixpoint and hull", fixpoint_and_hull},
      {"cdf oracle", cdf_oracle},
      {"gradient correctness", gradient_correctness},
      {"baseline parity", baseline_parity},
      {"backdoor defense", backdoor_defense},
      {"triggered-test ceiling", triggered_ceiling},
      {"label-flip stability", label_flip_stability},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && !only.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d %s: %s | %s [%.1fs]\n", id, criteria[k].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }

  if (only.empty() || only.contains(10)) {
    if (exploratory) {
      std::printf("criterion 10 malicious-fraction sweep: EXPLORATORY (not gated)\n");
      exploratory_sweep();
    } else {
      std::printf(
          "criterion 10 malicious-fraction sweep: EXPLORATORY (not gated; pass --exploratory or run "
          "configs/sweep.ini)\n");
    }
  }
  return failed == 0 ? 0 : 1;
}
