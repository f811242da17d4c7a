#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/federation.hpp"
#include "support.hpp"

#ifdef FEDSIM_HAVE_OPENMP
#include <omp.h>
#endif

using namespace fedsim;

namespace {

struct Small {
  std::vector<Dataset> parts;
  Dataset test;
  TriggeredTestSet triggered;
};

Small small_federation(std::size_t clients) {
  SynthSpec s;
  s.image_height = s.image_width = 8;
  s.class_count = 4;
  s.per_class = 30 * (clients + 1) / 4 + 1;
  s.seed = 5;
  const auto train = synth_generate(s);
  s.seed = 6;
  s.per_class = 25;
  Small out{partition_iid(train, {clients + 1, 7}), synth_generate(s), {}};
  AttackSpec t;
  t.kind = AttackKind::backdoor;
  t.fraction = 0.5;
  t.trigger = cross_trigger(8, 8);
  t.seed = 3;
  out.triggered = poison_test_set_marked(out.test, t);
  return out;
}

FederationConfig small_config(std::size_t clients, Strategy s) {
  FederationConfig cfg;
  cfg.client_count = clients;
  cfg.rounds = 2;
  cfg.local_epochs = 1;
  cfg.strategy = s;
  cfg.hidden_layers = {6};
  cfg.pretrain_epochs = 2;
  cfg.pretrain_target_accuracy.reset();
  cfg.train_cfg.batch_size = 16;
  cfg.train_cfg.learning_rate = 0.01;
  cfg.master_seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("FederationConfig defaults follow the reference protocol") {
  const FederationConfig cfg;
  CHECK(cfg.rounds == 100);
  CHECK(cfg.local_epochs == 5);
  CHECK(cfg.client_count == 8);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("FederationConfig::validate names the offending key") {
  FederationConfig cfg;
  cfg.rounds = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "rounds");
  }
  cfg.rounds = 1;
  AttackSpec a;
  a.kind = AttackKind::label_flip;
  a.fraction = 0.5;
  cfg.attack_assignments[8] = a;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("pretrain without a target runs exactly pretrain_epochs") {
  auto f = small_federation(2);
  auto cfg = small_config(2, Strategy::fedavg);
  cfg.pretrain_epochs = 3;
  const auto r = pretrain(f.parts[0], f.test, cfg);
  CHECK(r.epochs_run == 3);
  CHECK(r.reached_target);
}

TEST_CASE("pretrain with target 0 stops after the first evaluation") {
  auto f = small_federation(2);
  auto cfg = small_config(2, Strategy::fedavg);
  cfg.pretrain_epochs = 5;
  cfg.pretrain_target_accuracy = 0.0;
  const auto r = pretrain(f.parts[0], f.test, cfg);
  CHECK(r.epochs_run == 1);
  CHECK(r.reached_target);
}

TEST_CASE("pretrain warns and returns the best epoch on an unreachable target") {
  auto f = small_federation(2);
  auto cfg = small_config(2, Strategy::fedavg);
  cfg.pretrain_epochs = 2;
  cfg.pretrain_target_accuracy = 1.0;
  std::vector<std::string> lines;
  const auto r = pretrain(f.parts[0], f.test, cfg, [&](const std::string& l) { lines.push_back(l); });
  CHECK_FALSE(r.reached_target);
  CHECK(std::any_of(lines.begin(), lines.end(), [](const auto& l) { return l.find("warning") != std::string::npos; }));
}

TEST_CASE("run_round: identical client data under fedavg yields that common update") {
  auto f = small_federation(3);
  auto cfg = small_config(3, Strategy::fedavg);
  // Same data and same seed for everybody: client seeds differ, so use one epoch
  // of full-batch training, which does not shuffle-dependently change the result.
  cfg.train_cfg.batch_size = 10000;
  std::vector<ClientData> clients(3, ClientData{f.parts[1], {}});
  const auto global = init_params(cfg.architecture(64, 4), 1);
  const auto state = init_server_state(cfg.strategy, cfg.server, global);
  const auto r = run_round(global, clients, state, cfg, 1);
  for (std::size_t l = 0; l < global.layer_count(); ++l) {
    for (std::size_t i = 0; i < global.tensor(l).size(); ++i) {
      CHECK(r.global.tensor(l).values()[i] ==
            doctest::Approx(r.updates[0].params.tensor(l).values()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("run_round: a client returning the incoming global scores Pn 1 on every layer") {
  auto f = small_federation(3);
  auto cfg = small_config(3, Strategy::fedbayes);
  cfg.train_cfg.learning_rate = 0.0;
  std::vector<ClientData> clients;
  for (std::size_t k = 0; k < 3; ++k) clients.push_back({f.parts[k + 1], {}});
  const auto global = init_params(cfg.architecture(64, 4), 2);
  const auto r = run_round(global, clients, init_server_state(cfg.strategy, cfg.server, global), cfg, 1);
  REQUIRE(r.fedbayes);
  for (const auto& layer : r.fedbayes->probabilities) {
    for (const auto& p : layer) CHECK(p.penalized == 1.0);
  }
  for (std::size_t l = 0; l < global.layer_count(); ++l) {
    for (std::size_t i = 0; i < global.tensor(l).size(); ++i) {
      CHECK(std::abs(r.global.tensor(l).values()[i] - global.tensor(l).values()[i]) <= 1e-12);
    }
  }
}

TEST_CASE("run_round applies the weight multiplier to the report") {
  auto f = small_federation(2);
  auto cfg = small_config(2, Strategy::fedavg);
  AttackSpec liar;
  liar.kind = AttackKind::label_flip;
  liar.fraction = 0.0;
  liar.weight_multiplier = 3.0;
  std::vector<ClientData> clients{{f.parts[1], liar}, {f.parts[2], {}}};
  const auto global = init_params(cfg.architecture(64, 4), 3);
  const auto r = run_round(global, clients, init_server_state(cfg.strategy, cfg.server, global), cfg, 1);
  CHECK(r.updates[0].reported_examples == 3 * f.parts[1].size());
  CHECK(r.updates[1].reported_examples == f.parts[2].size());
}

#ifdef FEDSIM_HAVE_OPENMP
TEST_CASE("run_round does not depend on the worker count") {
  auto f = small_federation(4);
  auto cfg = small_config(4, Strategy::fedbayes);
  std::vector<ClientData> clients;
  for (std::size_t k = 0; k < 4; ++k) clients.push_back({f.parts[k + 1], {}});
  const auto global = init_params(cfg.architecture(64, 4), 4);
  const auto state = init_server_state(cfg.strategy, cfg.server, global);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = run_round(global, clients, state, cfg, 3);
  omp_set_num_threads(4);
  const auto four = run_round(global, clients, state, cfg, 3);
  omp_set_num_threads(saved);
  CHECK(one.global == four.global);
}
#endif

TEST_CASE("client seeds differ across clients and rounds") {
  CHECK(client_seed(1, 0, 1) != client_seed(1, 1, 1));
  CHECK(client_seed(1, 0, 1) != client_seed(1, 0, 2));
  CHECK(client_seed(1, 0, 1) != client_seed(2, 0, 1));
  CHECK(client_seed(1, 0, 1) == client_seed(1, 0, 1));
}

TEST_CASE("run_experiment with one round yields the pretrained record plus one") {
  auto f = small_federation(2);
  auto cfg = small_config(2, Strategy::fedavg);
  cfg.rounds = 1;
  const auto r = run_experiment(cfg, f.parts, f.test, std::nullopt);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].round == 0);
  CHECK(r.records[1].round == 1);
  for (const auto& rec : r.records) {
    CHECK_FALSE(rec.attack_success_rate);
    CHECK_FALSE(rec.triggered_accuracy);
    CHECK(rec.per_client_accuracy.size() == 2);
    CHECK(rec.clean_accuracy >= 0.0);
    CHECK(rec.clean_accuracy <= 1.0);
  }
}

TEST_CASE("run_experiment is reproducible for every strategy") {
  auto f = small_federation(3);
  for (const auto& name : strategy_names()) {
    auto cfg = small_config(3, strategy_from_string(name));
    AttackSpec a;
    a.kind = AttackKind::backdoor;
    a.fraction = 0.7;
    a.trigger = cross_trigger(8, 8);
    a.weight_multiplier = 2.0;
    a.seed = 9;
    cfg.attack_assignments[0] = a;
    const auto r1 = run_experiment(cfg, f.parts, f.test, f.triggered);
    const auto r2 = run_experiment(cfg, f.parts, f.test, f.triggered);
    CHECK(r1.records == r2.records);
    for (const auto& rec : r1.records) {
      REQUIRE(rec.attack_success_rate);
      CHECK(*rec.attack_success_rate >= 0.0);
      CHECK(*rec.attack_success_rate <= 1.0);
    }
  }
}

TEST_CASE("run_experiment refuses a backdoor without a triggered test set") {
  auto f = small_federation(2);
  auto cfg = small_config(2, Strategy::fedbayes);
  AttackSpec a;
  a.kind = AttackKind::backdoor;
  a.fraction = 0.7;
  a.trigger = cross_trigger(8, 8);
  cfg.attack_assignments[1] = a;
  CHECK_THROWS_AS(run_experiment(cfg, f.parts, f.test, std::nullopt), ConfigError);
}

TEST_CASE("run_experiment checks the partition count") {
  auto f = small_federation(2);
  auto cfg = small_config(3, Strategy::fedavg);
  CHECK_THROWS_AS(run_experiment(cfg, f.parts, f.test, std::nullopt), InvalidInput);
}

TEST_CASE("attack_success_rate counts triggered non-target examples sent to the target") {
  // Model that always predicts class 2.
  auto p = ModelParams::zeros({2, 3});
  p.bias(0)(0, 2) = 1.0;
  Dataset d = test::tiny_dataset(6, 2, 3, 1);
  d.labels = {0, 1, 2, 0, 1, 2};
  TriggeredTestSet t{d, {true, true, true, false, false, false}, 2};
  CHECK(attack_success_rate(p, t) == 1.0);
  // Model that always predicts class 0: only the triggered label-1 example is eligible and missed.
  auto q = ModelParams::zeros({2, 3});
  q.bias(0)(0, 0) = 1.0;
  CHECK(attack_success_rate(q, t) == 0.0);
}
