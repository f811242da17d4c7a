#include "fedsim/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/version.hpp"

namespace fedsim {

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kPartitionStream = 3;
constexpr std::uint64_t kTriggeredStream = 4;

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset synth_set(const DataSource& d, std::uint64_t seed, std::size_t total) {
  SynthSpec s;
  s.seed = seed;
  s.class_count = d.class_count;
  s.per_class = (total + d.class_count - 1) / d.class_count;
  s.image_height = d.image_side;
  s.image_width = d.image_side;
  s.noise = d.noise;
  s.contrast = d.contrast;
  return synth_generate(s);
}

nlohmann::ordered_json attack_json(int id, const AttackSpec& a) {
  nlohmann::ordered_json j;
  j["client"] = id;
  j["attack"] = to_string(a.kind);
  j["fraction"] = a.fraction;
  j["target_label"] = a.target_label;
  if (a.trigger) {
    nlohmann::ordered_json px = nlohmann::ordered_json::array();
    for (const auto& [r, c] : a.trigger->pixel_coords) px.push_back({r, c});
    j["trigger"] = {{"pixels", px}, {"value", a.trigger->value}};
  } else {
    j["trigger"] = nullptr;
  }
  j["weight_multiplier"] = a.weight_multiplier;
  j["seed"] = a.seed;
  return j;
}

template <typename T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::filesystem::path resolve_data_path(const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv(kDataDirEnv); dir != nullptr && *dir != '\0') {
    return std::filesystem::path(dir) / p;
  }
  return p;
}

PreparedData prepare_data(const ExperimentSection& section) {
  const auto& fed = section.federation;
  const auto& d = section.data;
  const std::size_t subsets = fed.client_count + 1;
  const std::size_t train_total = d.per_client * subsets;

  PreparedData out;
  Dataset train;
  if (d.kind == DataKind::synthetic) {
    train = synth_set(d, derive_seed(fed.master_seed, kTrainStream), train_total);
    out.test = synth_set(d, derive_seed(fed.master_seed, kTestStream), d.test_size);
  } else {
    train = load_idx_files(resolve_data_path(d.train_images), resolve_data_path(d.train_labels), d.class_count);
    out.test = load_idx_files(resolve_data_path(d.test_images), resolve_data_path(d.test_labels), d.class_count);
    if (train.image_height != d.image_side || train.image_width != d.image_side) {
      throw ConsistencyError("data.image_side is " + std::to_string(d.image_side) + " but " +
                             d.train_images.string() + " holds " + std::to_string(train.image_height) + "x" +
                             std::to_string(train.image_width) + " images");
    }
    train = subsample_balanced(train, train_total, derive_seed(fed.master_seed, kTrainStream));
    if (d.test_size > 0) out.test = subsample_balanced(out.test, d.test_size, derive_seed(fed.master_seed, kTestStream));
  }
  out.partitions = partition_iid(train, {subsets, derive_seed(fed.master_seed, kPartitionStream)});

  for (const auto& [id, spec] : fed.attack_assignments) {
    if (spec.kind != AttackKind::backdoor) continue;
    AttackSpec t = spec;
    t.fraction = section.triggered_test_fraction;
    t.weight_multiplier = 1.0;
    t.seed = derive_seed(fed.master_seed, kTriggeredStream);
    out.triggered_test = poison_test_set_marked(out.test, t);
    break;
  }
  return out;
}

std::string metrics_csv(Strategy strategy, const std::vector<MetricsRecord>& records, std::size_t client_count) {
  std::string s = "round,strategy,clean_accuracy,clean_loss,triggered_accuracy,attack_success_rate";
  for (std::size_t k = 0; k < client_count; ++k) s += ",client_" + std::to_string(k) + "_acc";
  s += '\n';
  const std::string name = to_string(strategy);
  for (const auto& r : records) {
    s += std::to_string(r.round) + ',' + name + ',' + g9(r.clean_accuracy) + ',' + g9(r.clean_loss) + ',';
    if (r.triggered_accuracy) s += g9(*r.triggered_accuracy);
    s += ',';
    if (r.attack_success_rate) s += g9(*r.attack_success_rate);
    for (std::size_t k = 0; k < client_count; ++k) {
      s += ',';
      if (k < r.per_client_accuracy.size()) s += g9(r.per_client_accuracy[k]);
    }
    s += '\n';
  }
  return s;
}

nlohmann::ordered_json config_json(const ExperimentSection& section) {
  const auto& f = section.federation;
  const auto& d = section.data;
  nlohmann::ordered_json j;
  j["strategy"] = to_string(f.strategy);
  j["rounds"] = f.rounds;
  j["local_epochs"] = f.local_epochs;
  j["client_count"] = f.client_count;
  j["batch_size"] = f.train_cfg.batch_size;
  j["learning_rate"] = f.train_cfg.learning_rate;
  j["master_seed"] = f.master_seed;
  j["pretrain_epochs"] = f.pretrain_epochs;
  j["pretrain_target_accuracy"] = opt(f.pretrain_target_accuracy);
  j["pretrain_learning_rate"] = f.pretrain_learning_rate.value_or(f.train_cfg.learning_rate);
  j["hidden"] = f.hidden_layers;
  j["server"] = {{"server_lr", f.server.server_lr},
                 {"beta1", f.server.beta1},
                 {"beta2", f.server.beta2},
                 {"tau", f.server.tau}};
  nlohmann::ordered_json data;
  data["source"] = d.kind == DataKind::synthetic ? "synthetic" : "idx";
  if (d.kind == DataKind::idx) {
    data["train_images"] = d.train_images.string();
    data["train_labels"] = d.train_labels.string();
    data["test_images"] = d.test_images.string();
    data["test_labels"] = d.test_labels.string();
  }
  data["per_client"] = d.per_client;
  data["test_size"] = d.test_size;
  data["image_side"] = d.image_side;
  data["class_count"] = d.class_count;
  if (d.kind == DataKind::synthetic) {
    data["noise"] = d.noise;
    data["contrast"] = d.contrast;
  }
  j["data"] = data;
  j["triggered_test_fraction"] = section.triggered_test_fraction;
  j["output_dir"] = section.output_dir.string();
  nlohmann::ordered_json attacks = nlohmann::ordered_json::array();
  for (const auto& [id, a] : f.attack_assignments) attacks.push_back(attack_json(id, a));
  j["attacks"] = attacks;
  return j;
}

nlohmann::ordered_json summary_json(const ExperimentSection& section, const ExperimentResult& result) {
  nlohmann::ordered_json j;
  j["experiment"] = section.name;
  j["code_version"] = kVersion;
  const MetricsRecord& last = result.records.back();
  j["final"] = {{"round", last.round},
                {"clean_accuracy", last.clean_accuracy},
                {"clean_loss", last.clean_loss},
                {"triggered_accuracy", opt(last.triggered_accuracy)},
                {"attack_success_rate", opt(last.attack_success_rate)},
                {"per_client_accuracy", last.per_client_accuracy}};
  nlohmann::ordered_json peak = nullptr;
  for (const auto& r : result.records) {
    if (!r.attack_success_rate) continue;
    if (peak.is_null() || *r.attack_success_rate > peak["value"].get<double>()) {
      peak = {{"value", *r.attack_success_rate}, {"round", r.round}};
    }
  }
  j["peak_attack_success_rate"] = peak;
  j["pretrain"] = {{"accuracy", result.pretrain.accuracy},
                   {"epochs_run", result.pretrain.epochs_run},
                   {"reached_target", result.pretrain.reached_target}};
  j["config"] = config_json(section);
  return j;
}

std::vector<std::filesystem::path> run_experiments(const ExperimentFile& file, const RunOptions& options) {
  const auto emit = [&](const std::string& line) {
    if (options.log) options.log(line);
  };
  if (file.experiments.empty()) {
    emit("warning: the config defines no experiments; nothing to run");
    return {};
  }

  std::map<std::filesystem::path, std::unique_ptr<std::ofstream>> logs;
  std::vector<std::filesystem::path> written;
  for (const auto& section : file.experiments) {
    const auto dir = options.output_dir.value_or(section.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    auto& log_file = logs[dir];
    if (!log_file) {
      log_file = std::make_unique<std::ofstream>(dir / "run.log", std::ios::trunc);
      if (!*log_file) throw IoError("cannot write " + (dir / "run.log").string());
      written.push_back(dir / "run.log");
    }
    const LogFn log = [&](const std::string& line) {
      *log_file << timestamp() << ' ' << section.name << ": " << line << '\n';
      log_file->flush();
      emit(section.name + ": " + line);
    };

    log("starting (" + to_string(section.federation.strategy) + ", " + std::to_string(section.federation.rounds) +
        " rounds, " + std::to_string(section.federation.client_count) + " clients)");
    const PreparedData data = prepare_data(section);
    const ExperimentResult result =
        run_experiment(section.federation, data.partitions, data.test, data.triggered_test, log);

    const auto csv = dir / (section.name + ".csv");
    const auto json = dir / (section.name + ".json");
    write_file(csv, metrics_csv(section.federation.strategy, result.records, section.federation.client_count));
    write_file(json, summary_json(section, result).dump(2) + "\n");
    written.push_back(csv);
    written.push_back(json);
    log("wrote " + csv.string() + " and " + json.string());
  }
  return written;
}

}  // namespace fedsim
