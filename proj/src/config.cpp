#include "fedsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
};

struct RawSection {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, Entry> entries;
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool valid_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

// Typed access to one section's entries; every failure names the key.
class SectionReader {
 public:
  SectionReader(const RawSection& raw, std::string source) : raw_(raw), source_(std::move(source)) {}

  bool has(const std::string& key) const { return raw_.entries.contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& reason) const {
    const auto it = raw_.entries.find(key);
    std::string where = source_ + ": [experiment " + raw_.name + "]";
    if (it != raw_.entries.end()) {
      where = source_ + ":" + std::to_string(it->second.line);
      throw ConfigError(key, where + ": " + key + " = " + it->second.value + ": " + reason);
    }
    throw ConfigError(key, where + ": " + key + ": " + reason);
  }

  const std::string& text(const std::string& key) const { return raw_.entries.at(key).value; }

  std::uint64_t uint(const std::string& key) const { return parse_uint(key, text(key)); }

  std::uint64_t parse_uint(const std::string& key, const std::string& v) const {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail(key, "expected a non-negative integer");
    return out;
  }

  double real(const std::string& key) const {
    const std::string& v = text(key);
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(out)) fail(key, "expected a finite number");
      return out;
    } catch (const std::logic_error&) {
      fail(key, "expected a number");
    }
  }

  double fraction(const std::string& key) const {
    const double v = real(key);
    if (!(v >= 0.0 && v <= 1.0)) fail(key, "value is outside [0, 1]");
    return v;
  }

  double positive(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0)) fail(key, "value must be positive");
    return v;
  }

  std::size_t count_at_least(const std::string& key, std::uint64_t min) const {
    const auto v = uint(key);
    if (v < min) fail(key, "value must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  const RawSection& raw() const { return raw_; }

 private:
  const RawSection& raw_;
  std::string source_;
};

const std::vector<std::string> kAttackFields{"attack",     "fraction",          "target_label", "trigger",
                                             "trigger_value", "weight_multiplier", "seed"};

bool known_scalar_key(const std::string& key) {
  static const std::vector<std::string> keys{
      "strategy",        "rounds",          "local_epochs",          "client_count",
      "batch_size",      "learning_rate",   "master_seed",           "pretrain_epochs",
      "pretrain_target_accuracy",           "pretrain_learning_rate", "hidden",
      "server_lr",       "beta1",           "beta2",                 "tau",
      "data.source",     "data.train_images", "data.train_labels",   "data.test_images",
      "data.test_labels", "data.per_client", "data.test_size",       "data.image_side",
      "data.class_count", "data.noise",      "data.contrast",        "triggered_test_fraction",
      "output_dir",      "malicious.count"};
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

// client.<k>.<field> -> (k, field)
std::optional<std::pair<std::string, std::string>> split_client_key(const std::string& key) {
  if (!key.starts_with("client.")) return std::nullopt;
  const auto dot = key.find('.', 7);
  if (dot == std::string::npos) return std::nullopt;
  return std::make_pair(key.substr(7, dot - 7), key.substr(dot + 1));
}

TriggerPattern parse_trigger(const SectionReader& r, const std::string& key, std::size_t side, double value) {
  const std::string& v = r.text(key);
  if (v == "cross") return cross_trigger(side, side, value);
  // Explicit pixel list: "row:col row:col ..."
  TriggerPattern t;
  t.value = value;
  std::istringstream in(v);
  std::string tok;
  while (in >> tok) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) r.fail(key, "expected 'cross' or a list of row:col pixels");
    const auto row = r.parse_uint(key, tok.substr(0, colon));
    const auto col = r.parse_uint(key, tok.substr(colon + 1));
    if (row >= side || col >= side) r.fail(key, "trigger pixel " + tok + " lies outside the image");
    t.pixel_coords.emplace_back(row, col);
  }
  if (t.pixel_coords.empty()) r.fail(key, "trigger has no pixels");
  return t;
}

AttackSpec read_attack(const SectionReader& r, const std::string& prefix, int client_id, std::uint64_t master_seed,
                       std::size_t side, std::size_t classes) {
  AttackSpec spec;
  const auto key = [&](const char* field) { return prefix + field; };
  if (r.has(key("attack"))) {
    try {
      spec.kind = attack_kind_from_string(r.text(key("attack")));
    } catch (const InvalidInput&) {
      r.fail(key("attack"), "expected one of none, backdoor, label_flip");
    }
  }
  if (r.has(key("fraction"))) spec.fraction = r.fraction(key("fraction"));
  if (r.has(key("target_label"))) {
    const auto t = r.uint(key("target_label"));
    if (t >= classes) r.fail(key("target_label"), "label must be below class count " + std::to_string(classes));
    spec.target_label = static_cast<int>(t);
  }
  double trigger_value = 1.0;
  if (r.has(key("trigger_value"))) trigger_value = r.fraction(key("trigger_value"));
  if (r.has(key("trigger"))) spec.trigger = parse_trigger(r, key("trigger"), side, trigger_value);
  if (r.has(key("weight_multiplier"))) {
    spec.weight_multiplier = r.real(key("weight_multiplier"));
    if (!(spec.weight_multiplier >= 1.0)) r.fail(key("weight_multiplier"), "value must be >= 1");
  }
  spec.seed = r.has(key("seed")) ? r.uint(key("seed"))
                                 : derive_seed(master_seed, 0x61747461636bULL, static_cast<std::uint64_t>(client_id));

  if (spec.kind == AttackKind::backdoor && !spec.trigger) {
    r.fail(key("trigger"), "a backdoor attack needs a trigger (e.g. " + key("trigger") + " = cross)");
  }
  if (spec.kind == AttackKind::none && spec.weight_multiplier != 1.0) {
    r.fail(key("weight_multiplier"), "benign clients must keep a multiplier of 1");
  }
  return spec;
}

std::vector<ExperimentSection> build_sections(const RawSection& raw, const std::string& source,
                                               std::optional<std::uint64_t> seed_override) {
  SectionReader r(raw, source);
  ExperimentSection base;
  base.name = raw.name;
  auto& fed = base.federation;
  auto& data = base.data;

  // Reject unknown keys before interpreting anything.
  for (const auto& [key, entry] : raw.entries) {
    if (known_scalar_key(key)) continue;
    if (auto ck = split_client_key(key)) {
      if (std::find(kAttackFields.begin(), kAttackFields.end(), ck->second) == kAttackFields.end()) {
        r.fail(key, "unknown client field '" + ck->second + "'");
      }
      r.parse_uint(key, ck->first);
      continue;
    }
    if (key.starts_with("malicious.") &&
        std::find(kAttackFields.begin(), kAttackFields.end(), key.substr(10)) != kAttackFields.end()) {
      continue;
    }
    r.fail(key, "unknown key");
  }

  std::vector<Strategy> strategies{Strategy::fedbayes};
  if (r.has("strategy")) {
    strategies.clear();
    for (const auto& s : split_list(r.text("strategy"))) {
      try {
        strategies.push_back(strategy_from_string(s));
      } catch (const InvalidInput& e) {
        r.fail("strategy", e.what());
      }
    }
    if (strategies.empty()) r.fail("strategy", "no strategy given");
  }

  if (r.has("rounds")) fed.rounds = r.count_at_least("rounds", 1);
  if (r.has("local_epochs")) fed.local_epochs = r.count_at_least("local_epochs", 1);
  if (r.has("client_count")) fed.client_count = r.count_at_least("client_count", 1);
  if (r.has("batch_size")) fed.train_cfg.batch_size = r.count_at_least("batch_size", 1);
  if (r.has("learning_rate")) fed.train_cfg.learning_rate = r.positive("learning_rate");
  if (r.has("master_seed")) fed.master_seed = r.uint("master_seed");
  if (seed_override) fed.master_seed = *seed_override;
  if (r.has("pretrain_epochs")) fed.pretrain_epochs = r.count_at_least("pretrain_epochs", 1);
  if (r.has("pretrain_target_accuracy")) {
    if (r.text("pretrain_target_accuracy") == "none") {
      fed.pretrain_target_accuracy.reset();
    } else {
      fed.pretrain_target_accuracy = r.fraction("pretrain_target_accuracy");
    }
  }
  if (r.has("pretrain_learning_rate")) fed.pretrain_learning_rate = r.positive("pretrain_learning_rate");
  if (r.has("hidden")) {
    fed.hidden_layers.clear();
    for (const auto& h : split_list(r.text("hidden"))) {
      const auto v = r.parse_uint("hidden", h);
      if (v < 1) r.fail("hidden", "layer sizes must be >= 1");
      fed.hidden_layers.push_back(static_cast<std::size_t>(v));
    }
  }
  if (r.has("server_lr")) fed.server.server_lr = r.positive("server_lr");
  if (r.has("beta1")) fed.server.beta1 = r.fraction("beta1");
  if (r.has("beta2")) fed.server.beta2 = r.fraction("beta2");
  if (r.has("tau")) fed.server.tau = r.positive("tau");

  if (r.has("data.source")) {
    const auto& s = r.text("data.source");
    if (s == "synthetic") {
      data.kind = DataKind::synthetic;
    } else if (s == "idx") {
      data.kind = DataKind::idx;
      data.image_side = 28;
    } else {
      r.fail("data.source", "expected synthetic or idx");
    }
  }
  for (const auto* k : {"data.train_images", "data.train_labels", "data.test_images", "data.test_labels"}) {
    if (r.has(k) && data.kind != DataKind::idx) r.fail(k, "only valid with data.source = idx");
  }
  if (data.kind == DataKind::idx) {
    for (const auto* k : {"data.train_images", "data.train_labels", "data.test_images", "data.test_labels"}) {
      if (!r.has(k)) r.fail(k, "required when data.source = idx");
    }
    data.train_images = r.text("data.train_images");
    data.train_labels = r.text("data.train_labels");
    data.test_images = r.text("data.test_images");
    data.test_labels = r.text("data.test_labels");
  }
  if (r.has("data.per_client")) data.per_client = r.count_at_least("data.per_client", 1);
  if (r.has("data.test_size")) data.test_size = r.uint("data.test_size");
  if (r.has("data.image_side")) data.image_side = r.count_at_least("data.image_side", 1);
  if (r.has("data.class_count")) data.class_count = r.count_at_least("data.class_count", 2);
  if (r.has("data.noise")) {
    data.noise = r.real("data.noise");
    if (data.noise < 0.0) r.fail("data.noise", "value must be >= 0");
  }
  if (r.has("data.contrast")) data.contrast = r.fraction("data.contrast");
  if (data.kind == DataKind::synthetic && data.test_size == 0) r.fail("data.test_size", "must be >= 1 for synthetic data");
  if (r.has("triggered_test_fraction")) base.triggered_test_fraction = r.fraction("triggered_test_fraction");
  if (r.has("output_dir")) base.output_dir = r.text("output_dir");

  for (const auto& [key, entry] : raw.entries) {
    const auto ck = split_client_key(key);
    if (!ck) continue;
    const auto id = r.parse_uint(key, ck->first);
    if (id >= fed.client_count) r.fail(key, "client index must be below client_count " + std::to_string(fed.client_count));
    const int cid = static_cast<int>(id);
    if (fed.attack_assignments.contains(cid)) continue;
    fed.attack_assignments[cid] =
        read_attack(r, "client." + ck->first + ".", cid, fed.master_seed, data.image_side, data.class_count);
  }

  std::vector<std::optional<std::size_t>> malicious_counts{std::nullopt};
  if (r.has("malicious.count")) {
    malicious_counts.clear();
    for (const auto& c : split_list(r.text("malicious.count"))) {
      const auto v = r.parse_uint("malicious.count", c);
      if (v > fed.client_count) r.fail("malicious.count", "more malicious clients than client_count");
      malicious_counts.emplace_back(static_cast<std::size_t>(v));
    }
    if (malicious_counts.empty()) r.fail("malicious.count", "no count given");
    if (!fed.attack_assignments.empty()) r.fail("malicious.count", "cannot be combined with client.<k> attacks");
  } else {
    for (const auto& field : kAttackFields) {
      if (r.has("malicious." + field)) r.fail("malicious." + field, "requires malicious.count");
    }
  }

  std::vector<ExperimentSection> out;
  for (const auto& count : malicious_counts) {
    for (Strategy s : strategies) {
      ExperimentSection section = base;
      section.federation.strategy = s;
      if (strategies.size() > 1) section.name += "_" + to_string(s);
      if (count) {
        if (malicious_counts.size() > 1) section.name += "_m" + std::to_string(*count);
        for (std::size_t k = 0; k < *count; ++k) {
          section.federation.attack_assignments[static_cast<int>(k)] =
              read_attack(r, "malicious.", static_cast<int>(k), fed.master_seed, data.image_side, data.class_count);
        }
      }
      try {
        section.federation.validate();
      } catch (const ConfigError& e) {
        r.fail(e.key(), e.what());
      }
      out.push_back(std::move(section));
    }
  }
  return out;
}

}  // namespace

ExperimentFile parse_config_text(const std::string& text, const std::string& source,
                                 std::optional<std::uint64_t> seed_override) {
  std::vector<RawSection> raws;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments: whole-line, or inline after whitespace.
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
        line.resize(i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw FormatError(where + "unterminated section header");
      const std::string inner = trim(std::string_view(t).substr(1, t.size() - 2));
      if (!inner.starts_with("experiment ")) throw FormatError(where + "expected [experiment <name>]");
      const std::string name = trim(std::string_view(inner).substr(11));
      if (!valid_name(name)) throw FormatError(where + "invalid experiment name '" + name + "'");
      for (const auto& r : raws) {
        if (r.name == name) throw FormatError(where + "duplicate experiment '" + name + "'");
      }
      raws.push_back({name, lineno, {}});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected key = value");
    if (raws.empty()) throw FormatError(where + "key outside of an [experiment <name>] section");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw FormatError(where + "empty key");
    auto& entries = raws.back().entries;
    if (entries.contains(key)) throw ConfigError(key, where + key + " is set twice");
    entries[key] = {value, lineno};
  }

  ExperimentFile file;
  for (const auto& raw : raws) {
    for (auto& s : build_sections(raw, source, seed_override)) file.experiments.push_back(std::move(s));
  }
  return file;
}

ExperimentFile parse_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string(), seed_override);
}

}  // namespace fedsim
