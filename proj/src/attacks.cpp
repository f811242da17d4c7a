#include "fedsim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

TriggerPattern cross_trigger(std::size_t image_height, std::size_t image_width, double value) {
  auto scale = [](double ref, std::size_t side) {
    return static_cast<std::size_t>(std::lround(ref * static_cast<double>(side) / 28.0));
  };
  const std::size_t cr = scale(3.0, image_height);
  const std::size_t cc = scale(3.0, image_width);
  const std::size_t arm_r = std::max<std::size_t>(1, scale(2.0, image_height));
  const std::size_t arm_c = std::max<std::size_t>(1, scale(2.0, image_width));
  std::set<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t r = cr >= arm_r ? cr - arm_r : 0; r <= cr + arm_r; ++r) coords.insert({r, cc});
  for (std::size_t c = cc >= arm_c ? cc - arm_c : 0; c <= cc + arm_c; ++c) coords.insert({cr, c});
  return {{coords.begin(), coords.end()}, value};
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::backdoor: return "backdoor";
    case AttackKind::label_flip: return "label_flip";
  }
  return "none";
}

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "none") return AttackKind::none;
  if (name == "backdoor") return AttackKind::backdoor;
  if (name == "label_flip") return AttackKind::label_flip;
  throw InvalidInput("unknown attack kind '" + name + "' (expected none, backdoor or label_flip)");
}

void AttackSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidInput("attack fraction must lie in [0, 1]");
  if (kind == AttackKind::backdoor && !trigger) throw InvalidInput("backdoor attack requires a trigger");
  if (trigger && !(trigger->value >= 0.0 && trigger->value <= 1.0)) {
    throw InvalidInput("trigger value must lie in [0, 1]");
  }
  if (!(weight_multiplier >= 1.0)) throw InvalidInput("weight_multiplier must be >= 1");
  if (kind == AttackKind::none && weight_multiplier != 1.0) {
    throw InvalidInput("benign clients must report a weight_multiplier of 1");
  }
}

std::size_t poison_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::round(fraction * static_cast<double>(n)));
}

namespace {

// Uniform sample of k candidates without replacement (partial Fisher-Yates).
std::vector<std::size_t> sample(std::vector<std::size_t> candidates, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

void check_trigger(const Dataset& data, const AttackSpec& spec) {
  if (!spec.trigger) throw InvalidInput("backdoor attack requires a trigger");
  for (const auto& [r, c] : spec.trigger->pixel_coords) {
    if (r >= data.image_height || c >= data.image_width) {
      throw InvalidInput("trigger pixel (" + std::to_string(r) + ", " + std::to_string(c) + ") outside " +
                         std::to_string(data.image_height) + "x" + std::to_string(data.image_width) + " image");
    }
  }
}

void check_target(const Dataset& data, const AttackSpec& spec) {
  if (spec.target_label < 0 || static_cast<std::size_t>(spec.target_label) >= data.class_count) {
    throw InvalidInput("target label " + std::to_string(spec.target_label) + " outside [0, " +
                       std::to_string(data.class_count) + ")");
  }
}

void stamp(Dataset& data, std::size_t example, const TriggerPattern& trigger) {
  auto row = data.features.row(example);
  for (const auto& [r, c] : trigger.pixel_coords) row[r * data.image_width + c] = trigger.value;
}

std::vector<std::size_t> stamp_sample(Dataset& data, const AttackSpec& spec) {
  check_trigger(data, spec);
  const auto chosen = sample(all_indices(data.size()), poison_count(spec.fraction, data.size()), spec.seed);
  for (std::size_t i : chosen) stamp(data, i, *spec.trigger);
  return chosen;
}

}  // namespace

Dataset apply_backdoor(const Dataset& data, const AttackSpec& spec) {
  if (spec.kind != AttackKind::backdoor) throw InvalidInput("apply_backdoor: spec is not a backdoor attack");
  spec.validate();
  check_target(data, spec);
  Dataset out = data;
  for (std::size_t i : stamp_sample(out, spec)) out.labels[i] = spec.target_label;
  return out;
}

Dataset poison_test_set(const Dataset& data, const AttackSpec& spec) {
  return poison_test_set_marked(data, spec).data;
}

TriggeredTestSet poison_test_set_marked(const Dataset& data, const AttackSpec& spec) {
  if (spec.kind != AttackKind::backdoor) throw InvalidInput("poison_test_set: spec is not a backdoor attack");
  spec.validate();
  TriggeredTestSet out{data, std::vector<bool>(data.size(), false), spec.target_label};
  for (std::size_t i : stamp_sample(out.data, spec)) out.triggered[i] = true;
  return out;
}

Dataset apply_label_flip(const Dataset& data, const AttackSpec& spec) {
  if (spec.kind != AttackKind::label_flip) throw InvalidInput("apply_label_flip: spec is not a label flip");
  spec.validate();
  check_target(data, spec);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] != spec.target_label) eligible.push_back(i);
  }
  const std::size_t k = poison_count(spec.fraction, data.size());
  if (k > eligible.size()) {
    throw InvalidInput("label flip needs " + std::to_string(k) + " examples not labelled " +
                       std::to_string(spec.target_label) + " but only " + std::to_string(eligible.size()) +
                       " exist");
  }
  Dataset out = data;
  for (std::size_t i : sample(std::move(eligible), k, spec.seed)) out.labels[i] = spec.target_label;
  return out;
}

Dataset apply_attack(const Dataset& data, const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::backdoor: return apply_backdoor(data, spec);
    case AttackKind::label_flip: return apply_label_flip(data, spec);
    case AttackKind::none: break;
  }
  return data;
}

ClientUpdate inflate_report(const ClientUpdate& update, double multiplier) {
  if (!(multiplier > 0.0)) throw InvalidInput("inflate_report: multiplier must be positive");
  ClientUpdate out = update;
  out.reported_examples = static_cast<std::uint64_t>(
      std::max(1.0, std::round(multiplier * static_cast<double>(update.reported_examples))));
  return out;
}

}  // namespace fedsim
