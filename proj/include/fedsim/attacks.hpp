#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

struct TriggerPattern {
  std::vector<std::pair<std::size_t, std::size_t>> pixel_coords;  // (row, col)
  double value = 1.0;

  friend bool operator==(const TriggerPattern&, const TriggerPattern&) = default;
};

/// Plus-shaped trigger in the upper-left corner. On a 28x28 grid it is
/// {(r, 3) : r in 1..5} U {(3, c) : c in 1..5}; other sizes scale the centre
/// and arm length by side/28 (arm length at least 1).
TriggerPattern cross_trigger(std::size_t image_height, std::size_t image_width, double value = 1.0);

enum class AttackKind { none, backdoor, label_flip };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);  // throws InvalidInput

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double fraction = 0.0;
  int target_label = 2;
  std::optional<TriggerPattern> trigger;
  double weight_multiplier = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// round() with halves away from zero; all poison counts go through this.
std::size_t poison_count(double fraction, std::size_t n);

/// Backdoor poisoning: round(fraction * n) examples, drawn uniformly with
/// spec.seed, get the trigger stamped in and their label set to the target.
Dataset apply_backdoor(const Dataset& data, const AttackSpec& spec);

/// A test set with the trigger stamped into round(fraction * n) examples and
/// every label left alone.
Dataset poison_test_set(const Dataset& data, const AttackSpec& spec);

struct TriggeredTestSet {
  Dataset data;
  std::vector<bool> triggered;  // per example
  int target_label = 0;
};

/// poison_test_set plus the mask of stamped examples (needed for the attack
/// success rate).
TriggeredTestSet poison_test_set_marked(const Dataset& data, const AttackSpec& spec);

/// Label flipping: round(fraction * n) examples whose label differs from the
/// target are relabelled to the target. Throws InvalidInput if there are not
/// enough such examples.
Dataset apply_label_flip(const Dataset& data, const AttackSpec& spec);

/// Dispatches on spec.kind; AttackKind::none returns a copy.
Dataset apply_attack(const Dataset& data, const AttackSpec& spec);

/// Weight attack: the client claims round(multiplier * reported) examples.
ClientUpdate inflate_report(const ClientUpdate& update, double multiplier);

}  // namespace fedsim
