#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/federation.hpp"

// Experiment files are sectioned key = value text:
//
//   # comment (also ';')
//   [experiment backdoor]
//   strategy = fedbayes, fedavg        # a list expands into one run per entry
//   rounds = 20
//   client.0.attack = backdoor
//   client.0.trigger = cross
//
// See README.md for the full key list. Unknown keys are rejected.

namespace fedsim {

enum class DataKind { synthetic, idx };

struct DataSource {
  DataKind kind = DataKind::synthetic;
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::size_t per_client = 2000;  // examples per subset (pretrain subset included)
  std::size_t test_size = 2000;   // 0 keeps the whole IDX test file
  std::size_t image_side = 28;
  std::size_t class_count = 10;
  double noise = 0.4;     // synthetic only
  double contrast = 0.25;  // synthetic only
};

struct ExperimentSection {
  std::string name;
  FederationConfig federation;
  DataSource data;
  double triggered_test_fraction = 0.5;
  std::filesystem::path output_dir = "results";
};

struct ExperimentFile {
  std::vector<ExperimentSection> experiments;
};

/// Throws IoError if unreadable, FormatError on a malformed line and
/// ConfigError (naming the key) on any invalid value. `seed_override`
/// replaces every master_seed before attack seeds are derived from it.
ExperimentFile parse_config(const std::filesystem::path& path,
                            std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentFile parse_config_text(const std::string& text, const std::string& source = "<config>",
                                 std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace fedsim
