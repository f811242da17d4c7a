#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/config.hpp"
#include "fedsim/federation.hpp"

namespace fedsim {

/// Relative IDX paths are resolved against this directory when it is set.
inline constexpr const char* kDataDirEnv = "FEDSIM_DATA_DIR";

struct PreparedData {
  std::vector<Dataset> partitions;  // client_count + 1 subsets, subset 0 pretrains
  Dataset test;
  std::optional<TriggeredTestSet> triggered_test;  // only when a backdoor is assigned
};

/// Builds the train partitions, the clean test set and (if any client runs a
/// backdoor) the triggered test set, all seeded from the master seed.
/// Throws IoError naming a missing IDX file.
PreparedData prepare_data(const ExperimentSection& section);

std::filesystem::path resolve_data_path(const std::filesystem::path& p);

/// CSV text for one experiment; floats use 9 significant digits and absent
/// optional values are empty.
std::string metrics_csv(Strategy strategy, const std::vector<MetricsRecord>& records, std::size_t client_count);

/// Final metrics, peak attack success rate, pretraining outcome, the code
/// version and every effective config value.
nlohmann::ordered_json summary_json(const ExperimentSection& section, const ExperimentResult& result);

nlohmann::ordered_json config_json(const ExperimentSection& section);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;  // overrides every section's output_dir
  LogFn log;                                        // receives untimestamped lines
};

/// Runs each section in order and writes <dir>/<name>.csv, <dir>/<name>.json
/// and <dir>/run.log. Returns the paths written. Throws on the first failure.
std::vector<std::filesystem::path> run_experiments(const ExperimentFile& file, const RunOptions& options);

}  // namespace fedsim
