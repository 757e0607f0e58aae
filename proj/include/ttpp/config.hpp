#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ttpp/data.hpp"
#include "ttpp/metrics.hpp"
#include "ttpp/model.hpp"
#include "ttpp/training.hpp"

namespace ttpp {

enum class DataSource { synthetic, files };

/// Synthetic generator settings; class count and width come from the model.
struct SyntheticSpec {
  std::string transition = "cyclic";  // cyclic | uniform | rows "a b;c d"
  DurationLaw duration_law = DurationLaw::fixed;
  double duration_mean = 4.0;
  double noise_sigma = 0.3;
  double phase_gain = 1.0;
  double prototype_scale = 1.0;
  double train_label_noise = 0.0;  // see corrupt_labels; training split only
  std::uint64_t seed = 1;
  std::size_t train_sequences = 16;
  std::size_t test_sequences = 8;
  std::size_t length = 48;
};

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::string train_dir;
  std::string test_dir;
  SyntheticSpec synthetic;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  Metric metric = Metric::acc;
  std::string output_dir = "out";

  /// Copies T and l into the training config and checks everything.
  void finalize();
  SyntheticConfig synthetic_config() const;
};

/// Sets one flat key such as "model.d_m" or "train.lr". Throws ConfigError
/// for unknown keys or malformed values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Parses "key = value" lines; '#' starts a comment.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Every key with its current value, in the same flat format.
std::string config_to_text(const RunConfig& config);

/// Train/test sequences for the configured source.
std::vector<FeatureSequence> load_split(const RunConfig& config, bool train);

}  // namespace ttpp
