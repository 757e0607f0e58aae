#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttpp/autograd.hpp"
#include "ttpp/tensor.hpp"

namespace ttpp {

/// One untrimmed video as chunk features with one label per chunk.
/// Label 0 is background.
struct FeatureSequence {
  std::string video_id;
  Tensor features;                  // length × d_model
  std::vector<std::size_t> labels;  // length entries in [0, classes)
  std::size_t classes = 0;
  double chunk_seconds = 0.25;

  std::size_t length() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  void validate() const;
};

/// Averages each run of `chunk_size` frames and labels the chunk with its
/// central frame (offset chunk_size / 2). Trailing frames that do not fill a
/// chunk are dropped.
FeatureSequence chunk_frames(const Tensor& frame_features, std::span<const std::size_t> frame_labels,
                             std::size_t chunk_size, std::size_t classes, std::string video_id = "video");

// --- Feature files -----------------------------------------------------------
//
// Binary layout, all little-endian:
//   "TTPPFEAT"  u16 version  u32 length  u32 d_model  u32 classes
//   f64 features[length × d_model] (row-major)  u16 labels[length]
// The video id is not stored; loaders take it from the file stem.
//
// CSV layout: first line "video_id,d_model,classes"; then one line per chunk,
// "label,f_1,...,f_d".

inline constexpr std::string_view kFeatureMagic = "TTPPFEAT";
inline constexpr std::uint16_t kFeatureVersion = 1;

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::span<const std::uint8_t> bytes, std::string video_id);

std::string features_to_csv(const FeatureSequence& seq);
FeatureSequence features_from_csv(std::string_view text);

/// Writes CSV when the extension is ".csv", the binary format otherwise.
void save_features(const FeatureSequence& seq, const std::filesystem::path& path);
/// Reads either format; binary is recognized by its magic.
FeatureSequence load_features(const std::filesystem::path& path);
/// Every regular file in `dir`, sorted by name.
std::vector<FeatureSequence> load_feature_dir(const std::filesystem::path& dir);

// --- Synthetic semi-Markov data ---------------------------------------------

enum class DurationLaw { geometric, fixed, uniform };

std::string_view to_string(DurationLaw law);
DurationLaw parse_duration_law(std::string_view name);

/// Duration distribution of one segment. Geometric has the given mean on
/// {1, 2, ...}; fixed is round(mean); uniform covers {1, ..., 2·round(mean)−1}.
struct DurationModel {
  DurationLaw law = DurationLaw::geometric;
  double mean = 4.0;

  std::size_t sample(Rng& rng) const;
  double pmf(std::size_t d) const;
  /// P(D >= d).
  double survival(std::size_t d) const;
  /// P(D = age | D >= age); 1 past the end of the support.
  double hazard(std::size_t age) const;
};

struct SyntheticConfig {
  std::size_t classes = 4;
  std::size_t d_model = 16;
  Tensor transition;  // classes × classes, row-stochastic, over segment boundaries
  DurationModel duration;
  Tensor prototypes;  // classes × d_model
  double noise_sigma = 0.1;
  /// Adds phase_gain · (age−1)/mean · phase_directions[label] to each row so
  /// features carry how long the current segment has lasted. 0 disables it.
  double phase_gain = 0.0;
  Tensor phase_directions;  // classes × d_model, unit rows
  std::uint64_t seed = 0;

  void validate() const;

  /// Draws prototypes (N(0, prototype_scale²) entries) and phase directions
  /// from `seed`.
  static SyntheticConfig make(std::size_t classes, std::size_t d_model, Tensor transition, DurationModel duration,
                              double noise_sigma, double phase_gain, std::uint64_t seed, double prototype_scale = 1.0);
};

Tensor cyclic_transition(std::size_t classes);
/// Uniform over the other classes (no self transitions).
Tensor uniform_transition(std::size_t classes);

struct Segment {
  std::size_t label;
  std::size_t duration;
};

/// Segment chain with at least `min_chunks` total duration. The first state is
/// uniform over classes.
std::vector<Segment> sample_segments(const SyntheticConfig& cfg, std::size_t min_chunks, Rng& rng);

/// Deterministic per cfg.seed. Each feature row is prototype[label] plus the
/// optional phase term plus N(0, σ²) noise.
std::vector<FeatureSequence> gen_synthetic(const SyntheticConfig& cfg, std::size_t n_sequences, std::size_t length);

/// Replaces each chunk label, with probability `rate`, by a uniform draw over
/// all classes. Features are left as generated.
void corrupt_labels(std::vector<FeatureSequence>& seqs, double rate, std::uint64_t seed);

/// Exact horizon-by-horizon label distribution of the synthetic process given
/// the current label and how many chunks (including the current one) the
/// current segment has lasted. Returns horizon × classes.
Tensor bayes_label_forecast(const SyntheticConfig& cfg, std::size_t label, std::size_t age, std::size_t horizon);

// --- Training windows --------------------------------------------------------

struct TrainingSample {
  Tensor observed;         // T × d_model
  Tensor future_features;  // l × d_model
  Tensor future_labels;    // l × C one-hot
};

/// All stride-1 windows with `horizon` future chunks available. Too-short
/// sequences give an empty list.
std::vector<TrainingSample> make_samples(const FeatureSequence& seq, std::size_t observed, std::size_t horizon);
std::vector<TrainingSample> make_samples(std::span<const FeatureSequence> seqs, std::size_t observed,
                                         std::size_t horizon);

/// Scores the `horizon` chunks following anchor `anchor_end` (the last
/// observed chunk). Returns horizon × classes.
using HorizonScorer = std::function<Tensor(const FeatureSequence& seq, std::size_t anchor_end)>;

/// Reference scorer from the true observed labels: reads the current label and
/// its run length inside the window, then applies bayes_label_forecast. When
/// the run fills the window the run length is a lower bound on the age.
HorizonScorer bayes_scorer(const SyntheticConfig& cfg, std::size_t observed, std::size_t horizon);

}  // namespace ttpp
