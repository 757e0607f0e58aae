#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttpp/data.hpp"
#include "ttpp/model.hpp"

namespace ttpp {

struct ScoredFrame {
  double score = 0.0;
  bool positive = false;
};

/// Per-frame calibrated AP. Frames are ranked by descending score, ties by
/// ascending index; w = N_neg / N_pos over the given frames and
/// cPrec(k) = TP / (TP + FP / w). Returns nullopt when there are no positives.
std::optional<double> calibrated_ap(std::span<const ScoredFrame> frames);

/// Standard AP with the same ranking rule.
std::optional<double> average_precision(std::span<const ScoredFrame> frames);

/// Fraction of equal entries. Throws ContractError on empty or unequal input.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

enum class Metric { cap, map, acc };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// One table row: a value per horizon plus their mean.
struct HorizonReport {
  Metric metric = Metric::acc;
  std::vector<std::string> labels;  // "0.25s", "0.5s", ...
  std::vector<double> values;       // per horizon, mean over scored classes
  /// per_class[τ][c]; nullopt for skipped classes (and background). Empty for ACC.
  std::vector<std::vector<std::optional<double>>> per_class;
  std::vector<std::size_t> positions;  // scored chunk positions per horizon
  double average = 0.0;
};

/// "0.25s"-style column label for horizon τ.
std::string horizon_label(std::size_t tau, double chunk_seconds);

/// For horizon τ, chunk u is scored by the rollout anchored at u − τ; anchors
/// without T observed chunks are skipped. cAP and mAP average over action
/// classes 1..C−1 that have positives; ACC uses argmax over all classes.
HorizonReport evaluate_horizons(const HorizonScorer& scorer, std::span<const FeatureSequence> sequences,
                                std::size_t observed, std::size_t horizon, Metric metric);

/// Eval-mode rollout probabilities of `model` for the window ending at the anchor.
HorizonScorer model_scorer(const Model& model);

}  // namespace ttpp
