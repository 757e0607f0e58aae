#include "ttpp/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ttpp/errors.hpp"
#include "ttpp/text.hpp"

namespace ttpp {

namespace {

std::vector<std::size_t> ranking(std::span<const ScoredFrame> frames) {
  std::vector<std::size_t> idx(frames.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return frames[a].score > frames[b].score; });
  return idx;
}

std::optional<double> ranked_precision_sum(std::span<const ScoredFrame> frames, bool calibrated) {
  std::size_t positives = 0;
  for (const auto& f : frames) positives += f.positive ? 1 : 0;
  if (positives == 0) return std::nullopt;
  const std::size_t negatives = frames.size() - positives;
  // cPrec = TP / (TP + FP / w) with w = N / P, rewritten as TP·N / (TP·N + FP·P)
  // so that every precision is a ratio of exact integers.
  const auto p = static_cast<long double>(positives), n = static_cast<long double>(negatives);
  long double tp = 0.0L, fp = 0.0L, total = 0.0L;
  for (std::size_t i : ranking(frames)) {
    if (!frames[i].positive) {
      fp += 1.0L;
      continue;
    }
    tp += 1.0L;
    if (!calibrated) {
      total += tp / (tp + fp);
    } else {
      total += negatives == 0 ? 1.0L : tp * n / (tp * n + fp * p);
    }
  }
  return static_cast<double>(total / p);
}

}  // namespace

std::optional<double> calibrated_ap(std::span<const ScoredFrame> frames) { return ranked_precision_sum(frames, true); }

std::optional<double> average_precision(std::span<const ScoredFrame> frames) {
  return ranked_precision_sum(frames, false);
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.empty()) throw ContractError("accuracy of an empty prediction set");
  if (predicted.size() != truth.size()) {
    throw ContractError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(truth.size()) + " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::cap: return "cAP";
    case Metric::map: return "mAP";
    case Metric::acc: return "ACC";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  if (name == "cAP" || name == "cap") return Metric::cap;
  if (name == "mAP" || name == "map") return Metric::map;
  if (name == "ACC" || name == "acc") return Metric::acc;
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected cAP|mAP|ACC)");
}

std::string horizon_label(std::size_t tau, double chunk_seconds) {
  std::string s = format_double(static_cast<double>(tau) * chunk_seconds);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
  return s + "s";
}

HorizonReport evaluate_horizons(const HorizonScorer& scorer, std::span<const FeatureSequence> sequences,
                                std::size_t observed, std::size_t horizon, Metric metric) {
  if (horizon < 1) throw ContractError("evaluation horizon must be >= 1");
  if (sequences.empty()) throw ContractError("no sequences to evaluate");
  const std::size_t classes = sequences.front().classes;

  // scores[τ] holds one (probabilities, label) pair per scored position.
  std::vector<std::vector<std::vector<double>>> scores(horizon);
  std::vector<std::vector<std::size_t>> truth(horizon);
  for (const auto& seq : sequences) {
    if (seq.classes != classes) throw ContractError("sequences disagree on the class count");
    for (std::size_t end = observed - 1; end + 1 < seq.length(); ++end) {
      const Tensor probs = scorer(seq, end);
      if (probs.rows() != horizon || probs.cols() != classes) {
        throw DimensionError("scorer returned " + shape_string(probs.shape()) + ", expected " +
                             std::to_string(horizon) + "x" + std::to_string(classes));
      }
      for (std::size_t tau = 1; tau <= horizon && end + tau < seq.length(); ++tau) {
        const auto row = probs.row_span(tau - 1);
        scores[tau - 1].emplace_back(row.begin(), row.end());
        truth[tau - 1].push_back(seq.labels[end + tau]);
      }
    }
  }
  if (truth.front().empty()) throw ContractError("no anchored positions to evaluate (sequences shorter than T+1)");

  HorizonReport report;
  report.metric = metric;
  const double chunk_seconds = sequences.front().chunk_seconds;
  for (std::size_t tau = 1; tau <= horizon; ++tau) {
    report.labels.push_back(horizon_label(tau, chunk_seconds));
    const auto& sc = scores[tau - 1];
    const auto& tr = truth[tau - 1];
    report.positions.push_back(tr.size());
    if (metric == Metric::acc) {
      std::vector<std::size_t> pred(sc.size());
      for (std::size_t i = 0; i < sc.size(); ++i) {
        pred[i] = static_cast<std::size_t>(std::max_element(sc[i].begin(), sc[i].end()) - sc[i].begin());
      }
      report.values.push_back(accuracy(pred, tr));
      continue;
    }
    std::vector<std::optional<double>> per_class(classes);
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      std::vector<ScoredFrame> frames(sc.size());
      for (std::size_t i = 0; i < sc.size(); ++i) frames[i] = ScoredFrame{sc[i][c], tr[i] == c};
      per_class[c] = metric == Metric::cap ? calibrated_ap(frames) : average_precision(frames);
      if (per_class[c]) {
        total += *per_class[c];
        ++counted;
      }
    }
    if (counted == 0) throw ContractError("no action class has positives at horizon " + std::to_string(tau));
    report.values.push_back(total / static_cast<double>(counted));
    report.per_class.push_back(std::move(per_class));
  }
  report.average = std::accumulate(report.values.begin(), report.values.end(), 0.0) /
                   static_cast<double>(report.values.size());
  return report;
}

HorizonScorer model_scorer(const Model& model) {
  return [&model](const FeatureSequence& seq, std::size_t anchor_end) {
    const std::size_t t = model.config().observed;
    const std::size_t d = seq.dim();
    const auto first = seq.features.values().begin() + static_cast<std::ptrdiff_t>((anchor_end + 1 - t) * d);
    Tensor window({t, d}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(t * d)));
    return model.predict(window).probs;
  };
}

}  // namespace ttpp
