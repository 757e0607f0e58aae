#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ttpp/autograd.hpp"
#include "ttpp/parameter.hpp"
#include "ttpp/ppm.hpp"
#include "ttpp/ttm.hpp"

namespace ttpp {

enum class AggregatorKind { ttm, conv1d, lstm };
enum class PredictorKind { ppm, ssp, lstm };
enum class PpmVariant { full, no_feature };

std::string_view to_string(AggregatorKind kind);
std::string_view to_string(PredictorKind kind);
std::string_view to_string(PpmVariant variant);
AggregatorKind parse_aggregator(std::string_view name);
PredictorKind parse_predictor(std::string_view name);
PpmVariant parse_ppm_variant(std::string_view name);

struct ModelConfig {
  AggregatorKind aggregator = AggregatorKind::ttm;
  PredictorKind predictor = PredictorKind::ppm;
  PpmVariant ppm_variant = PpmVariant::full;
  bool shortcut = true;  // S_t = aggregate + f_t
  std::size_t d_model = 16;
  std::size_t heads = 4;
  std::size_t classes = 4;
  std::size_t observed = 8;  // T
  std::size_t horizon = 8;   // l
  double dropout = 0.1;

  void validate() const;
  /// Short method label such as "TTM-PPM" or "LSTM-SSP".
  std::string method_name() const;
};

/// Result of one forward pass through aggregator and predictor.
struct ModelOutput {
  Var aggregated;
  RolloutVars rollout;
  std::vector<Tensor> attention;  // per head, 1 × (T−1); TTM only
};

class Aggregator {
 public:
  virtual ~Aggregator() = default;
  /// sequence: T × d_model. Returns S_t (1 × d_model) plus any attention weights.
  virtual Var aggregate(const Var& sequence, std::vector<Tensor>* attention) const = 0;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual RolloutVars predict(const Var& aggregated, const Var& current, Mode mode, Rng& rng) const = 0;
};

/// Any aggregator composed with any predictor, sharing one classifier W_c.
class Model {
 public:
  Model(const ModelConfig& config, Rng& rng);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const Var& classifier() const { return classifier_; }

  /// observed: T × d_model raw chunk features.
  ModelOutput forward(const Tensor& observed, Mode mode, Rng& rng) const;
  /// Eval-mode rollout values.
  Rollout predict(const Tensor& observed) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  Var classifier_;
  std::unique_ptr<Aggregator> aggregator_;
  std::unique_ptr<Predictor> predictor_;
};

/// Weight count of a configuration computed from layer shapes alone, without
/// building the model.
std::size_t closed_form_param_count(const ModelConfig& config);

}  // namespace ttpp
