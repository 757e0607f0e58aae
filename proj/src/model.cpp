#include "ttpp/model.hpp"

#include <cctype>

#include "ttpp/baselines.hpp"
#include "ttpp/errors.hpp"

namespace ttpp {

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::ttm: return "ttm";
    case AggregatorKind::conv1d: return "conv1d";
    case AggregatorKind::lstm: return "lstm";
  }
  return "?";
}

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::ppm: return "ppm";
    case PredictorKind::ssp: return "ssp";
    case PredictorKind::lstm: return "lstm";
  }
  return "?";
}

std::string_view to_string(PpmVariant variant) {
  return variant == PpmVariant::full ? "full" : "no_feature";
}

AggregatorKind parse_aggregator(std::string_view name) {
  if (name == "ttm") return AggregatorKind::ttm;
  if (name == "conv1d") return AggregatorKind::conv1d;
  if (name == "lstm") return AggregatorKind::lstm;
  throw ConfigError("unknown aggregator '" + std::string(name) + "' (expected ttm|conv1d|lstm)");
}

PredictorKind parse_predictor(std::string_view name) {
  if (name == "ppm") return PredictorKind::ppm;
  if (name == "ssp") return PredictorKind::ssp;
  if (name == "lstm") return PredictorKind::lstm;
  throw ConfigError("unknown predictor '" + std::string(name) + "' (expected ppm|ssp|lstm)");
}

PpmVariant parse_ppm_variant(std::string_view name) {
  if (name == "full") return PpmVariant::full;
  if (name == "no_feature") return PpmVariant::no_feature;
  throw ConfigError("unknown ppm variant '" + std::string(name) + "' (expected full|no_feature)");
}

void ModelConfig::validate() const {
  if (d_model < 2 || d_model % 2 != 0) throw ConfigError("d_model must be even and >= 2");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("n_heads (" + std::to_string(heads) + ") must divide d_model (" + std::to_string(d_model) +
                      ")");
  }
  if (classes < 2) throw ConfigError("need at least 2 classes");
  if (observed < 2) throw ConfigError("observed length T must be >= 2");
  if (horizon < 1) throw ConfigError("horizon l must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (aggregator == AggregatorKind::conv1d) {
    std::size_t len = observed;
    for (std::size_t k = 0; k < Conv1DStack::kLayers; ++k) len = conv1d_output_length(len);
    if (len != 1) throw ConfigError("conv1d aggregator cannot reduce T=" + std::to_string(observed) + " to 1");
  }
}

std::string ModelConfig::method_name() const {
  auto upper = [](std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (out == "CONV1D") out = "Conv1D";
    return out;
  };
  std::string name = upper(to_string(aggregator));
  if (!shortcut) name += "-noshortcut";
  name += "-" + upper(to_string(predictor));
  if (predictor == PredictorKind::ppm && ppm_variant == PpmVariant::no_feature) name += "-noFP";
  return name;
}

namespace {

class TtmAggregator final : public Aggregator {
 public:
  TtmAggregator(ParameterSet& params, const ModelConfig& cfg, Rng& rng)
      : params_(TTMParams::create(params, "ttm", cfg.d_model, cfg.heads, rng)),
        pe_(positional_encoding(cfg.observed, cfg.d_model)),
        shortcut_(cfg.shortcut) {}

  Var aggregate(const Var& sequence, std::vector<Tensor>* attention) const override {
    auto r = ttpp::aggregate(sequence, params_, pe_, shortcut_);
    if (attention) *attention = std::move(r.head_weights);
    return r.aggregated;
  }

 private:
  TTMParams params_;
  PositionalTable pe_;
  bool shortcut_;
};

class Conv1DAggregator final : public Aggregator {
 public:
  Conv1DAggregator(ParameterSet& params, const ModelConfig& cfg, Rng& rng)
      : stack_(Conv1DStack::create(params, "conv1d", cfg.d_model, rng)), shortcut_(cfg.shortcut) {}

  Var aggregate(const Var& sequence, std::vector<Tensor>*) const override {
    return conv1d_aggregate(sequence, stack_, shortcut_);
  }

 private:
  Conv1DStack stack_;
  bool shortcut_;
};

class LstmAggregator final : public Aggregator {
 public:
  LstmAggregator(ParameterSet& params, const ModelConfig& cfg, Rng& rng)
      : params_(LSTMParams::create(params, "encoder", cfg.d_model, cfg.d_model, rng)), shortcut_(cfg.shortcut) {}

  Var aggregate(const Var& sequence, std::vector<Tensor>*) const override {
    return lstm_encode(sequence, params_, shortcut_);
  }

 private:
  LSTMParams params_;
  bool shortcut_;
};

class PpmPredictor final : public Predictor {
 public:
  PpmPredictor(ParameterSet& params, const ModelConfig& cfg, const Var& classifier, Rng& rng)
      : params_(PPMParams::create(params, "ppm", cfg.d_model, cfg.classes, classifier, rng)),
        horizon_(cfg.horizon),
        dropout_(cfg.dropout),
        variant_(cfg.ppm_variant) {}

  RolloutVars predict(const Var& aggregated, const Var& current, Mode mode, Rng& rng) const override {
    if (variant_ == PpmVariant::no_feature) {
      return rollout_without_features(aggregated, current, params_, horizon_, mode, rng, dropout_);
    }
    return rollout(aggregated, current, params_, horizon_, mode, rng, dropout_);
  }

 private:
  PPMParams params_;
  std::size_t horizon_;
  double dropout_;
  PpmVariant variant_;
};

class SspPredictor final : public Predictor {
 public:
  SspPredictor(ParameterSet& params, const ModelConfig& cfg, const Var& classifier, Rng& rng)
      : params_(SSPParams::create(params, "ssp", cfg.d_model, cfg.classes, cfg.horizon, classifier, rng)),
        dropout_(cfg.dropout) {}

  RolloutVars predict(const Var& aggregated, const Var& current, Mode mode, Rng& rng) const override {
    return ssp_rollout(aggregated, current, params_, mode, rng, dropout_);
  }

 private:
  SSPParams params_;
  double dropout_;
};

class LstmPredictor final : public Predictor {
 public:
  LstmPredictor(ParameterSet& params, const ModelConfig& cfg, const Var& classifier, Rng& rng)
      : params_(LSTMParams::create(params, "decoder", cfg.d_model + cfg.classes, cfg.d_model, rng)),
        classifier_(classifier),
        horizon_(cfg.horizon) {}

  RolloutVars predict(const Var& aggregated, const Var& current, Mode, Rng&) const override {
    return lstm_decode(aggregated, current, classifier_, params_, horizon_);
  }

 private:
  LSTMParams params_;
  Var classifier_;
  std::size_t horizon_;
};

}  // namespace

Model::Model(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  switch (config_.aggregator) {
    case AggregatorKind::ttm: aggregator_ = std::make_unique<TtmAggregator>(params_, config_, rng); break;
    case AggregatorKind::conv1d: aggregator_ = std::make_unique<Conv1DAggregator>(params_, config_, rng); break;
    case AggregatorKind::lstm: aggregator_ = std::make_unique<LstmAggregator>(params_, config_, rng); break;
  }
  classifier_ = params_.add("classifier", glorot_uniform(config_.d_model, config_.classes, rng));
  switch (config_.predictor) {
    case PredictorKind::ppm: predictor_ = std::make_unique<PpmPredictor>(params_, config_, classifier_, rng); break;
    case PredictorKind::ssp: predictor_ = std::make_unique<SspPredictor>(params_, config_, classifier_, rng); break;
    case PredictorKind::lstm:
      predictor_ = std::make_unique<LstmPredictor>(params_, config_, classifier_, rng);
      break;
  }
}

ModelOutput Model::forward(const Tensor& observed, Mode mode, Rng& rng) const {
  if (observed.rank() != 2 || observed.rows() != config_.observed || observed.cols() != config_.d_model) {
    throw DimensionError("model expects observed window " + std::to_string(config_.observed) + "x" +
                         std::to_string(config_.d_model) + ", got " + shape_string(observed.shape()));
  }
  ModelOutput out;
  Var sequence = Var::constant(observed);
  out.aggregated = aggregator_->aggregate(sequence, &out.attention);
  Var current = slice_rows(sequence, observed.rows() - 1, 1);
  out.rollout = predictor_->predict(out.aggregated, current, mode, rng);
  return out;
}

Rollout Model::predict(const Tensor& observed) const {
  Rng unused(0);
  return Rollout::from(forward(observed, Mode::eval, unused).rollout);
}

std::size_t closed_form_param_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.d_model, c = cfg.classes;
  std::size_t n = d * c;  // classifier
  switch (cfg.aggregator) {
    case AggregatorKind::ttm: n += TTMParams::count(d); break;
    case AggregatorKind::conv1d: n += Conv1DStack::count(d); break;
    case AggregatorKind::lstm: n += LSTMParams::count(d, d); break;
  }
  switch (cfg.predictor) {
    case PredictorKind::ppm: n += PPMParams::count(d, c); break;
    case PredictorKind::ssp: n += SSPParams::count(d, c, cfg.horizon); break;
    case PredictorKind::lstm: n += LSTMParams::count(d + c, d); break;
  }
  return n;
}

}  // namespace ttpp
