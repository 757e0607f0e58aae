#include "ttpp/experiment.hpp"

#include "ttpp/errors.hpp"

namespace ttpp {

TrainedModel train_run(const RunConfig& config, std::span<const FeatureSequence> train_sequences) {
  auto samples = make_samples(train_sequences, config.model.observed, config.model.horizon);
  if (samples.empty()) throw ConfigError("no training windows: sequences are shorter than T + l");
  Rng rng(config.train.seed);
  Model model(config.model, rng);
  auto history = train(model, samples, config.train, rng);
  return TrainedModel{std::move(model), std::move(history)};
}

HorizonReport evaluate_model(const Model& model, std::span<const FeatureSequence> sequences, Metric metric) {
  return evaluate_horizons(model_scorer(model), sequences, model.config().observed, model.config().horizon, metric);
}

std::vector<ModelConfig> grid_configs(const ModelConfig& base) {
  std::vector<ModelConfig> out;
  for (auto agg : {AggregatorKind::conv1d, AggregatorKind::lstm, AggregatorKind::ttm}) {
    for (auto pred : {PredictorKind::lstm, PredictorKind::ssp, PredictorKind::ppm}) {
      ModelConfig c = base;
      c.aggregator = agg;
      c.predictor = pred;
      c.ppm_variant = PpmVariant::full;
      out.push_back(c);
    }
  }
  ModelConfig ablation = base;
  ablation.aggregator = AggregatorKind::ttm;
  ablation.predictor = PredictorKind::ppm;
  ablation.ppm_variant = PpmVariant::no_feature;
  out.push_back(ablation);
  return out;
}

}  // namespace ttpp
