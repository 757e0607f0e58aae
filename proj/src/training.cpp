#include "ttpp/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ttpp/errors.hpp"

namespace ttpp {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (horizon < 1) throw ConfigError("horizon l must be >= 1");
  if (observed < 2) throw ConfigError("observed length T must be >= 2");
}

Var feature_loss(const Var& predicted, const Tensor& target) {
  if (!predicted.value().same_shape(target)) {
    throw DimensionError("feature_loss: prediction " + shape_string(predicted.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  return sum_squares(sub(predicted, Var::constant(target)));
}

Var class_loss(const Var& probs, const Tensor& onehot) {
  if (!probs.value().same_shape(onehot)) {
    throw DimensionError("class_loss: probabilities " + shape_string(probs.shape()) + " vs labels " +
                         shape_string(onehot.shape()));
  }
  return scale(sum(mul(Var::constant(onehot), log_clamped(probs, 1e-12))), -1.0);
}

Var total_loss(const Var& class_term, const Var& feature_term, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("lambda must be >= 0");
  return add(class_term, scale(feature_term, lambda));
}

SampleLoss sample_loss(const Model& model, const TrainingSample& sample, double lambda, Mode mode, Rng& rng) {
  auto out = model.forward(sample.observed, mode, rng);
  SampleLoss loss;
  Var probs = out.rollout.stacked_probs();
  loss.class_term = class_loss(probs, sample.future_labels);
  loss.feature_term = feature_loss(out.rollout.stacked_features(), sample.future_features);
  loss.total = total_loss(loss.class_term, loss.feature_term, lambda);
  const auto p1 = probs.value().row_span(0);
  const auto y1 = sample.future_labels.row_span(0);
  const auto pred = static_cast<std::size_t>(std::max_element(p1.begin(), p1.end()) - p1.begin());
  loss.h1_correct = y1[pred] == 1.0;
  return loss;
}

History train(Model& model, std::span<const TrainingSample> samples, const TrainConfig& config, Rng& rng) {
  config.validate();
  if (samples.empty()) throw ContractError("training set is empty");
  const auto& mc = model.config();
  for (const auto& s : samples) {
    if (s.observed.rows() != mc.observed || s.observed.cols() != mc.d_model ||
        s.future_features.rows() != mc.horizon || s.future_labels.cols() != mc.classes) {
      throw DimensionError("training sample shapes " + shape_string(s.observed.shape()) + "/" +
                           shape_string(s.future_features.shape()) + "/" + shape_string(s.future_labels.shape()) +
                           " do not match model (T=" + std::to_string(mc.observed) + ", l=" +
                           std::to_string(mc.horizon) + ", d=" + std::to_string(mc.d_model) +
                           ", C=" + std::to_string(mc.classes) + ")");
    }
  }

  History history;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto& params = model.parameters();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t correct = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      std::vector<Var> totals;
      totals.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        auto loss = sample_loss(model, samples[order[k]], config.lambda, Mode::train, rng);
        rec.class_loss += loss.class_term.item();
        rec.feature_loss += loss.feature_term.item();
        rec.total += loss.total.item();
        correct += loss.h1_correct ? 1 : 0;
        totals.push_back(loss.total);
      }
      Var batch_loss = scale(sum(concat_rows(totals)), inv_batch);
      if (!std::isfinite(batch_loss.item())) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch));
      }
      batch_loss.backward();
      sgd_step(params, config.lr, config.momentum);
    }
    const double n = static_cast<double>(samples.size());
    rec.class_loss /= n;
    rec.feature_loss /= n;
    rec.total /= n;
    rec.acc_h1 = static_cast<double>(correct) / n;
    history.push_back(rec);
  }
  return history;
}

}  // namespace ttpp
