#pragma once

#include <span>
#include <vector>

#include "ttpp/autograd.hpp"
#include "ttpp/data.hpp"
#include "ttpp/model.hpp"

namespace ttpp {

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  double lambda = 1.0;  // weight of the feature reconstruction loss
  std::uint64_t seed = 0;
  std::size_t horizon = 8;
  std::size_t observed = 8;

  void validate() const;
};

/// Σ_i ‖pred_i − target_i‖² over the l predicted steps.
Var feature_loss(const Var& predicted, const Tensor& target);
/// −Σ_i Σ_j y_ij log p_ij over the l steps, with log clamped at 1e-12.
Var class_loss(const Var& probs, const Tensor& onehot);
Var total_loss(const Var& class_term, const Var& feature_term, double lambda);

struct SampleLoss {
  Var class_term;
  Var feature_term;
  Var total;
  bool h1_correct = false;
};

SampleLoss sample_loss(const Model& model, const TrainingSample& sample, double lambda, Mode mode, Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;
  double class_loss = 0.0;
  double feature_loss = 0.0;
  double total = 0.0;
  double acc_h1 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using History = std::vector<EpochRecord>;

/// Mini-batch momentum SGD. Each epoch reshuffles with `rng`; batch loss is
/// averaged over samples. Epoch records average the per-sample training
/// losses and horizon-1 accuracy seen during that epoch.
/// Throws DivergenceError on a non-finite batch loss.
History train(Model& model, std::span<const TrainingSample> samples, const TrainConfig& config, Rng& rng);

}  // namespace ttpp
