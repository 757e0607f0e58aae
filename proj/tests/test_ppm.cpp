#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "ttpp/errors.hpp"
#include "ttpp/grad_check.hpp"
#include "ttpp/parameter.hpp"
#include "ttpp/ppm.hpp"

using namespace ttpp;
using ttpp::test::random_tensor;

namespace {

struct Fixture {
  std::size_t d;
  std::size_t classes;
  ParameterSet params;
  Var classifier;
  PPMParams ppm;

  Fixture(std::size_t d_model, std::size_t c, std::uint64_t seed) : d(d_model), classes(c) {
    Rng rng(seed);
    classifier = params.add("classifier", glorot_uniform(d, classes, rng));
    ppm = PPMParams::create(params, "ppm", d, classes, classifier, rng);
    // Non-trivial LayerNorm affine parameters exercise every path.
    for (auto* block : {&ppm.initial, &ppm.progressive}) {
      block->ln_gain.mutable_value() = random_tensor(1, d, rng);
      block->ln_bias.mutable_value() = random_tensor(1, d, rng);
      block->fc1_bias.mutable_value() = random_tensor(1, d / 2, rng, 0.1);
      block->fc2_bias.mutable_value() = random_tensor(1, d, rng, 0.1);
    }
  }
};

Tensor vec_mat(const Tensor& x, const Tensor& w) {
  Tensor y({1, w.cols()});
  for (std::size_t j = 0; j < w.cols(); ++j)
    for (std::size_t k = 0; k < w.rows(); ++k) y(0, j) += x(0, k) * w(k, j);
  return y;
}

Tensor softmax_oracle(const Tensor& z) {
  Tensor p(z.shape());
  double mx = z[0];
  for (double v : z.values()) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : z.values()) total += std::exp(v - mx);
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - mx) / total;
  return p;
}

Tensor block_oracle(const Tensor& x, const PredictionBlockParams& b) {
  Tensor h = vec_mat(x, b.fc1_weight.value());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::max(0.0, h[i] + b.fc1_bias.value()[i]);
  Tensor y = vec_mat(h, b.fc2_weight.value());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.fc2_bias.value()[i];
  double mean = 0.0, var = 0.0;
  for (double v : y.values()) mean += v / y.size();
  for (double v : y.values()) var += (v - mean) * (v - mean) / y.size();
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = (y[i] - mean) / std::sqrt(var + 1e-5) * b.ln_gain.value()[i] + b.ln_bias.value()[i];
  return y;
}

Tensor join(std::initializer_list<Tensor> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor({1, out.size()}, out);
}

}  // namespace

TEST_CASE("block parameter shapes") {
  Fixture fx(16, 4, 1);
  CHECK(fx.ppm.initial.fc1_weight.shape() == Shape{36, 8});
  CHECK(fx.ppm.initial.fc2_weight.shape() == Shape{8, 16});
  CHECK(fx.params.count() == PPMParams::count(16, 4) + 16 * 4);
  CHECK(PredictionBlockParams::count(36, 16) == 36 * 8 + 8 + 8 * 16 + 16 + 32);
  ParameterSet params;
  Rng rng(0);
  CHECK_THROWS_AS(PredictionBlockParams::create(params, "odd", 10, 7, rng), ConfigError);
}

TEST_CASE("classify") {
  Rng rng(3);
  SUBCASE("zero classifier is uniform") {
    const auto p = classify(Var::constant(random_tensor(1, 8, rng)), Var::constant(Tensor::zeros(8, 5))).value();
    for (double v : p.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("zero feature is uniform") {
    const auto p = classify(Var::constant(Tensor::zeros(1, 8)), Var::constant(random_tensor(8, 5, rng))).value();
    for (double v : p.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("composition oracle") {
    const Tensor f = random_tensor(1, 8, rng);
    const Tensor w = random_tensor(8, 4, rng);
    CHECK(max_abs_diff(classify(Var::constant(f), Var::constant(w)).value(), softmax_oracle(vec_mat(f, w))) < 1e-10);
  }
}

TEST_CASE("prediction_block") {
  Rng rng(4);
  SUBCASE("zero parameters give the LayerNorm bias") {
    Fixture fx(8, 3, 2);
    auto& b = fx.ppm.initial;
    for (Var* v : {&b.fc1_weight, &b.fc1_bias, &b.fc2_weight, &b.fc2_bias, &b.ln_gain}) v->mutable_value().fill(0.0);
    const auto y = prediction_block(Var::constant(random_tensor(1, 19, rng)), b, Mode::eval, rng, 0.1).value();
    CHECK(y == b.ln_bias.value());
  }
  SUBCASE("output width") {
    for (std::size_t d : {8, 16, 32}) {
      Fixture fx(d, 4, d);
      const auto y = prediction_block(Var::constant(random_tensor(1, 2 * d + 4, rng)), fx.ppm.initial, Mode::eval, rng, 0.1);
      CHECK(y.shape() == Shape{1, d});
    }
  }
  SUBCASE("layer-by-layer oracle") {
    Fixture fx(16, 4, 3);
    const Tensor x = random_tensor(1, 36, rng);
    const auto y = prediction_block(Var::constant(x), fx.ppm.initial, Mode::eval, rng, 0.1).value();
    CHECK(max_abs_diff(y, block_oracle(x, fx.ppm.initial)) < 1e-10);
  }
  SUBCASE("wrong input extent") {
    Fixture fx(16, 4, 3);
    CHECK_THROWS_AS(prediction_block(Var::constant(Tensor({1, 35})), fx.ppm.initial, Mode::eval, rng, 0.1),
                    DimensionError);
  }
  SUBCASE("dropout follows the block in train mode") {
    Fixture fx(16, 4, 3);
    const Tensor x = random_tensor(1, 36, rng);
    Rng mask(17);
    const auto y = prediction_block(Var::constant(x), fx.ppm.initial, Mode::train, mask, 0.5).value();
    const auto clean = block_oracle(x, fx.ppm.initial);
    for (std::size_t i = 0; i < 16; ++i) {
      const bool dropped = y[i] == 0.0;
      if (!dropped) CHECK(y[i] == doctest::Approx(2.0 * clean[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("rollout") {
  Rng rng(5);
  SUBCASE("single step never touches the progressive block") {
    Fixture fx(8, 3, 6);
    const Var s = Var::constant(random_tensor(1, 8, rng));
    const Var f = Var::constant(random_tensor(1, 8, rng));
    const auto a = rollout(s, f, fx.ppm, 1, Mode::eval, rng, 0.1);
    CHECK(a.steps() == 1);
    for (auto* v : {&fx.ppm.progressive.fc1_weight, &fx.ppm.progressive.ln_bias}) v->mutable_value().fill(3.0);
    const auto b = rollout(s, f, fx.ppm, 1, Mode::eval, rng, 0.1);
    CHECK(a.features[0].value() == b.features[0].value());
    CHECK(a.probs[0].value() == b.probs[0].value());
  }
  SUBCASE("all-zero parameters give uniform probabilities") {
    Fixture fx(8, 4, 7);
    for (auto& p : fx.params.items()) p.value.mutable_value().fill(0.0);
    const auto r = Rollout::from(rollout(Var::constant(random_tensor(1, 8, rng)), Var::constant(random_tensor(1, 8, rng)),
                                         fx.ppm, 4, Mode::eval, rng, 0.1));
    CHECK(r.probs.shape() == Shape{4, 4});
    for (double v : r.probs.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("manual unroll") {
    Fixture fx(8, 3, 8);
    const Tensor s = random_tensor(1, 8, rng);
    const Tensor f = random_tensor(1, 8, rng);
    const auto r = rollout(Var::constant(s), Var::constant(f), fx.ppm, 3, Mode::eval, rng, 0.1);
    const Tensor& wc = fx.classifier.value();
    const Tensor p0 = softmax_oracle(vec_mat(f, wc));
    const Tensor f1 = block_oracle(join({s, f, p0}), fx.ppm.initial);
    const Tensor p1 = softmax_oracle(vec_mat(f1, wc));
    const Tensor f2 = block_oracle(join({s, f1, p1}), fx.ppm.progressive);
    const Tensor p2 = softmax_oracle(vec_mat(f2, wc));
    const Tensor f3 = block_oracle(join({s, f2, p2}), fx.ppm.progressive);
    const Tensor p3 = softmax_oracle(vec_mat(f3, wc));
    CHECK(max_abs_diff(r.features[0].value(), f1) < 1e-10);
    CHECK(max_abs_diff(r.features[1].value(), f2) < 1e-10);
    CHECK(max_abs_diff(r.features[2].value(), f3) < 1e-10);
    CHECK(max_abs_diff(r.probs[2].value(), p3) < 1e-10);
  }
  SUBCASE("empty horizon") {
    Fixture fx(8, 3, 9);
    const Var z = Var::constant(Tensor::zeros(1, 8));
    CHECK_THROWS_AS(rollout(z, z, fx.ppm, 0, Mode::eval, rng, 0.1), ContractError);
    CHECK_THROWS_AS(rollout_without_features(z, z, fx.ppm, 0, Mode::eval, rng, 0.1), ContractError);
  }
}

TEST_CASE("rollout without features") {
  Rng rng(6);
  Fixture fx(8, 3, 10);
  const Tensor s = random_tensor(1, 8, rng);
  const Tensor f = random_tensor(1, 8, rng);
  SUBCASE("first step matches the full rollout") {
    const auto a = rollout(Var::constant(s), Var::constant(f), fx.ppm, 1, Mode::eval, rng, 0.1);
    const auto b = rollout_without_features(Var::constant(s), Var::constant(f), fx.ppm, 1, Mode::eval, rng, 0.1);
    CHECK(a.features[0].value() == b.features[0].value());
    CHECK(a.probs[0].value() == b.probs[0].value());
  }
  SUBCASE("feature slot is zero from step two") {
    const auto r = rollout_without_features(Var::constant(s), Var::constant(f), fx.ppm, 3, Mode::eval, rng, 0.1);
    const Tensor zeros = Tensor::zeros(1, 8);
    const Tensor x2 = join({s, zeros, r.probs[0].value()});
    std::size_t zero_slots = 0;
    for (std::size_t i = 8; i < 16; ++i) zero_slots += x2[i] == 0.0;
    CHECK(zero_slots == 8);
    CHECK(max_abs_diff(r.features[1].value(), block_oracle(x2, fx.ppm.progressive)) < 1e-10);
    const Tensor x3 = join({s, zeros, r.probs[1].value()});
    CHECK(max_abs_diff(r.features[2].value(), block_oracle(x3, fx.ppm.progressive)) < 1e-10);
  }
}

TEST_CASE("progressive parameters are shared across steps") {
  Rng rng(7);
  const std::size_t l = 5;
  const Tensor s = random_tensor(1, 8, rng);
  const Tensor f = random_tensor(1, 8, rng);
  // A positive fc1 bias keeps every hidden unit active, so each weight lies on
  // a live path.
  auto run = [&](Fixture& fx) {
    for (auto* block : {&fx.ppm.initial, &fx.ppm.progressive}) block->fc1_bias.mutable_value().fill(10.0);
    return rollout(Var::constant(s), Var::constant(f), fx.ppm, l, Mode::eval, rng, 0.1);
  };

  const std::vector<std::string> names{"ppm.progressive.fc1.weight", "ppm.progressive.fc2.weight",
                                       "ppm.progressive.fc2.bias", "ppm.progressive.ln.gain"};
  for (const auto& name : names) {
    for (std::size_t index : {0, 5}) {
      Fixture base(8, 3, 11), bumped(8, 3, 11);
      bumped.params.at(name).value.mutable_value()[index] += 1e-3;
      const auto a = run(base);
      const auto b = run(bumped);
      INFO(name, " [", index, "]");
      CHECK(a.features[0].value() == b.features[0].value());
      for (std::size_t i = 1; i < l; ++i) CHECK(max_abs_diff(a.features[i].value(), b.features[i].value()) > 0.0);
    }
  }
  Fixture base(8, 3, 11), bumped(8, 3, 11);
  bumped.params.at("ppm.initial.fc2.weight").value.mutable_value()[3] += 1e-3;
  const auto a = run(base);
  const auto b = run(bumped);
  for (std::size_t i = 0; i < l; ++i) CHECK(max_abs_diff(a.features[i].value(), b.features[i].value()) > 0.0);
}

TEST_CASE("rollout probabilities stay on the simplex and are reproducible") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Fixture fx(16, 5, seed);
    Rng rng(seed + 100);
    const Var s = Var::constant(random_tensor(1, 16, rng, 3.0));
    const Var f = Var::constant(random_tensor(1, 16, rng, 3.0));
    for (Mode mode : {Mode::train, Mode::eval}) {
      Rng a(seed), b(seed);
      const auto r1 = Rollout::from(rollout(s, f, fx.ppm, 6, mode, a, 0.1));
      const auto r2 = Rollout::from(rollout(s, f, fx.ppm, 6, mode, b, 0.1));
      CHECK(r1.features == r2.features);
      CHECK(r1.probs == r2.probs);
      CHECK(r1.features.all_finite());
      for (std::size_t i = 0; i < 6; ++i) {
        CHECK(std::abs(ttpp::test::row_sum(r1.probs, i) - 1.0) < 1e-9);
        for (double v : r1.probs.row_span(i)) CHECK((v > 0.0 && v < 1.0));
      }
    }
  }
}

TEST_CASE("rollout gradient through four steps") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Fixture fx(8, 3, seed);
    Rng rng(seed + 50);
    const Var s = Var::leaf(random_tensor(1, 8, rng));
    const Var f = Var::leaf(random_tensor(1, 8, rng));
    const Tensor target = random_tensor(4, 8, rng);
    const Tensor proj = random_tensor(4, 3, rng);
    std::vector<Var> leaves{s, f};
    for (const auto& p : fx.params.items()) leaves.push_back(p.value);
    auto loss = [&] {
      Rng mask(seed);
      const auto r = rollout(s, f, fx.ppm, 4, Mode::train, mask, 0.1);
      return add(sum_squares(sub(r.stacked_features(), Var::constant(target))),
                 sum(mul(r.stacked_probs(), Var::constant(proj))));
    };
    worst = std::max(worst, grad_check(loss, leaves));
  }
  CHECK(worst < 1e-4);
}
