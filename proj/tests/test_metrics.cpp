#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ap_oracle.hpp"
#include "support.hpp"
#include "ttpp/errors.hpp"
#include "ttpp/metrics.hpp"
#include "ttpp/report_io.hpp"

using namespace ttpp;
using ttpp::test::brute_force_ap;

namespace {

std::vector<ScoredFrame> frames_of(std::vector<double> scores, std::vector<int> labels) {
  std::vector<ScoredFrame> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], labels[i] == 1});
  return out;
}

std::vector<ScoredFrame> random_frames(Rng& rng, std::size_t n, int levels) {
  std::uniform_int_distribution<int> level(0, levels - 1);
  std::bernoulli_distribution coin(0.35);
  std::vector<ScoredFrame> out(n);
  for (auto& f : out) f = {static_cast<double>(level(rng)) / levels, coin(rng)};
  return out;
}

FeatureSequence labelled_sequence(std::vector<std::size_t> labels, std::size_t classes) {
  FeatureSequence seq;
  seq.video_id = "v";
  seq.classes = classes;
  seq.features = Tensor::zeros(labels.size(), 2);
  seq.labels = std::move(labels);
  return seq;
}

HorizonScorer oracle_scorer(std::size_t horizon) {
  return [horizon](const FeatureSequence& seq, std::size_t end) {
    Tensor probs = Tensor::zeros(horizon, seq.classes);
    for (std::size_t tau = 1; tau <= horizon; ++tau) {
      probs(tau - 1, end + tau < seq.length() ? seq.labels[end + tau] : 0) = 1.0;
    }
    return probs;
  };
}

}  // namespace

TEST_CASE("calibrated_ap examples") {
  CHECK(*calibrated_ap(frames_of({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0})) == 1.0);
  CHECK(*calibrated_ap(frames_of({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0})) == 5.0 / 6.0);
  CHECK(*calibrated_ap(frames_of({0.5, 0.5}, {1, 0})) == 1.0);
  CHECK(*calibrated_ap(frames_of({0.5, 0.5}, {0, 1})) == doctest::Approx(0.5));
  CHECK_FALSE(calibrated_ap(frames_of({0.1, 0.2}, {0, 0})).has_value());
  CHECK_FALSE(calibrated_ap(std::vector<ScoredFrame>{}).has_value());
  SUBCASE("calibration reweights false positives") {
    // One positive behind one negative, three negatives in total: w = 3,
    // cPrec = 1 / (1 + 1/3).
    CHECK(*calibrated_ap(frames_of({0.9, 0.8, 0.2, 0.1}, {0, 1, 0, 0})) == doctest::Approx(0.75));
    CHECK(*average_precision(frames_of({0.9, 0.8, 0.2, 0.1}, {0, 1, 0, 0})) == doctest::Approx(0.5));
  }
  SUBCASE("all frames positive") {
    CHECK(*calibrated_ap(frames_of({0.3, 0.1, 0.2}, {1, 1, 1})) == 1.0);
  }
}

TEST_CASE("average_precision examples") {
  CHECK(*average_precision(frames_of({0.9, 0.1, 0.2, 0.3, 0.4}, {1, 0, 0, 0, 0})) == 1.0);
  CHECK(*average_precision(frames_of({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0})) == 5.0 / 6.0);
  SUBCASE("equals calibrated AP when positives and negatives balance") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      auto frames = random_frames(rng, 20, 7);
      for (std::size_t i = 0; i < frames.size(); ++i) frames[i].positive = i % 2 == 0;
      std::shuffle(frames.begin(), frames.end(), rng);
      CHECK(std::abs(*average_precision(frames) - *calibrated_ap(frames)) < 1e-12);
    }
  }
  SUBCASE("50-frame instance against the cut-off oracle") {
    Rng rng(50);
    auto frames = random_frames(rng, 50, 1000);
    frames[0].positive = true;
    CHECK(std::abs(*average_precision(frames) - *brute_force_ap(frames, false)) < 1e-12);
  }
}

TEST_CASE("both AP variants match the brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> size(1, 64);
    const int levels = seed % 3 == 0 ? 4 : 1000;  // coarse levels force ties
    const auto frames = random_frames(rng, size(rng), levels);
    const auto cap = calibrated_ap(frames);
    const auto ap = average_precision(frames);
    const auto cap_ref = brute_force_ap(frames, true);
    const auto ap_ref = brute_force_ap(frames, false);
    REQUIRE(cap.has_value() == cap_ref.has_value());
    REQUIRE(ap.has_value() == ap_ref.has_value());
    if (!cap) continue;
    CHECK(std::abs(*cap - *cap_ref) < 1e-12);
    CHECK(std::abs(*ap - *ap_ref) < 1e-12);
    CHECK((*cap >= 0.0 && *cap <= 1.0));
    CHECK((*ap >= 0.0 && *ap <= 1.0));
  }
}

TEST_CASE("AP depends only on the ranking") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    auto frames = random_frames(rng, 40, seed % 2 == 0 ? 5 : 1000);
    frames[1].positive = true;
    for (auto transform : {+[](double s) { return 3.0 * s - 7.0; }, +[](double s) { return std::exp(5.0 * s); },
                           +[](double s) { return std::atan(s) + s * s * s; }}) {
      auto moved = frames;
      for (auto& f : moved) f.score = transform(f.score);
      CHECK(*calibrated_ap(moved) == *calibrated_ap(frames));
      CHECK(*average_precision(moved) == *average_precision(frames));
    }
  }
}

TEST_CASE("accuracy") {
  const std::vector<std::size_t> a{0, 1, 1, 0};
  const std::vector<std::size_t> b{1, 0, 0, 1};
  const std::vector<std::size_t> c{0, 1, 1, 1};
  CHECK(accuracy(a, a) == 1.0);
  CHECK(accuracy(a, b) == 0.0);
  CHECK(accuracy(a, c) == 0.75);
  CHECK_THROWS_AS(accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}), ContractError);
  CHECK_THROWS_AS(accuracy(a, std::vector<std::size_t>{0, 1}), ContractError);
}

TEST_CASE("metric names and horizon labels") {
  CHECK(parse_metric("cAP") == Metric::cap);
  CHECK(parse_metric("map") == Metric::map);
  CHECK(to_string(parse_metric("acc")) == "ACC");
  CHECK_THROWS_AS(parse_metric("auc"), ConfigError);
  CHECK(horizon_label(1, 0.25) == "0.25s");
  CHECK(horizon_label(2, 0.25) == "0.5s");
  CHECK(horizon_label(4, 0.25) == "1.0s");
  CHECK(horizon_label(8, 0.25) == "2.0s");
}

TEST_CASE("evaluate_horizons") {
  const std::vector<FeatureSequence> seqs{labelled_sequence({0, 1, 1, 2, 2, 0, 1, 2, 0, 0}, 3),
                                          labelled_sequence({2, 2, 1, 0, 1, 1, 2}, 3)};
  SUBCASE("single horizon") {
    const auto report = evaluate_horizons(oracle_scorer(1), seqs, 3, 1, Metric::cap);
    CHECK(report.values.size() == 1);
    CHECK(report.labels == std::vector<std::string>{"0.25s"});
    // Anchors end at chunk 2.., so chunks 3.. are scored.
    CHECK(report.positions == std::vector<std::size_t>{7 + 4});
  }
  SUBCASE("oracle scorer is perfect under every metric") {
    for (Metric m : {Metric::cap, Metric::map, Metric::acc}) {
      const auto report = evaluate_horizons(oracle_scorer(3), seqs, 3, 3, m);
      REQUIRE(report.values.size() == 3);
      for (double v : report.values) CHECK(v == 1.0);
      CHECK(report.average == 1.0);
      CHECK(report.positions == std::vector<std::size_t>{11, 9, 7});
    }
  }
  SUBCASE("background is not scored and empty classes are skipped") {
    const std::vector<FeatureSequence> two{labelled_sequence({0, 0, 1, 0, 1, 0}, 3)};
    const auto report = evaluate_horizons(oracle_scorer(1), two, 2, 1, Metric::map);
    REQUIRE(report.per_class.size() == 1);
    CHECK_FALSE(report.per_class[0][0].has_value());
    CHECK(report.per_class[0][1].has_value());
    CHECK_FALSE(report.per_class[0][2].has_value());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(evaluate_horizons(oracle_scorer(1), seqs, 12, 1, Metric::acc), ContractError);
    CHECK_THROWS_AS(evaluate_horizons(oracle_scorer(2), seqs, 3, 1, Metric::acc), DimensionError);
    CHECK_THROWS_AS(evaluate_horizons(oracle_scorer(1), std::vector<FeatureSequence>{}, 3, 1, Metric::acc),
                    ContractError);
    const std::vector<FeatureSequence> background{labelled_sequence({0, 0, 0, 0}, 2)};
    CHECK_THROWS_AS(evaluate_horizons(oracle_scorer(1), background, 2, 1, Metric::map), ContractError);
  }
}

TEST_CASE("random scores give the analytic expected AP") {
  // For a uniformly random ranking of N frames with P positives,
  // E[AP] = (H_N + (P-1)/(N-1) (N - H_N)) / N.
  constexpr int seeds = 20;
  constexpr std::size_t observed = 4;
  std::vector<double> diffs;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<FeatureSequence> seqs;
    for (int s = 0; s < 4; ++s) {
      std::vector<std::size_t> labels(50);
      for (auto& l : labels) l = coin(rng) ? 1 : 0;
      seqs.push_back(labelled_sequence(labels, 2));
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const HorizonScorer random_scorer = [&](const FeatureSequence&, std::size_t) {
      const double p = uniform(rng);
      return Tensor::matrix(1, 2, {1.0 - p, p});
    };
    const double got = evaluate_horizons(random_scorer, seqs, observed, 1, Metric::map).average;

    double n = 0.0, pos = 0.0;
    for (const auto& seq : seqs) {
      for (std::size_t u = observed; u < seq.length(); ++u) {
        n += 1.0;
        pos += seq.labels[u] == 1 ? 1.0 : 0.0;
      }
    }
    double harmonic = 0.0;
    for (int k = 1; k <= static_cast<int>(n); ++k) harmonic += 1.0 / k;
    const double expected = (harmonic + (pos - 1.0) / (n - 1.0) * (n - harmonic)) / n;
    diffs.push_back(got - expected);
  }
  const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / seeds;
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean) / (seeds - 1);
  CHECK(std::abs(mean) < 3.0 * std::sqrt(var / seeds));
}

TEST_CASE("report CSV round-trip") {
  HorizonReport a;
  a.labels = {"0.25s", "0.5s"};
  a.values = {0.5, 0.125};
  a.average = 0.3125;
  HorizonReport b = a;
  b.values = {1.0 / 3.0, 0.1};
  b.average = (1.0 / 3.0 + 0.1) / 2.0;
  ReportTable table;
  table.add("TTM-PPM", a);
  table.add("LSTM-LSTM", b);
  CHECK(table.columns == std::vector<std::string>{"0.25s", "0.5s", "Avg"});
  const std::string csv = report_to_csv(table);
  CHECK(csv.rfind("method,0.25s,0.5s,Avg\nTTM-PPM,0.5,0.125,0.3125\n", 0) == 0);
  CHECK(report_from_csv(csv) == table);
  HorizonReport c = a;
  c.labels = {"0.25s"};
  c.values = {0.5};
  CHECK_THROWS_AS(table.add("short", c), ContractError);
}

TEST_CASE("history CSV round-trip") {
  History h;
  h.push_back({1, 2.5, 1.0 / 7.0, 2.5 + 1.0 / 7.0, 0.25});
  h.push_back({2, 1.25, 0.1, 1.35, 0.5});
  const std::string csv = history_to_csv(h);
  CHECK(csv.rfind("epoch,L_c,L_r,total,acc_h1\n", 0) == 0);
  CHECK(history_from_csv(csv) == h);
}

TEST_CASE("attention CSV round-trip") {
  const std::vector<AttentionRecord> records{{"a", 7, 0, 0, 0.25}, {"a", 7, 1, 3, 1.0 / 3.0}};
  const std::string csv = attention_to_csv(records);
  CHECK(csv.rfind("video_id,t,head,memory_pos,weight\n", 0) == 0);
  CHECK(attention_from_csv(csv) == records);
}
