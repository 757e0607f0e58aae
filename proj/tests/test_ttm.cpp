#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "ttpp/errors.hpp"
#include "ttpp/grad_check.hpp"
#include "ttpp/parameter.hpp"
#include "ttpp/ttm.hpp"

using namespace ttpp;
using ttpp::test::random_tensor;

namespace {

Tensor naive_attention(const Tensor& q, const Tensor& k, const Tensor& v, double divisor, Tensor* weights = nullptr) {
  Tensor out({q.rows(), v.cols()});
  Tensor w({q.rows(), k.rows()});
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<double> logits(k.rows());
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) dot += q(i, c) * k(j, c);
      logits[j] = dot / std::sqrt(divisor);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    for (std::size_t j = 0; j < k.rows(); ++j) w(i, j) = std::exp(logits[j] - mx) / z;
    for (std::size_t c = 0; c < v.cols(); ++c)
      for (std::size_t j = 0; j < k.rows(); ++j) out(i, c) += w(i, j) * v(j, c);
  }
  if (weights) *weights = w;
  return out;
}

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Tensor rows_of(const Tensor& t, const std::vector<std::size_t>& order) {
  Tensor out(t.shape());
  for (std::size_t r = 0; r < order.size(); ++r)
    std::copy(t.row_span(order[r]).begin(), t.row_span(order[r]).end(), out.row_span(r).begin());
  return out;
}

}  // namespace

TEST_CASE("positional encoding") {
  SUBCASE("row zero alternates") {
    const auto pe = positional_encoding(4, 16);
    for (std::size_t i = 0; i < 16; ++i) CHECK(pe.table(0, i) == (i % 2 == 0 ? 0.0 : 1.0));
  }
  SUBCASE("first column at position one") {
    CHECK(positional_encoding(2, 8).table(1, 0) == doctest::Approx(0.841471).epsilon(1e-6));
  }
  SUBCASE("per-entry oracle, exponent i/d for every column") {
    const auto pe = positional_encoding(8, 16);
    REQUIRE(pe.table.shape() == Shape{8, 16});
    for (std::size_t pos = 0; pos < 8; ++pos) {
      for (std::size_t i = 0; i < 16; ++i) {
        const double angle = pos * std::exp(-std::log(10000.0) * i / 16.0);
        const double expect = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        CHECK(std::abs(pe.table(pos, i) - expect) < 1e-12);
        CHECK(std::abs(pe.table(pos, i)) <= 1.0);
      }
    }
  }
  SUBCASE("neighbouring columns use different frequencies") {
    const auto pe = positional_encoding(3, 4);
    CHECK(pe.table(1, 1) == doctest::Approx(std::cos(1.0 / std::pow(10000.0, 0.25))));
  }
}

TEST_CASE("attention") {
  Rng rng(21);
  SUBCASE("single memory element returns its value") {
    const Tensor v = random_tensor(1, 5, rng);
    const auto r = attention(Var::constant(random_tensor(1, 8, rng)), Var::constant(random_tensor(1, 8, rng)),
                             Var::constant(v));
    CHECK(r.output.value() == v);
    CHECK(r.weights(0, 0) == 1.0);
  }
  SUBCASE("identical keys average the values") {
    const Tensor k_row = random_tensor(1, 8, rng);
    Tensor k({4, 8});
    for (std::size_t r = 0; r < 4; ++r) std::copy(k_row.values().begin(), k_row.values().end(), k.row_span(r).begin());
    const Tensor v = random_tensor(4, 3, rng);
    const auto r = attention(Var::constant(random_tensor(1, 8, rng)), Var::constant(k), Var::constant(v));
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t j = 0; j < 4; ++j) mean += v(j, c) / 4.0;
      CHECK(r.output.value()(0, c) == doctest::Approx(mean).epsilon(1e-14));
    }
  }
  SUBCASE("loop oracle") {
    const Tensor q = random_tensor(1, 8, rng);
    const Tensor m = random_tensor(7, 8, rng);
    Tensor w;
    const Tensor expect = naive_attention(q, m, m, 8.0, &w);
    const auto r = attention(Var::constant(q), Var::constant(m), Var::constant(m));
    CHECK(max_abs_diff(r.output.value(), expect) < 1e-10);
    CHECK(max_abs_diff(r.weights, w) < 1e-12);
    CHECK(std::abs(ttpp::test::row_sum(r.weights, 0) - 1.0) < 1e-9);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(attention(Var::constant(Tensor({1, 4})), Var::constant(Tensor({3, 5})), Var::constant(Tensor({3, 2}))),
                    DimensionError);
    CHECK_THROWS_AS(attention(Var::constant(Tensor({1, 4})), Var::constant(Tensor({3, 4})), Var::constant(Tensor({2, 2}))),
                    DimensionError);
  }
}

TEST_CASE("multi_head") {
  Rng rng(22);
  SUBCASE("one identity head reduces to plain attention") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 6, 1, rng);
    p.w_query[0].mutable_value() = Tensor::identity(6);
    p.w_key[0].mutable_value() = Tensor::identity(6);
    p.w_value[0].mutable_value() = Tensor::identity(6);
    p.w_out.mutable_value() = Tensor::identity(6);
    const Tensor q = random_tensor(1, 6, rng);
    const Tensor m = random_tensor(5, 6, rng);
    const auto mh = multi_head(Var::constant(q), Var::constant(m), p);
    const auto plain = attention(Var::constant(q), Var::constant(m), Var::constant(m));
    CHECK(mh.output.value() == plain.output.value());
  }
  SUBCASE("output shape for several head counts") {
    for (std::size_t n : {1, 2, 4, 8}) {
      ParameterSet params;
      auto p = TTMParams::create(params, "ttm", 16, n, rng);
      const auto mh = multi_head(Var::constant(random_tensor(1, 16, rng)), Var::constant(random_tensor(7, 16, rng)), p);
      CHECK(mh.output.shape() == Shape{1, 16});
      CHECK(mh.head_weights.size() == n);
      CHECK(params.count() == TTMParams::count(16));
    }
  }
  SUBCASE("per-head oracle") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 8, 2, rng);
    const Tensor q = random_tensor(1, 8, rng);
    const Tensor m = random_tensor(5, 8, rng);
    Tensor joined({1, 8});
    for (std::size_t h = 0; h < 2; ++h) {
      const Tensor head = naive_attention(naive_matmul(q, p.w_query[h].value()), naive_matmul(m, p.w_key[h].value()),
                                          naive_matmul(m, p.w_value[h].value()), 8.0);
      for (std::size_t c = 0; c < 4; ++c) joined(0, h * 4 + c) = head(0, c);
    }
    const Tensor expect = naive_matmul(joined, p.w_out.value());
    CHECK(max_abs_diff(multi_head(Var::constant(q), Var::constant(m), p).output.value(), expect) < 1e-10);
  }
  SUBCASE("heads must divide the width") {
    ParameterSet params;
    CHECK_THROWS_AS(TTMParams::create(params, "ttm", 16, 3, rng), ConfigError);
  }
  SUBCASE("output is linear in the values for fixed weights") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 8, 2, rng);
    const Var q = Var::constant(random_tensor(1, 8, rng));
    const Var m = Var::constant(random_tensor(6, 8, rng));
    const auto base = multi_head(q, m, p);
    for (auto& w : p.w_value) w.mutable_value() = scale(Var::constant(w.value()), 2.0).value();
    const auto doubled = multi_head(q, m, p);
    for (std::size_t h = 0; h < 2; ++h) CHECK(doubled.head_weights[h] == base.head_weights[h]);
    CHECK(max_abs_diff(doubled.output.value(), scale(base.output, 2.0).value()) < 1e-12);
  }
}

TEST_CASE("aggregate") {
  Rng rng(23);
  SUBCASE("two chunks: single memory element") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 8, 2, rng);
    const auto pe = positional_encoding(2, 8);
    const Tensor seq = random_tensor(2, 8, rng);
    const auto r = aggregate(Var::constant(seq), p, pe);
    for (const auto& w : r.head_weights) CHECK(w(0, 0) == 1.0);
    Tensor query({1, 8}), memory({1, 8});
    for (std::size_t c = 0; c < 8; ++c) {
      memory(0, c) = seq(0, c) + pe.table(0, c);
      query(0, c) = seq(1, c) + pe.table(1, c);
    }
    const auto mh = multi_head(Var::constant(query), Var::constant(memory), p);
    CHECK(max_abs_diff(r.aggregated.value(), add(mh.output, Var::constant(query)).value()) < 1e-15);
  }
  SUBCASE("dead output projection leaves the encoded query") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 16, 4, rng);
    p.w_out.mutable_value().fill(0.0);
    const auto pe = positional_encoding(8, 16);
    const Tensor seq = random_tensor(8, 16, rng);
    const auto r = aggregate(Var::constant(seq), p, pe);
    for (std::size_t c = 0; c < 16; ++c) CHECK(r.aggregated.value()(0, c) == seq(7, c) + pe.table(7, c));
    CHECK(r.aggregated.value() == r.query.value());
  }
  SUBCASE("weights per head are distributions over seven slots") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 16, 4, rng);
    const auto r = aggregate(Var::constant(random_tensor(8, 16, rng)), p, positional_encoding(8, 16));
    REQUIRE(r.head_weights.size() == 4);
    for (const auto& w : r.head_weights) {
      CHECK(w.shape() == Shape{1, 7});
      CHECK(std::abs(ttpp::test::row_sum(w, 0) - 1.0) < 1e-9);
    }
  }
  SUBCASE("shortcut can be disabled") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 8, 2, rng);
    const auto pe = positional_encoding(4, 8);
    const Var seq = Var::constant(random_tensor(4, 8, rng));
    const auto with = aggregate(seq, p, pe, true);
    const auto without = aggregate(seq, p, pe, false);
    CHECK(max_abs_diff(with.aggregated.value(), add(without.aggregated, with.query).value()) == 0.0);
  }
  SUBCASE("too short") {
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 8, 2, rng);
    CHECK_THROWS_AS(aggregate(Var::constant(random_tensor(1, 8, rng)), p, positional_encoding(4, 8)),
                    SequenceTooShortError);
    CHECK_THROWS_AS(aggregate(Var::constant(random_tensor(6, 8, rng)), p, positional_encoding(4, 8)), DimensionError);
  }
}

TEST_CASE("memory permutation invariance") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 16, 4, rng);
    const Tensor seq = random_tensor(8, 16, rng);
    std::vector<std::size_t> order(8);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.begin() + 7, rng);  // the query row stays last

    const PositionalTable zero{Tensor({8, 16})};
    const auto a = aggregate(Var::constant(seq), p, zero).aggregated.value();
    const auto b = aggregate(Var::constant(rows_of(seq, order)), p, zero).aggregated.value();
    CHECK(a == b);

    const auto pe = positional_encoding(8, 16);
    const PositionalTable shuffled{rows_of(pe.table, order)};
    const auto c = aggregate(Var::constant(seq), p, pe).aggregated.value();
    const auto d = aggregate(Var::constant(rows_of(seq, order)), p, shuffled).aggregated.value();
    CHECK(max_abs_diff(c, d) < 1e-9);
  }
}

TEST_CASE("positions make aggregation order sensitive") {
  Rng rng(5);
  ParameterSet params;
  auto p = TTMParams::create(params, "ttm", 16, 4, rng);
  const Tensor seq = random_tensor(8, 16, rng);
  const std::vector<std::size_t> order{1, 0, 2, 3, 4, 5, 6, 7};
  const auto pe = positional_encoding(8, 16);
  CHECK(max_abs_diff(aggregate(Var::constant(seq), p, pe).aggregated.value(),
                     aggregate(Var::constant(rows_of(seq, order)), p, pe).aggregated.value()) > 1e-6);
}

TEST_CASE("aggregate gradient") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ParameterSet params;
    auto p = TTMParams::create(params, "ttm", 8, 2, rng);
    const auto pe = positional_encoding(4, 8);
    const Var seq = Var::leaf(random_tensor(4, 8, rng));
    const Tensor proj = random_tensor(1, 8, rng);
    std::vector<Var> leaves{seq};
    for (const auto& item : params.items()) leaves.push_back(item.value);
    worst = std::max(worst, grad_check([&] { return sum(mul(aggregate(seq, p, pe).aggregated, Var::constant(proj))); },
                                       leaves));
  }
  CHECK(worst < 1e-4);
}
