#include "ttpp/ttm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ttpp/errors.hpp"

namespace ttpp {

namespace {

// weights[L_q×L_k] · values[L_k×d_v], each output summed in sorted order so a
// joint permutation of the memory axis reproduces the result bit for bit.
Var mix_memory(const Var& weights, const Var& values) {
  const std::size_t lq = weights.rows(), lk = weights.cols(), dv = values.cols();
  Tensor out({lq, dv});
  std::vector<double> terms(lk);
  for (std::size_t i = 0; i < lq; ++i) {
    for (std::size_t c = 0; c < dv; ++c) {
      for (std::size_t j = 0; j < lk; ++j) terms[j] = weights.value()(i, j) * values.value()(j, c);
      std::sort(terms.begin(), terms.end());
      double total = 0.0;
      for (double t : terms) total += t;
      out(i, c) = total;
    }
  }
  auto wn = weights.node();
  auto vn = values.node();
  return Var::from_op(std::move(out), {weights, values}, [wn, vn](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& w = wn->value;
    const Tensor& v = vn->value;
    if (wn->requires_grad) {
      Tensor gw(w.shape());
      for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j)
          for (std::size_t c = 0; c < v.cols(); ++c) gw(i, j) += g(i, c) * v(j, c);
      wn->accumulate(gw);
    }
    if (vn->requires_grad) {
      Tensor gv(v.shape());
      for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j)
          for (std::size_t c = 0; c < v.cols(); ++c) gv(j, c) += w(i, j) * g(i, c);
      vn->accumulate(gv);
    }
  });
}

}  // namespace

PositionalTable positional_encoding(std::size_t max_positions, std::size_t d_model) {
  if (max_positions < 1 || d_model < 2) throw ContractError("positional_encoding needs T >= 1 and d_model >= 2");
  Tensor pe({max_positions, d_model});
  for (std::size_t pos = 0; pos < max_positions; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return PositionalTable{std::move(pe)};
}

TTMParams TTMParams::create(ParameterSet& params, const std::string& prefix, std::size_t d_model, std::size_t heads,
                            Rng& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("number of heads (" + std::to_string(heads) + ") must divide d_model (" +
                      std::to_string(d_model) + ")");
  }
  TTMParams p;
  p.d_model = d_model;
  p.heads = heads;
  const std::size_t dh = d_model / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string idx = std::to_string(h);
    p.w_query.push_back(params.add(prefix + ".w_query." + idx, glorot_uniform(d_model, dh, rng)));
    p.w_key.push_back(params.add(prefix + ".w_key." + idx, glorot_uniform(d_model, dh, rng)));
    p.w_value.push_back(params.add(prefix + ".w_value." + idx, glorot_uniform(d_model, dh, rng)));
  }
  p.w_out = params.add(prefix + ".w_out", glorot_uniform(heads * dh, d_model, rng));
  return p;
}

std::size_t TTMParams::count(std::size_t d_model) { return 3 * d_model * d_model + d_model * d_model; }

AttentionResult attention(const Var& query, const Var& key, const Var& value) {
  return attention(query, key, value, query.cols());
}

AttentionResult attention(const Var& query, const Var& key, const Var& value, std::size_t scale_dim) {
  if (key.rows() == 0 || value.rows() == 0) throw EmptyMemoryError("attention over empty memory");
  if (key.rows() != value.rows()) {
    throw DimensionError("attention: key " + shape_string(key.shape()) + " and value " + shape_string(value.shape()) +
                         " disagree on memory length");
  }
  if (query.cols() != key.cols()) {
    throw DimensionError("attention: query " + shape_string(query.shape()) + " and key " + shape_string(key.shape()) +
                         " disagree on width");
  }
  Var logits = scale(matmul(query, transpose(key)), 1.0 / std::sqrt(static_cast<double>(scale_dim)));
  Var weights = softmax(logits);
  return AttentionResult{mix_memory(weights, value), weights.value()};
}

MultiHeadResult multi_head(const Var& query, const Var& memory, const TTMParams& params) {
  if (memory.rows() == 0) throw EmptyMemoryError("multi-head attention needs at least one memory element");
  if (query.cols() != params.d_model || memory.cols() != params.d_model) {
    throw DimensionError("multi_head: query " + shape_string(query.shape()) + " / memory " +
                         shape_string(memory.shape()) + " do not match d_model " + std::to_string(params.d_model));
  }
  MultiHeadResult out;
  std::vector<Var> heads;
  heads.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    auto r = attention(matmul(query, params.w_query[h]), matmul(memory, params.w_key[h]),
                       matmul(memory, params.w_value[h]), params.d_model);
    heads.push_back(r.output);
    out.head_weights.push_back(std::move(r.weights));
  }
  Var joined = heads.size() == 1 ? heads.front() : concat_cols(heads);
  out.output = matmul(joined, params.w_out);
  return out;
}

AggregateResult aggregate(const Var& sequence, const TTMParams& params, const PositionalTable& pe, bool shortcut) {
  const std::size_t steps = sequence.rows();
  if (steps < 2) throw SequenceTooShortError("temporal aggregation needs at least 2 observed chunks, got " +
                                     std::to_string(steps));
  if (pe.max_positions() < steps || pe.dim() != sequence.cols()) {
    throw DimensionError("positional table " + shape_string(pe.table.shape()) + " cannot encode sequence " +
                         shape_string(sequence.shape()));
  }
  const auto first = pe.table.values().begin();
  Tensor rows({steps, pe.dim()},
              std::vector<double>(first, first + static_cast<std::ptrdiff_t>(steps * pe.dim())));
  Var encoded = add(sequence, Var::constant(std::move(rows)));
  Var query = slice_rows(encoded, steps - 1, 1);
  Var memory = slice_rows(encoded, 0, steps - 1);
  auto mh = multi_head(query, memory, params);
  AggregateResult out;
  out.aggregated = shortcut ? add(mh.output, query) : mh.output;
  out.query = query;
  out.head_weights = std::move(mh.head_weights);
  return out;
}

}  // namespace ttpp
