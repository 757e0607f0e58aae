#pragma once

#include <string>
#include <vector>

#include "ttpp/autograd.hpp"
#include "ttpp/parameter.hpp"

namespace ttpp {

/// Sinusoidal position table, T_max × d_model.
///
/// Entry (pos, i) is sin(pos / 10000^(i/d)) for even i and cos(...) for odd i.
/// The exponent is i/d for every column, not the 2⌊i/2⌋/d pairing of the
/// original Transformer, so neighbouring sin/cos columns use different
/// frequencies.
struct PositionalTable {
  Tensor table;

  std::size_t max_positions() const { return table.rows(); }
  std::size_t dim() const { return table.cols(); }
};

PositionalTable positional_encoding(std::size_t max_positions, std::size_t d_model);

/// Per-head projections and the output projection of the temporal
/// transformer. Every head projects d_model → d_model / heads.
struct TTMParams {
  std::size_t d_model = 0;
  std::size_t heads = 0;
  std::vector<Var> w_query;
  std::vector<Var> w_key;
  std::vector<Var> w_value;
  Var w_out;  // (heads · d_head) × d_model

  std::size_t head_dim() const { return d_model / heads; }

  static TTMParams create(ParameterSet& params, const std::string& prefix, std::size_t d_model, std::size_t heads,
                          Rng& rng);
  /// Closed-form weight count: three d×d/n projections per head plus W^o.
  static std::size_t count(std::size_t d_model);
};

struct AttentionResult {
  Var output;      // L_q × d_v
  Tensor weights;  // L_q × L_k, rows on the simplex
};

/// softmax(Q Kᵀ / sqrt(scale_dim)) V. The default divisor uses Q's width.
AttentionResult attention(const Var& query, const Var& key, const Var& value);
AttentionResult attention(const Var& query, const Var& key, const Var& value, std::size_t scale_dim);

struct MultiHeadResult {
  Var output;                        // 1 × d_model
  std::vector<Tensor> head_weights;  // one 1 × L_k row per head
};

/// Concat(h_1..h_n) W^o with h_i = attention(q W^Q_i, M W^K_i, M W^V_i).
/// Every head scales logits by sqrt(d_model), not sqrt(d_head).
MultiHeadResult multi_head(const Var& query, const Var& memory, const TTMParams& params);

struct AggregateResult {
  Var aggregated;  // S_t, 1 × d_model
  Var query;       // position-encoded current feature
  std::vector<Tensor> head_weights;
};

/// Adds positions to all T rows, attends from the last row over the first
/// T−1, and returns S_t = A_t + f_t (or A_t alone with `shortcut = false`).
AggregateResult aggregate(const Var& sequence, const TTMParams& params, const PositionalTable& pe,
                          bool shortcut = true);

}  // namespace ttpp
