#include "ttpp/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "ttpp/errors.hpp"

namespace ttpp {

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 operand, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// C[m×n] = A[m×k] B[k×n]
Tensor gemm_nn(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.row_span(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = b.row_span(p).data();
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// C[m×n] = A[m×k] B[n×k]ᵀ
Tensor gemm_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.row_span(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.row_span(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c(i, j) = s;
    }
  }
  return c;
}

// C[k×n] = A[m×k]ᵀ B[m×n]
Tensor gemm_tn(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({k, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b.row_span(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      double* crow = c.row_span(p).data();
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out = x;
  for (auto& v : out.values()) v = f(v);
  return out;
}

}  // namespace

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    grad = g;
    return;
  }
  auto& dst = grad.values();
  const auto& src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

Var Var::leaf(Tensor value, bool requires_grad) {
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  v.node_->requires_grad = requires_grad;
  return v;
}

Var Var::from_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  const bool any = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
  if (any) {
    v.node_->requires_grad = true;
    v.node_->parents.reserve(parents.size());
    for (auto& p : parents) v.node_->parents.push_back(p.node_);
    v.node_->backward = std::move(backward);
  }
  return v;
}

double Var::item() const {
  if (value().size() != 1) {
    throw ContractError("item() on non-scalar tensor " + shape_string(shape()));
  }
  return value()[0];
}

void Var::zero_grad() { node_->grad = Tensor(node_->value.shape()); }

void Var::clear_grad() { node_->grad = Tensor(); }

void Var::backward() const {
  if (value().size() != 1) {
    throw ContractError("backward() requires a scalar output, got " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(Tensor(node_->value.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) {
      n->backward(*n);
      // Interior gradients are not needed once propagated.
      n->grad = Tensor();
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require_rank2(a.value(), "matmul");
  require_rank2(b.value(), "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  auto an = a.node(), bn = b.node();
  return Var::from_op(gemm_nn(a.value(), b.value()), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) an->accumulate(gemm_nt(self.grad, bn->value));
    if (bn->requires_grad) bn->accumulate(gemm_tn(an->value, self.grad));
  });
}

Var transpose(const Var& x) {
  require_rank2(x.value(), "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = x.value()(i, j);
  auto xn = x.node();
  return Var::from_op(std::move(out), {x}, [xn, m, n](Node& self) {
    Tensor g({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) = self.grad(j, i);
    xn->accumulate(g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var::from_op(std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) bn->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var::from_op(std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad);
    if (bn->requires_grad) bn->accumulate(map(self.grad, [](double g) { return -g; }));
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var::from_op(std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= bn->value[i];
      an->accumulate(g);
    }
    if (bn->requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= an->value[i];
      bn->accumulate(g);
    }
  });
}

Var scale(const Var& x, double s) {
  auto xn = x.node();
  return Var::from_op(map(x.value(), [s](double v) { return v * s; }), {x}, [xn, s](Node& self) {
    xn->accumulate(map(self.grad, [s](double g) { return g * s; }));
  });
}

Var add_row(const Var& x, const Var& b) {
  require_rank2(x.value(), "add_row");
  require_rank2(b.value(), "add_row");
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw DimensionError("add_row: bias " + shape_string(b.shape()) + " does not broadcast over " +
                         shape_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = x.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += b.value()(0, j);
  auto xn = x.node(), bn = b.node();
  return Var::from_op(std::move(out), {x, b}, [xn, bn, m, n](Node& self) {
    if (xn->requires_grad) xn->accumulate(self.grad);
    if (bn->requires_grad) {
      Tensor g({1, n});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g(0, j) += self.grad(i, j);
      bn->accumulate(g);
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) { return add_row(matmul(x, weight), bias); }

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_rank2(p.value(), "concat_cols");
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row counts differ, " + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()));
    }
    n += p.cols();
  }
  Tensor out({m, n});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, off + j) = p.value()(i, j);
    off += p.cols();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return Var::from_op(std::move(out), parts, [nodes, offsets, m](Node& self) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k]->requires_grad) continue;
      const std::size_t w = nodes[k]->value.cols();
      Tensor g({m, w});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g(i, j) = self.grad(i, offsets[k] + j);
      nodes[k]->accumulate(g);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no operands");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_rank2(p.value(), "concat_rows");
    if (p.cols() != n) {
      throw DimensionError("concat_rows: column counts differ, " + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()));
    }
    m += p.rows();
  }
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& p : parts) data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return Var::from_op(Tensor({m, n}, std::move(data)), parts, [nodes, n](Node& self) {
    std::size_t off = 0;
    for (const auto& node : nodes) {
      const std::size_t len = node->value.size();
      if (node->requires_grad) {
        std::vector<double> g(self.grad.values().begin() + static_cast<std::ptrdiff_t>(off),
                              self.grad.values().begin() + static_cast<std::ptrdiff_t>(off + len));
        node->accumulate(Tensor({len / n, n}, std::move(g)));
      }
      off += len;
    }
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t count) {
  require_rank2(x.value(), "slice_cols");
  if (count == 0 || begin + count > x.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const std::size_t m = x.rows();
  Tensor out({m, count});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x.value()(i, begin + j);
  auto xn = x.node();
  return Var::from_op(std::move(out), {x}, [xn, begin, count, m](Node& self) {
    Tensor& g = xn->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) g(i, begin + j) += self.grad(i, j);
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t count) {
  require_rank2(x.value(), "slice_rows");
  if (count == 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const std::size_t n = x.cols();
  const auto first = x.value().values().begin() + static_cast<std::ptrdiff_t>(begin * n);
  Tensor out({count, n}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * n)));
  auto xn = x.node();
  return Var::from_op(std::move(out), {x}, [xn, begin, count, n](Node& self) {
    Tensor& g = xn->grad_buffer();
    for (std::size_t k = 0; k < count * n; ++k) g[begin * n + k] += self.grad[k];
  });
}

Var softmax(const Var& x) {
  require_rank2(x.value(), "softmax");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const auto in = x.value().row_span(i);
    const double mx = *std::max_element(in.begin(), in.end());
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < n; ++j) terms[j] = out(i, j) = std::exp(in[j] - mx);
    // Summing in sorted order makes the result independent of column order.
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    for (std::size_t j = 0; j < n; ++j) out(i, j) /= total;
  }
  auto xn = x.node();
  Tensor y = out;
  return Var::from_op(std::move(out), {x}, [xn, y = std::move(y), m, n](Node& self) {
    Tensor g({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < n; ++j) g(i, j) = y(i, j) * (self.grad(i, j) - dot);
    }
    xn->accumulate(g);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require_rank2(x.value(), "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  for (const Var* p : {&gain, &bias}) {
    if (p->value().rank() != 2 || p->rows() != 1 || p->cols() != n) {
      throw DimensionError("layer_norm: affine parameter " + shape_string(p->shape()) +
                           " does not match last extent of " + shape_string(x.shape()));
    }
  }
  Tensor xhat({m, n});
  std::vector<double> inv_std(m);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const auto in = x.value().row_span(i);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (in[j] - mean) * inv_std[i];
      out(i, j) = xhat(i, j) * gain.value()(0, j) + bias.value()(0, j);
    }
  }
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  return Var::from_op(std::move(out), {x, gain, bias},
                      [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), m, n](Node& self) {
                        const Tensor& dy = self.grad;
                        if (gn->requires_grad || bn->requires_grad) {
                          Tensor dg({1, n}), db({1, n});
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < n; ++j) {
                              dg(0, j) += dy(i, j) * xhat(i, j);
                              db(0, j) += dy(i, j);
                            }
                          if (gn->requires_grad) gn->accumulate(dg);
                          if (bn->requires_grad) bn->accumulate(db);
                        }
                        if (xn->requires_grad) {
                          Tensor dx({m, n});
                          const double inv_n = 1.0 / static_cast<double>(n);
                          for (std::size_t i = 0; i < m; ++i) {
                            double sum_d = 0.0, sum_dx = 0.0;
                            for (std::size_t j = 0; j < n; ++j) {
                              const double d = dy(i, j) * gn->value(0, j);
                              sum_d += d;
                              sum_dx += d * xhat(i, j);
                            }
                            for (std::size_t j = 0; j < n; ++j) {
                              const double d = dy(i, j) * gn->value(0, j);
                              dx(i, j) = inv_std[i] * (d - inv_n * sum_d - xhat(i, j) * inv_n * sum_dx);
                            }
                          }
                          xn->accumulate(dx);
                        }
                      });
}

Var relu(const Var& x) {
  auto xn = x.node();
  return Var::from_op(map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {x}, [xn](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(xn->value[i] > 0.0)) g[i] = 0.0;
    xn->accumulate(g);
  });
}

Var dropout(const Var& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return x;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  for (auto& v : mask.values()) v = uniform(rng) >= rate ? keep_scale : 0.0;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  auto xn = x.node();
  return Var::from_op(std::move(out), {x}, [xn, mask = std::move(mask)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
    xn->accumulate(g);
  });
}

Var relu_dropout(const Var& x, double rate, Mode mode, Rng& rng) { return dropout(relu(x), rate, mode, rng); }

Var sigmoid(const Var& x) {
  Tensor y = map(x.value(), [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  auto xn = x.node();
  Tensor saved = y;
  return Var::from_op(std::move(y), {x}, [xn, y = std::move(saved)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
    xn->accumulate(g);
  });
}

Var tanh(const Var& x) {
  Tensor y = map(x.value(), [](double v) { return std::tanh(v); });
  auto xn = x.node();
  Tensor saved = y;
  return Var::from_op(std::move(y), {x}, [xn, y = std::move(saved)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
    xn->accumulate(g);
  });
}

Var log_clamped(const Var& x, double floor) {
  auto xn = x.node();
  return Var::from_op(map(x.value(), [floor](double v) { return std::log(std::max(v, floor)); }), {x},
                      [xn, floor](Node& self) {
                        Tensor g = self.grad;
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          const double v = xn->value[i];
                          g[i] = v > floor ? g[i] / v : 0.0;
                        }
                        xn->accumulate(g);
                      });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  auto xn = x.node();
  return Var::from_op(Tensor({1, 1}, s), {x}, [xn](Node& self) {
    xn->accumulate(Tensor(xn->value.shape(), self.grad[0]));
  });
}

Var sum_squares(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  auto xn = x.node();
  return Var::from_op(Tensor({1, 1}, s), {x}, [xn](Node& self) {
    const double g0 = 2.0 * self.grad[0];
    xn->accumulate(map(xn->value, [g0](double v) { return g0 * v; }));
  });
}

}  // namespace ttpp
