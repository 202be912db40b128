#include "magna/autograd.hpp"

#include "magna/params.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace magna::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericError("non-finite constant");
  nodes_.push_back({std::move(value), {}, false, false, "constant", nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  if (!value.allFinite()) throw NumericError("non-finite leaf");
  nodes_.push_back({std::move(value), {}, requires_grad && grad_enabled_, false, "leaf", nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Param& p) {
  if (!p.value.allFinite()) throw NumericError("non-finite parameter " + p.name);
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  Param* target = &p;
  if (!grad_enabled_) {
    nodes_.push_back({p.value, {}, false, false, "param", nullptr});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }
  nodes_.push_back({p.value, {}, true, false, "param",
                    [target](Tape& t, int self) { target->grad += t.grad_buffer(self); }});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(std::string_view op, Matrix value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(std::string_view op, Matrix value, std::span<const Var> inputs,
                 BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw ShapeError(std::string(op) + ": input from a different tape");
    needs = needs || needs_grad(in.id());
  }
  if (!value.allFinite()) {
    throw NumericError("non-finite value produced by " + std::string(op));
  }
  nodes_.push_back({std::move(value), {}, needs, false, op, needs ? std::move(backward) : nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

const Matrix& Tape::grad(Var v) { return grad_buffer(v.id()); }

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ShapeError("backward: loss from a different tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_string(loss.value()));
  }
  grad_buffer(loss.id())(0, 0) += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && n.has_grad) n.backward(*this, id);
  }
}

std::size_t Tape::count_ops(std::string_view op) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.op == op; }));
}

namespace {

void require(bool ok, std::string_view op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

std::string shapes(const Var& a, const Var& b) {
  return shape_string(a.value()) + " vs " + shape_string(b.value());
}

template <typename Fwd, typename Deriv>
Var elementwise(std::string_view op, Var a, Fwd fwd, Deriv deriv) {
  const Matrix& x = a.value();
  Matrix y = x.unaryExpr(fwd);
  return a.tape()->record(op, std::move(y), {a}, [a, deriv](Tape& t, int self) {
    const Matrix& x = t.value(a.id());
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad_buffer(self);
    Matrix& ga = t.grad_buffer(a.id());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      ga.data()[i] += g.data()[i] * deriv(x.data()[i], y.data()[i]);
    }
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul", shapes(a, b));
  Matrix out;
  out.noalias() = a.value() * b.value();
  return a.tape()->record("matmul", std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_buffer(self);
    if (t.needs_grad(a.id())) t.grad_buffer(a.id()).noalias() += g * t.value(b.id()).transpose();
    if (t.needs_grad(b.id())) t.grad_buffer(b.id()).noalias() += t.value(a.id()).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt", shapes(a, b));
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return a.tape()->record("matmul_nt", std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_buffer(self);
    if (t.needs_grad(a.id())) t.grad_buffer(a.id()).noalias() += g * t.value(b.id());
    if (t.needs_grad(b.id())) t.grad_buffer(b.id()).noalias() += g.transpose() * t.value(a.id());
  });
}

Var add(Var a, Var b) { return lincomb(1.0, a, 1.0, b); }

Var lincomb(double ca, Var a, double cb, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "lincomb", shapes(a, b));
  Matrix out = ca * a.value() + cb * b.value();
  return a.tape()->record("lincomb", std::move(out), {a, b}, [a, b, ca, cb](Tape& t, int self) {
    const Matrix& g = t.grad_buffer(self);
    if (t.needs_grad(a.id())) t.grad_buffer(a.id()) += ca * g;
    if (t.needs_grad(b.id())) t.grad_buffer(b.id()) += cb * g;
  });
}

Var scale(Var a, double c) {
  Matrix out = c * a.value();
  return a.tape()->record("scale", std::move(out), {a}, [a, c](Tape& t, int self) {
    t.grad_buffer(a.id()) += c * t.grad_buffer(self);
  });
}

Var add_bias(Var a, Var bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias", shapes(a, bias));
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return a.tape()->record("add_bias", std::move(out), {a, bias}, [a, bias](Tape& t, int self) {
    const Matrix& g = t.grad_buffer(self);
    if (t.needs_grad(a.id())) t.grad_buffer(a.id()) += g;
    if (t.needs_grad(bias.id())) t.grad_buffer(bias.id()) += g.colwise().sum();
  });
}

Var hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard", shapes(a, b));
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->record("hadamard", std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad_buffer(self);
    if (t.needs_grad(a.id())) t.grad_buffer(a.id()) += g.cwiseProduct(t.value(b.id()));
    if (t.needs_grad(b.id())) t.grad_buffer(b.id()) += g.cwiseProduct(t.value(a.id()));
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols", "row count mismatch " + shapes(parts.front(), p));
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape()->record("concat_cols", std::move(out), parts,
                                      [inputs](Tape& t, int self) {
                                        const Matrix& g = t.grad_buffer(self);
                                        Eigen::Index at = 0;
                                        for (const Var& p : inputs) {
                                          const Eigen::Index c = t.value(p.id()).cols();
                                          if (t.needs_grad(p.id())) {
                                            t.grad_buffer(p.id()) += g.middleCols(at, c);
                                          }
                                          at += c;
                                        }
                                      });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= a.cols(), "slice_cols",
          "range out of bounds for " + shape_string(a.value()));
  Matrix out = a.value().middleCols(begin, count);
  return a.tape()->record("slice_cols", std::move(out), {a}, [a, begin, count](Tape& t, int self) {
    t.grad_buffer(a.id()).middleCols(begin, count) += t.grad_buffer(self);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record("sum", std::move(out), {a}, [a](Tape& t, int self) {
    t.grad_buffer(a.id()).array() += t.grad_buffer(self)(0, 0);
  });
}

Var leaky_relu(Var a, double slope) {
  return elementwise(
      "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var tanh(Var a) {
  return elementwise(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return elementwise(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var elu(Var a) {
  return elementwise(
      "elu", a, [](double x) { return x > 0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

Var dropout(Var a, double p, bool train, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: rate must lie in [0, 1)");
  if (!train || p == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return a.tape()->record("dropout", std::move(out), {a},
                          [a, mask = std::move(mask)](Tape& t, int self) {
                            t.grad_buffer(a.id()) += t.grad_buffer(self).cwiseProduct(mask);
                          });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d, "layer_norm", "gamma " + shapes(x, gamma));
  require(beta.rows() == 1 && beta.cols() == d, "layer_norm", "beta " + shapes(x, beta));
  Matrix xhat(n, d);
  Vector inv_std(n);
  const Matrix& xv = x.value();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return x.tape()->record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Matrix& g = t.grad_buffer(self);
        if (t.needs_grad(gamma.id())) {
          t.grad_buffer(gamma.id()) += g.cwiseProduct(xhat).colwise().sum();
        }
        if (t.needs_grad(beta.id())) t.grad_buffer(beta.id()) += g.colwise().sum();
        if (t.needs_grad(x.id())) {
          Matrix& gx = t.grad_buffer(x.id());
          const auto gam = t.value(gamma.id()).row(0).array();
          for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
            const Eigen::ArrayXd gh = (g.row(i).array() * gam).transpose();
            const Eigen::ArrayXd xh = xhat.row(i).array().transpose();
            const double m1 = gh.mean();
            const double m2 = (gh * xh).mean();
            gx.row(i).array() += (inv_std(i) * (gh - m1 - xh * m2)).transpose();
          }
        }
      });
}

Var gather_rows(Var a, std::span<const std::int32_t> index) {
  std::vector<std::int32_t> idx(index.begin(), index.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows", "row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  }
  return a.tape()->record("gather_rows", std::move(out), {a},
                          [a, idx = std::move(idx)](Tape& t, int self) {
                            const Matrix& g = t.grad_buffer(self);
                            Matrix& ga = t.grad_buffer(a.id());
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                              ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                            }
                          });
}

Var scatter_add_rows(Var a, std::span<const std::int32_t> index, Eigen::Index out_rows) {
  require(static_cast<Eigen::Index>(index.size()) == a.rows(), "scatter_add_rows",
          "index length must equal row count");
  std::vector<std::int32_t> idx(index.begin(), index.end());
  Matrix out = Matrix::Zero(out_rows, a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < out_rows, "scatter_add_rows", "row index out of range");
    out.row(idx[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  return a.tape()->record("scatter_add_rows", std::move(out), {a},
                          [a, idx = std::move(idx)](Tape& t, int self) {
                            const Matrix& g = t.grad_buffer(self);
                            Matrix& ga = t.grad_buffer(a.id());
                            for (std::size_t i = 0; i < idx.size(); ++i) {
                              ga.row(static_cast<Eigen::Index>(i)) += g.row(idx[i]);
                            }
                          });
}

Var segment_softmax(Var scores, std::span<const std::size_t> offsets) {
  require(scores.cols() == 1, "segment_softmax", "scores must be a column");
  require(!offsets.empty() && offsets.back() == static_cast<std::size_t>(scores.rows()),
          "segment_softmax", "segments must partition the edge list");
  std::vector<std::size_t> seg(offsets.begin(), offsets.end());
  const Matrix& s = scores.value();
  Matrix out(s.rows(), 1);
  for (std::size_t k = 0; k + 1 < seg.size(); ++k) {
    const auto b = static_cast<Eigen::Index>(seg[k]);
    const auto e = static_cast<Eigen::Index>(seg[k + 1]);
    if (b == e) continue;
    const double mx = s.col(0).segment(b, e - b).maxCoeff();
    double total = 0.0;
    for (Eigen::Index i = b; i < e; ++i) {
      out(i, 0) = std::exp(s(i, 0) - mx);
      total += out(i, 0);
    }
    for (Eigen::Index i = b; i < e; ++i) out(i, 0) /= total;
  }
  return scores.tape()->record(
      "segment_softmax", std::move(out), {scores}, [scores, seg = std::move(seg)](Tape& t, int self) {
        const Matrix& y = t.value(self);
        const Matrix& g = t.grad_buffer(self);
        Matrix& gs = t.grad_buffer(scores.id());
        for (std::size_t k = 0; k + 1 < seg.size(); ++k) {
          const auto b = static_cast<Eigen::Index>(seg[k]);
          const auto e = static_cast<Eigen::Index>(seg[k + 1]);
          double dot = 0.0;
          for (Eigen::Index i = b; i < e; ++i) dot += y(i, 0) * g(i, 0);
          for (Eigen::Index i = b; i < e; ++i) gs(i, 0) += y(i, 0) * (g(i, 0) - dot);
        }
      });
}

Var edge_spmm(Var att, Var h, const Graph& graph) {
  require(att.cols() == 1 && att.rows() == static_cast<Eigen::Index>(graph.num_edges()),
          "edge_spmm", "attention must be one column per edge, got " + shape_string(att.value()));
  require(h.rows() == graph.num_nodes(), "edge_spmm",
          "feature rows " + std::to_string(h.rows()) + " != num_nodes " +
              std::to_string(graph.num_nodes()));
  const Matrix& a = att.value();
  const Matrix& hv = h.value();
  const auto src = graph.sources();
  Matrix out = Matrix::Zero(hv.rows(), hv.cols());
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    const EdgeRange r = graph.incoming(i);
    for (std::size_t e = r.begin; e < r.end; ++e) {
      out.row(i) += a(static_cast<Eigen::Index>(e), 0) * hv.row(src[e]);
    }
  }
  const Graph* gp = &graph;
  return att.tape()->record("edge_spmm", std::move(out), {att, h}, [att, h, gp](Tape& t, int self) {
    const Matrix& g = t.grad_buffer(self);
    const auto src = gp->sources();
    const auto dst = gp->destinations();
    if (t.needs_grad(att.id())) {
      Matrix& ga = t.grad_buffer(att.id());
      const Matrix& hv = t.value(h.id());
      for (std::size_t e = 0; e < src.size(); ++e) {
        ga(static_cast<Eigen::Index>(e), 0) += g.row(dst[e]).dot(hv.row(src[e]));
      }
    }
    if (t.needs_grad(h.id())) {
      Matrix& gh = t.grad_buffer(h.id());
      const Matrix& a = t.value(att.id());
      for (std::size_t e = 0; e < src.size(); ++e) {
        gh.row(src[e]) += a(static_cast<Eigen::Index>(e), 0) * g.row(dst[e]);
      }
    }
  });
}

}  // namespace magna::ad
