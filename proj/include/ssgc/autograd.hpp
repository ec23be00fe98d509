#pragma once

// Tape-based reverse-mode differentiation over the small kernel set the
// encoders and losses are built from.

#include <functional>

#include "ssgc/graph.hpp"
#include "ssgc/params.hpp"
#include "ssgc/tensor.hpp"

namespace ssgc {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape; }
  std::size_t size() const { return value().size(); }
  double item() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const std::vector<double>& grad_out)>;

  Var constant(Tensor t) { return push(std::move(t), false, {}, "constant"); }
  Var leaf(Tensor t) { return push(std::move(t), true, {}, "leaf"); }

  // Binds a parameter; its gradient is added to p.grad during backward().
  Var param(Parameter& p) {
    Var v = push(p.value, true, {}, p.name.c_str());
    nodes_[v.id].sink = &p;
    return v;
  }

  // Records an op result. The node requires grad iff any input does.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward, const char* op) {
    bool rg = false;
    for (const auto& in : inputs) rg = rg || nodes_.at(in.id).requires_grad;
    return push(std::move(value), rg, rg ? std::move(backward) : Backward{}, op);
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Gradient buffer of a node for accumulation, or nullptr if it needs none.
  std::vector<double>* grad_sink(std::size_t id) {
    auto& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return &n.grad;
  }

  const std::vector<double>& grad(std::size_t id) const { return nodes_.at(id).grad; }

  void backward(Var root) {
    auto& r = nodes_.at(root.id);
    if (r.value.size() != 1) throw Error(ErrorCode::ShapeMismatch, "backward() needs a scalar root");
    if (!r.requires_grad) return;
    r.grad.assign(1, 1.0);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.sink) {
        auto& g = n.sink->grad;
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
        n.sink->has_grad = true;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* sink = nullptr;
  };

  Var push(Tensor value, bool requires_grad, Backward backward, const char* op) {
    if (!all_finite(value.data)) throw Error(ErrorCode::NonFiniteValue, std::string("non-finite output from ") + op);
    nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(backward), nullptr});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline double Var::item() const { return value().data.at(0); }

// Sparse symmetric-normalized adjacency as a tape operand: fixed CSR
// pattern, values possibly differentiable.
struct AdjacencyOperand {
  const CsrPattern* pattern = nullptr;
  Var values;
  std::size_t nodes() const { return pattern->row_ptr.size() - 1; }
};

namespace kernels {

// C (m x n) += A (m x k) * B (k x n)
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C (m x n) += A (m x k) * B^T, B is (n x k)
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      const double* ai = a + i * k;
      const double* bj = b + j * k;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
}

// C (k x n) += A^T * G, A is (m x k), G is (m x n)
inline void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * gi[j];
    }
  }
}

}  // namespace kernels

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

inline Var reshape(Var x, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape), x.value().data);
  return x.tape->record(std::move(out), {x}, [xi = x.id](Tape& t, const std::vector<double>& g) {
    if (auto* gx = t.grad_sink(xi))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  }, "reshape");
}

// Flattens everything after the leading dimension.
inline Var flatten_rows(Var x) { return reshape(x, {x.value().rows(), x.value().row_size()}); }

inline Var matmul(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0),
          "matmul " + shape_str(av.shape) + " x " + shape_str(bv.shape));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  kernels::gemm_nn(av.data.data(), bv.data.data(), out.data.data(), m, k, n);
  return a.tape->record(std::move(out), {a, b}, [ai = a.id, bi = b.id, m, k, n](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_sink(ai)) kernels::gemm_nt(g.data(), t.value(bi).data.data(), ga->data(), m, n, k);
    if (auto* gb = t.grad_sink(bi)) kernels::gemm_tn(t.value(ai).data.data(), g.data(), gb->data(), m, k, n);
  }, "matmul");
}

inline Var transpose(Var a) {
  const auto& av = a.value();
  require(av.rank() == 2, "transpose needs 2-D");
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = av.data[i * c + j];
  return a.tape->record(std::move(out), {a}, [ai = a.id, r, c](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_sink(ai))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[j * r + i];
  }, "transpose");
}

// Adds a length-F bias to every row of an M x F input.
inline Var add_row_bias(Var x, Var bias) {
  const auto& xv = x.value();
  const std::size_t f = xv.row_size();
  require(bias.size() == f, "bias length " + std::to_string(bias.size()) + " != row size " + std::to_string(f));
  Tensor out = xv;
  const auto& bv = bias.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv[i % f];
  return x.tape->record(std::move(out), {x, bias}, [xi = x.id, bi = bias.id, f](Tape& t, const std::vector<double>& g) {
    if (auto* gx = t.grad_sink(xi))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    if (auto* gb = t.grad_sink(bi))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % f] += g[i];
  }, "add_row_bias");
}

inline Var add(Var a, Var b) {
  require(a.shape() == b.shape(), "add " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  return a.tape->record(std::move(out), {a, b}, [ai = a.id, bi = b.id](Tape& t, const std::vector<double>& g) {
    for (auto id : {ai, bi})
      if (auto* gx = t.grad_sink(id))
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  }, "add");
}

inline Var scale(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data) v *= c;
  return a.tape->record(std::move(out), {a}, [ai = a.id, c](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_sink(ai))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += c * g[i];
  }, "scale");
}

// a + c for a constant tensor c of the same shape.
inline Var add_constant(Var a, const Tensor& c) {
  require(a.value().size() == c.size(), "add_constant size mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += c.data[i];
  return a.tape->record(std::move(out), {a}, [ai = a.id](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_sink(ai))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  }, "add_constant");
}

inline Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return x.tape->record(std::move(out), {x}, [xi = x.id](Tape& t, const std::vector<double>& g) {
    if (auto* gx = t.grad_sink(xi)) {
      const auto& xv = t.value(xi).data;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xv[i] > 0.0) (*gx)[i] += g[i];
    }
  }, "relu");
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data) v = sigmoid(v);
  auto y = out.data;
  return x.tape->record(std::move(out), {x}, [xi = x.id, y = std::move(y)](Tape& t, const std::vector<double>& g) {
    if (auto* gx = t.grad_sink(xi))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
  }, "sigmoid");
}

inline constexpr double kNormEps = 1e-12;

// Row-wise x / max(||x||, eps).
inline Var l2_normalize_rows(Var x) {
  const auto& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.row_size();
  Tensor out = xv;
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double n = std::max(norm2({xv.data.data() + i * c, c}), kNormEps);
    norms[i] = n;
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] /= n;
  }
  auto y = out.data;
  return x.tape->record(std::move(out), {x},
                        [xi = x.id, r, c, norms = std::move(norms), y = std::move(y)](Tape& t, const std::vector<double>& g) {
    auto* gx = t.grad_sink(xi);
    if (!gx) return;
    for (std::size_t i = 0; i < r; ++i) {
      const double* yi = y.data() + i * c;
      const double* gi = g.data() + i * c;
      if (norms[i] > kNormEps) {
        const double proj = dot({yi, c}, {gi, c});
        for (std::size_t j = 0; j < c; ++j) (*gx)[i * c + j] += (gi[j] - yi[j] * proj) / norms[i];
      } else {
        for (std::size_t j = 0; j < c; ++j) (*gx)[i * c + j] += gi[j] / kNormEps;
      }
    }
  }, "l2_normalize_rows");
}

// Valid cross-correlation: (M, Cin, L) * (Cout, Cin, k) -> (M, Cout, L-k+1).
inline Var conv1d(Var x, Var w) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  require(xv.rank() == 3 && wv.rank() == 3 && xv.dim(1) == wv.dim(1),
          "conv1d " + shape_str(xv.shape) + " * " + shape_str(wv.shape));
  const std::size_t m = xv.dim(0), cin = xv.dim(1), len = xv.dim(2);
  const std::size_t cout = wv.dim(0), k = wv.dim(2);
  if (k > len || k == 0)
    throw Error(ErrorCode::KernelTooLarge, "kernel " + std::to_string(k) + " exceeds length " + std::to_string(len));
  const std::size_t olen = len - k + 1;
  Tensor out({m, cout, olen});
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t o = 0; o < cout; ++o) {
      double* dst = out.data.data() + (s * cout + o) * olen;
      for (std::size_t c = 0; c < cin; ++c) {
        const double* src = xv.data.data() + (s * cin + c) * len;
        const double* ker = wv.data.data() + (o * cin + c) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double kw = ker[j];
          for (std::size_t p = 0; p < olen; ++p) dst[p] += kw * src[p + j];
        }
      }
    }
  return x.tape->record(std::move(out), {x, w},
                        [xi = x.id, wi = w.id, m, cin, len, cout, k, olen](Tape& t, const std::vector<double>& g) {
    auto* gx = t.grad_sink(xi);
    auto* gw = t.grad_sink(wi);
    const auto& xd = t.value(xi).data;
    const auto& wd = t.value(wi).data;
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t o = 0; o < cout; ++o) {
        const double* go = g.data() + (s * cout + o) * olen;
        for (std::size_t c = 0; c < cin; ++c) {
          const std::size_t xoff = (s * cin + c) * len;
          const std::size_t woff = (o * cin + c) * k;
          for (std::size_t j = 0; j < k; ++j) {
            if (gw) {
              double acc = 0.0;
              for (std::size_t p = 0; p < olen; ++p) acc += go[p] * xd[xoff + p + j];
              (*gw)[woff + j] += acc;
            }
            if (gx) {
              const double kw = wd[woff + j];
              for (std::size_t p = 0; p < olen; ++p) (*gx)[xoff + p + j] += kw * go[p];
            }
          }
        }
      }
  }, "conv1d");
}

// Batch normalization with batch statistics over the leading axis, one
// scale/shift per remaining position.
inline Var batch_norm(Var x, Var gamma, Var beta, double eps = 1e-5) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), f = xv.row_size();
  require(gamma.size() == f && beta.size() == f, "batch_norm parameters must have " + std::to_string(f) + " entries");
  std::vector<double> mean(f, 0.0), inv_std(f, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < f; ++j) mean[j] += xv.data[i * f + j];
  for (auto& v : mean) v /= static_cast<double>(m);
  std::vector<double> var(f, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      const double d = xv.data[i * f + j] - mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < f; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] / static_cast<double>(m) + eps);
  std::vector<double> xhat(m * f);
  Tensor out(xv.shape);
  const auto& gv = gamma.value().data;
  const auto& bv = beta.value().data;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      const double h = (xv.data[i * f + j] - mean[j]) * inv_std[j];
      xhat[i * f + j] = h;
      out.data[i * f + j] = gv[j] * h + bv[j];
    }
  return x.tape->record(std::move(out), {x, gamma, beta},
                        [xi = x.id, gi = gamma.id, bi = beta.id, m, f, xhat = std::move(xhat),
                         inv_std = std::move(inv_std)](Tape& t, const std::vector<double>& g) {
    std::vector<double> sum_g(f, 0.0), sum_gx(f, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < f; ++j) {
        sum_g[j] += g[i * f + j];
        sum_gx[j] += g[i * f + j] * xhat[i * f + j];
      }
    if (auto* gg = t.grad_sink(gi))
      for (std::size_t j = 0; j < f; ++j) (*gg)[j] += sum_gx[j];
    if (auto* gb = t.grad_sink(bi))
      for (std::size_t j = 0; j < f; ++j) (*gb)[j] += sum_g[j];
    if (auto* gx = t.grad_sink(xi)) {
      const auto& gam = t.value(gi).data;
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < f; ++j) {
          const std::size_t k = i * f + j;
          (*gx)[k] += gam[j] * inv_std[j] * (g[k] - inv_m * sum_g[j] - xhat[k] * inv_m * sum_gx[j]);
        }
    }
  }, "batch_norm");
}

// Normalized adjacency values D~^-1/2 (A + I) D~^-1/2 on the pattern, as a
// differentiable function of the edge weights.
inline Var normalize_adjacency(const SpGraph& graph, Var edge_weights) {
  require(edge_weights.size() == graph.edge_count(), "edge weight count mismatch");
  const auto& w = edge_weights.value().data;
  Tensor out({graph.pattern().nnz()}, normalized_values(graph, w));
  auto deg = self_loop_degrees(graph, w);
  return edge_weights.tape->record(std::move(out), {edge_weights},
                                   [&graph, ei = edge_weights.id, deg = std::move(deg)](Tape& t,
                                                                                         const std::vector<double>& g) {
    auto* gw = t.grad_sink(ei);
    if (!gw) return;
    const auto& pat = graph.pattern();
    const auto& w = t.value(ei).data;
    std::vector<double> gdeg(graph.nodes(), 0.0);
    for (std::size_t i = 0; i < graph.nodes(); ++i)
      for (std::size_t k = pat.row_ptr[i]; k < pat.row_ptr[i + 1]; ++k) {
        const std::size_t j = pat.col[k];
        const double inv = 1.0 / std::sqrt(deg[i] * deg[j]);
        const double a = pat.edge_of[k] < 0 ? 1.0 : w[static_cast<std::size_t>(pat.edge_of[k])];
        const double val = a * inv;
        if (pat.edge_of[k] >= 0) (*gw)[static_cast<std::size_t>(pat.edge_of[k])] += g[k] * inv;
        gdeg[i] -= 0.5 * g[k] * val / deg[i];
        gdeg[j] -= 0.5 * g[k] * val / deg[j];
      }
    for (std::size_t e = 0; e < graph.edge_count(); ++e)
      (*gw)[e] += gdeg[graph.edges()[e].u] + gdeg[graph.edges()[e].v];
  }, "normalize_adjacency");
}

// Constant operand from a graph's current weights.
inline AdjacencyOperand constant_adjacency(Tape& tape, const SpGraph& graph) {
  return {&graph.pattern(), tape.constant(Tensor({graph.pattern().nnz()}, normalized_values(graph)))};
}

// Sparse-dense product Â * H with Â given on its CSR pattern.
inline Var graph_aggregate(const AdjacencyOperand& adj, Var h) {
  const auto& hv = h.value();
  const auto& pat = *adj.pattern;
  const std::size_t m = adj.nodes();
  require(hv.rank() == 2 && hv.dim(0) == m, "graph_aggregate: H " + shape_str(hv.shape) + " vs " + std::to_string(m) + " nodes");
  require(adj.values.size() == pat.nnz(), "graph_aggregate: value count mismatch");
  const std::size_t f = hv.dim(1);
  Tensor out({m, f});
  const auto& vals = adj.values.value().data;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = pat.row_ptr[i]; k < pat.row_ptr[i + 1]; ++k) {
      const double a = vals[k];
      const double* src = hv.data.data() + pat.col[k] * f;
      double* dst = out.data.data() + i * f;
      for (std::size_t j = 0; j < f; ++j) dst[j] += a * src[j];
    }
  return h.tape->record(std::move(out), {adj.values, h},
                        [p = adj.pattern, vi = adj.values.id, hi = h.id, m, f](Tape& t, const std::vector<double>& g) {
    auto* gh = t.grad_sink(hi);
    auto* gv = t.grad_sink(vi);
    const auto& vals = t.value(vi).data;
    const auto& hd = t.value(hi).data;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = p->row_ptr[i]; k < p->row_ptr[i + 1]; ++k) {
        const std::size_t c = p->col[k];
        const double* gi = g.data() + i * f;
        if (gh) {
          const double a = vals[k];
          for (std::size_t j = 0; j < f; ++j) (*gh)[c * f + j] += a * gi[j];
        }
        if (gv) (*gv)[k] += dot({gi, f}, {hd.data() + c * f, f});
      }
  }, "graph_aggregate");
}

// Row sums grouped by segment id: out[k] = sum_{i : ids[i] == k} x[i].
inline Var segment_sum(Var x, std::vector<std::size_t> ids, std::size_t segments) {
  const auto& xv = x.value();
  require(xv.rank() == 2 && ids.size() == xv.dim(0), "segment_sum shape mismatch");
  const std::size_t f = xv.dim(1);
  Tensor out({segments, f});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] < segments, "segment id out of range");
    for (std::size_t j = 0; j < f; ++j) out.data[ids[i] * f + j] += xv.data[i * f + j];
  }
  return x.tape->record(std::move(out), {x}, [xi = x.id, ids = std::move(ids), f](Tape& t, const std::vector<double>& g) {
    if (auto* gx = t.grad_sink(xi))
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < f; ++j) (*gx)[i * f + j] += g[ids[i] * f + j];
  }, "segment_sum");
}

// (1 / rows) * sum_i ||a_i - target_i||^2 against a constant target.
inline Var mean_row_squared_error(Var a, const Tensor& target) {
  const auto& av = a.value();
  require(av.size() == target.size(), "mean_row_squared_error size mismatch");
  const double inv_rows = 1.0 / static_cast<double>(std::max<std::size_t>(av.rows(), 1));
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av.data[i] - target.data[i];
    s += d * d;
  }
  Tensor out({1}, {s * inv_rows});
  return a.tape->record(std::move(out), {a}, [ai = a.id, target, inv_rows](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_sink(ai)) {
      const auto& av = t.value(ai).data;
      for (std::size_t i = 0; i < av.size(); ++i) (*ga)[i] += g[0] * 2.0 * (av[i] - target.data[i]) * inv_rows;
    }
  }, "mean_row_squared_error");
}

// Mean over rows k of -log softmax(S_k)[k] for a square logit matrix.
inline Var diagonal_cross_entropy(Var logits) {
  const auto& sv = logits.value();
  require(sv.rank() == 2 && sv.dim(0) == sv.dim(1), "diagonal_cross_entropy needs a square matrix");
  const std::size_t k = sv.dim(0);
  std::vector<double> probs(k * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double* row = sv.data.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - mx) / z;
    loss += (mx + std::log(z)) - row[i];
  }
  Tensor out({1}, {loss / static_cast<double>(k)});
  return logits.tape->record(std::move(out), {logits},
                             [li = logits.id, k, probs = std::move(probs)](Tape& t, const std::vector<double>& g) {
    if (auto* gl = t.grad_sink(li)) {
      const double s = g[0] / static_cast<double>(k);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) (*gl)[i * k + j] += s * (probs[i * k + j] - (i == j ? 1.0 : 0.0));
    }
  }, "diagonal_cross_entropy");
}

}  // namespace ssgc
