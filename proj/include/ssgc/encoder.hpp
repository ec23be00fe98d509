#pragma once

#include <cctype>
#include <optional>

#include "ssgc/autograd.hpp"

namespace ssgc {

enum class Variant { Ssgco, Mlp, Conv1d, GraphConv, ConvThenGraph, GraphThenConv };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Ssgco: return "SSGCO";
    case Variant::Mlp: return "MLP";
    case Variant::Conv1d: return "Conv1D";
    case Variant::GraphConv: return "GraphConv";
    case Variant::ConvThenGraph: return "Conv1D-Graph";
    case Variant::GraphThenConv: return "Graph-Conv1D";
  }
  return "?";
}

// Case-insensitive: "ssgco" and "SSGCO" both parse.
inline Variant parse_variant(const std::string& s) {
  auto lower = [](std::string x) {
    for (auto& c : x) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return x;
  };
  for (auto v : {Variant::Ssgco, Variant::Mlp, Variant::Conv1d, Variant::GraphConv, Variant::ConvThenGraph,
                 Variant::GraphThenConv})
    if (lower(s) == lower(to_string(v))) return v;
  throw Error(ErrorCode::InvalidConfig, "unknown encoder variant '" + s + "'");
}

struct SsgcoConfig {
  std::size_t input_dim = 20;
  std::size_t layers = 2;
  std::vector<std::size_t> kernels;   // empty: 7, 5, 3, 3, ...
  std::vector<std::size_t> channels;  // empty: 16, 32, 64, 64, ...
  Variant variant = Variant::Ssgco;
  bool batch_norm = true;
  double bn_eps = 1e-5;

  std::size_t kernel(std::size_t l) const {
    if (l < kernels.size()) return kernels[l];
    return std::max<std::size_t>(3, 7 > 2 * l ? 7 - 2 * l : 3);
  }
  std::size_t channel(std::size_t l) const {
    if (l < channels.size()) return channels[l];
    return std::min<std::size_t>(64, std::size_t{16} << std::min<std::size_t>(l, 3));
  }
};

enum class BlockKind { Fused, Conv, Graph, Dense };

// One layer of an encoder, with the spectral view (channels x length) of its
// input and output. Flat dims are channels * length.
struct Block {
  BlockKind kind;
  std::size_t index;  // parameter prefix "layer<index>"
  std::size_t in_channels, in_length;
  std::size_t out_channels, out_length;
  std::size_t kernel;  // conv blocks only
  bool activation;

  std::size_t in_dim() const { return in_channels * in_length; }
  std::size_t out_dim() const { return out_channels * out_length; }
};

namespace detail {

inline Block conv_block(BlockKind kind, std::size_t index, std::size_t cin, std::size_t len, std::size_t cout,
                        std::size_t k) {
  if (k == 0 || k > len)
    throw Error(ErrorCode::SpectralLengthUnderflow, "layer " + std::to_string(index) + ": kernel " + std::to_string(k) +
                                                        " exceeds spectral length " + std::to_string(len));
  return {kind, index, cin, len, cout, len - k + 1, k, true};
}

}  // namespace detail

// Layer plan for the configured variant. Dense/graph-only variants reuse the
// flat width of the matching SSGCO layer so output dims line up.
inline std::vector<Block> plan_encoder(const SsgcoConfig& cfg) {
  if (cfg.layers < 1) throw Error(ErrorCode::InvalidConfig, "encoder needs at least one layer");
  if (cfg.input_dim < 1) throw Error(ErrorCode::InvalidConfig, "encoder input dim must be positive");
  std::vector<Block> conv_plan;
  {
    std::size_t c = 1, len = cfg.input_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      conv_plan.push_back(detail::conv_block(BlockKind::Conv, l, c, len, cfg.channel(l), cfg.kernel(l)));
      c = conv_plan.back().out_channels;
      len = conv_plan.back().out_length;
    }
  }
  std::vector<Block> plan;
  const std::size_t head = (cfg.layers + 1) / 2;
  switch (cfg.variant) {
    case Variant::Ssgco:
      for (auto b : conv_plan) plan.push_back({BlockKind::Fused, b.index, b.in_channels, b.in_length, b.out_channels,
                                               b.out_length, b.kernel, true});
      break;
    case Variant::Conv1d:
      plan = conv_plan;
      break;
    case Variant::Mlp:
    case Variant::GraphConv: {
      const auto kind = cfg.variant == Variant::Mlp ? BlockKind::Dense : BlockKind::Graph;
      std::size_t in = cfg.input_dim;
      for (const auto& b : conv_plan) {
        plan.push_back({kind, b.index, 1, in, 1, b.out_dim(), 0, true});
        in = b.out_dim();
      }
      break;
    }
    case Variant::ConvThenGraph: {
      for (std::size_t l = 0; l < head; ++l) plan.push_back(conv_plan[l]);
      const auto last = plan.back();
      for (std::size_t l = head; l < cfg.layers; ++l)
        plan.push_back({BlockKind::Graph, l, last.out_channels, last.out_length, last.out_channels, last.out_length, 0,
                        true});
      break;
    }
    case Variant::GraphThenConv: {
      for (std::size_t l = 0; l < head; ++l)
        plan.push_back({BlockKind::Graph, l, 1, cfg.input_dim, 1, cfg.input_dim, 0, true});
      std::size_t c = 1, len = cfg.input_dim;
      for (std::size_t l = head; l < cfg.layers; ++l) {
        plan.push_back(detail::conv_block(BlockKind::Conv, l, c, len, cfg.channel(l - head), cfg.kernel(l - head)));
        c = plan.back().out_channels;
        len = plan.back().out_length;
      }
      break;
    }
  }
  plan.back().activation = false;
  return plan;
}

inline std::size_t encoder_output_dim(const SsgcoConfig& cfg) { return plan_encoder(cfg).back().out_dim(); }

// Adds encoder parameters under `prefix` (fan-in uniform weights, BN scale 1
// and shift 0).
inline void init_encoder(ParamSet& params, const SsgcoConfig& cfg, std::mt19937_64& rng,
                         const std::string& prefix = "enc.") {
  for (const auto& b : plan_encoder(cfg)) {
    const std::string layer = prefix + "layer" + std::to_string(b.index) + ".";
    const bool conv = b.kind == BlockKind::Fused || b.kind == BlockKind::Conv;
    if (conv) {
      params.add(layer + "conv.weight",
                 fan_in_uniform({b.out_channels, b.in_channels, b.kernel}, b.in_channels * b.kernel, rng));
      params.add(layer + "conv_bn.gamma", Tensor({b.out_dim()}, 1.0));
      params.add(layer + "conv_bn.beta", Tensor({b.out_dim()}, 0.0));
    }
    if (b.kind != BlockKind::Conv) {
      const std::size_t in = b.kind == BlockKind::Fused ? b.out_dim() : b.in_dim();
      params.add(layer + "dense.weight", fan_in_uniform({in, b.out_dim()}, in, rng));
      params.add(layer + "dense_bn.gamma", Tensor({b.out_dim()}, 1.0));
      params.add(layer + "dense_bn.beta", Tensor({b.out_dim()}, 0.0));
    }
  }
}

// Resolves parameter names to tape variables; trainable bindings receive
// gradients, frozen ones are recorded as constants.
class Binder {
 public:
  Binder(Tape& tape, ParamSet& params, bool trainable) : tape_(tape), params_(params), trainable_(trainable) {}

  Var operator()(const std::string& name) const {
    auto& p = params_.at(name);
    return trainable_ ? tape_.param(p) : tape_.constant(p.value);
  }
  Tape& tape() const { return tape_; }

 private:
  Tape& tape_;
  ParamSet& params_;
  bool trainable_;
};

// Optional record of (stage, shape) pairs produced during a forward pass.
using ShapeTrace = std::vector<std::pair<std::string, std::vector<std::size_t>>>;

namespace detail {

inline Var maybe_bn(const Binder& bind, const SsgcoConfig& cfg, Var x, const std::string& name, ShapeTrace* trace) {
  if (!cfg.batch_norm) return x;
  Var y = batch_norm(x, bind(name + ".gamma"), bind(name + ".beta"), cfg.bn_eps);
  if (trace) trace->emplace_back("BN", y.shape());
  return y;
}

inline void note(ShapeTrace* trace, const char* stage, Var v) {
  if (trace) trace->emplace_back(stage, v.shape());
}

}  // namespace detail

// Forward pass of the configured encoder. H_0 = X; every SSGCO layer is
//   reshape -> conv1d -> BN -> flatten -> Â(.) -> W^g -> BN -> ReLU
// with no activation after the final layer.
inline Var forward_encoder(const Binder& bind, const SsgcoConfig& cfg, Var x, const AdjacencyOperand& adj,
                           ShapeTrace* trace = nullptr, const std::string& prefix = "enc.") {
  const auto plan = plan_encoder(cfg);
  require(x.value().rank() == 2 && x.value().dim(1) == cfg.input_dim,
          "encoder input " + shape_str(x.shape()) + " expects width " + std::to_string(cfg.input_dim));
  const std::size_t m = x.value().dim(0);
  Var h = x;
  detail::note(trace, "Input", h);
  for (const auto& b : plan) {
    const std::string layer = prefix + "layer" + std::to_string(b.index) + ".";
    if (b.kind == BlockKind::Fused || b.kind == BlockKind::Conv) {
      h = reshape(h, {m, b.in_channels, b.in_length});
      detail::note(trace, "Reshape", h);
      h = conv1d(h, bind(layer + "conv.weight"));
      detail::note(trace, "1D-Conv", h);
      h = detail::maybe_bn(bind, cfg, h, layer + "conv_bn", trace);
      h = reshape(h, {m, b.out_dim()});
      detail::note(trace, "Reshape", h);
    }
    if (b.kind == BlockKind::Fused || b.kind == BlockKind::Graph) {
      h = matmul(graph_aggregate(adj, h), bind(layer + "dense.weight"));
      detail::note(trace, "Graph-Conv", h);
      h = detail::maybe_bn(bind, cfg, h, layer + "dense_bn", trace);
    } else if (b.kind == BlockKind::Dense) {
      h = matmul(h, bind(layer + "dense.weight"));
      detail::note(trace, "Linear", h);
      h = detail::maybe_bn(bind, cfg, h, layer + "dense_bn", trace);
    }
    if (b.activation) h = relu(h);
  }
  return h;
}

// Two-layer predictor g: affine -> BN -> ReLU -> affine. Its parameters
// carry a 10x learning-rate multiplier.
struct PredictorConfig {
  std::size_t dim = 0;
  std::size_t hidden = 512;
  double lr_scale = 10.0;
};

inline void init_predictor(ParamSet& params, const PredictorConfig& cfg, std::mt19937_64& rng,
                           const std::string& prefix = "pred.") {
  const double s = cfg.lr_scale;
  params.add(prefix + "fc1.weight", fan_in_uniform({cfg.dim, cfg.hidden}, cfg.dim, rng), s);
  params.add(prefix + "fc1.bias", fan_in_uniform({cfg.hidden}, cfg.dim, rng), s);
  params.add(prefix + "bn.gamma", Tensor({cfg.hidden}, 1.0), s);
  params.add(prefix + "bn.beta", Tensor({cfg.hidden}, 0.0), s);
  params.add(prefix + "fc2.weight", fan_in_uniform({cfg.hidden, cfg.dim}, cfg.hidden, rng), s);
  params.add(prefix + "fc2.bias", fan_in_uniform({cfg.dim}, cfg.hidden, rng), s);
}

inline Var forward_predictor(const Binder& bind, Var v, const std::string& prefix = "pred.") {
  Var h = add_row_bias(matmul(v, bind(prefix + "fc1.weight")), bind(prefix + "fc1.bias"));
  h = relu(batch_norm(h, bind(prefix + "bn.gamma"), bind(prefix + "bn.beta")));
  return add_row_bias(matmul(h, bind(prefix + "fc2.weight")), bind(prefix + "fc2.bias"));
}

// theta' <- m * theta' + (1 - m) * theta for every target parameter.
inline void momentum_update_target(ParamSet& target, const ParamSet& online, double m) {
  for (auto& tp : target) {
    const auto& op = online.at(tp.name);
    if (op.value.shape != tp.value.shape) throw Error(ErrorCode::ShapeMismatch, "target/online shape for " + tp.name);
    for (std::size_t i = 0; i < tp.value.size(); ++i)
      tp.value.data[i] = m * tp.value.data[i] + (1.0 - m) * op.value.data[i];
  }
}

// Copies the parameters whose names start with `prefix`.
inline ParamSet clone_params(const ParamSet& src, const std::string& prefix) {
  ParamSet out;
  for (const auto& p : src)
    if (p.name.starts_with(prefix)) out.add(p.name, p.value, p.lr_scale);
  return out;
}

}  // namespace ssgc
