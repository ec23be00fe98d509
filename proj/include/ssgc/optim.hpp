#pragma once

#include <numbers>

#include "ssgc/binio.hpp"
#include "ssgc/params.hpp"

namespace ssgc {

// Classical SGD with coupled weight decay:
//   v <- momentum * v + grad + weight_decay * theta
//   theta <- theta - lr * lr_scale * v
inline void sgd_step(ParamSet& params, double lr, double weight_decay, double momentum) {
  for (auto& p : params)
    if (!p.has_grad) throw Error(ErrorCode::MissingGradient, "no gradient for " + p.name);
  for (auto& p : params) {
    const double step = lr * p.lr_scale;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.velocity[i] = momentum * p.velocity[i] + p.grad[i] + weight_decay * p.value.data[i];
      p.value.data[i] -= step * p.velocity[i];
    }
  }
}

// 0.5 * lr0 * (1 + cos(pi * t / T)).
inline double cosine_lr(double t, double total, double lr0) {
  if (total <= 0.0) return lr0;
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * t / total));
}

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline void append_params(NamedTensors& out, const std::string& prefix, const ParamSet& params) {
  for (const auto& p : params) out.emplace_back(prefix + p.name, p.value);
}

struct Checkpoint {
  NamedTensors tensors;
  binio::json meta;

  const Tensor& at(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw Error(ErrorCode::MalformedHeader, "checkpoint has no tensor " + name);
  }
  bool contains(const std::string& name) const {
    return std::any_of(tensors.begin(), tensors.end(), [&](const auto& e) { return e.first == name; });
  }

  // Copies every tensor named prefix + p.name into the matching parameter.
  void restore(const std::string& prefix, ParamSet& params) const {
    for (auto& p : params) {
      const auto& t = at(prefix + p.name);
      if (t.shape != p.value.shape)
        throw Error(ErrorCode::ShapeMismatch, "checkpoint shape for " + p.name + " is " + shape_str(t.shape));
      p.value = t;
    }
  }
};

// JSON index line followed by little-endian f64 payload.
inline void save_checkpoint(const std::string& path, const NamedTensors& tensors, const binio::json& meta = {}) {
  binio::json index = binio::json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    index.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
    for (double v : t.data) binio::append_le(payload, v);
    offset += t.size();
  }
  binio::json header = {{"format", "ssgc-checkpoint"}, {"version", 1}, {"dtype", "f64"}, {"tensors", index}};
  if (!meta.is_null()) header["meta"] = meta;
  binio::write_framed(path, header, payload);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  auto f = binio::read_framed(path);
  if (f.header.value("format", "") != "ssgc-checkpoint")
    throw Error(ErrorCode::MalformedHeader, path + ": not a checkpoint");
  Checkpoint ck;
  ck.meta = f.header.value("meta", binio::json{});
  const std::size_t total = f.payload.size() / 8;
  if (f.payload.size() % 8 != 0) throw Error(ErrorCode::SizeMismatch, path + ": ragged payload");
  for (const auto& e : f.header.at("tensors")) {
    std::vector<std::size_t> shape = e.at("shape").get<std::vector<std::size_t>>();
    const std::size_t off = e.at("offset").get<std::size_t>();
    const std::size_t n = Tensor::count(shape);
    if (off + n > total) throw Error(ErrorCode::SizeMismatch, path + ": tensor runs past payload");
    Tensor t(shape);
    for (std::size_t i = 0; i < n; ++i) t.data[i] = binio::read_le<double>(f.payload.data() + (off + i) * 8);
    ck.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
  }
  return ck;
}

}  // namespace ssgc
