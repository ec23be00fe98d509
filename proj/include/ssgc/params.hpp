#pragma once

#include <deque>
#include <random>
#include <unordered_map>

#include "ssgc/tensor.hpp"

namespace ssgc {

struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;
  std::vector<double> velocity;
  double lr_scale = 1.0;
  bool has_grad = false;
};

// Named, insertion-ordered parameters with per-parameter momentum buffers.
class ParamSet {
 public:
  Parameter& add(const std::string& name, Tensor init, double lr_scale = 1.0) {
    if (index_.contains(name)) throw Error(ErrorCode::InvalidConfig, "duplicate parameter " + name);
    index_.emplace(name, params_.size());
    Parameter p;
    p.name = name;
    p.grad.assign(init.size(), 0.0);
    p.velocity.assign(init.size(), 0.0);
    p.value = std::move(init);
    p.lr_scale = lr_scale;
    params_.push_back(std::move(p));
    return params_.back();
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::InvalidConfig, "unknown parameter " + name);
    return params_[it->second];
  }
  const Parameter& at(const std::string& name) const { return const_cast<ParamSet*>(this)->at(name); }

  void zero_grad() {
    for (auto& p : params_) {
      std::fill(p.grad.begin(), p.grad.end(), 0.0);
      p.has_grad = false;
    }
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;  // stable addresses; the tape keeps pointers
  std::unordered_map<std::string, std::size_t> index_;
};

// U(-sqrt(1/fan_in), +sqrt(1/fan_in)).
inline Tensor fan_in_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

}  // namespace ssgc
