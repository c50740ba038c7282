#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/core/tape.hpp"
#include "resdyn/core/tensor.hpp"

namespace resdyn::core {

struct Param {
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
};

/// Named trainable parameters with accumulated gradients and Adam state.
/// std::map keys keep every traversal (stepping, serialization, gradient
/// checking) in a fixed name order, which determinism depends on.
class ParamStore {
 public:
  Tensor& create(const std::string& name, std::size_t rows, std::size_t cols) {
    RESDYN_REQUIRE(!params_.count(name), "param store: duplicate parameter '" << name << "'");
    Param p{Tensor(rows, cols), Tensor(rows, cols), Tensor(rows, cols), Tensor(rows, cols)};
    auto [it, ok] = params_.emplace(name, std::move(p));
    (void)ok;
    return it->second.value;
  }

  bool has(const std::string& name) const { return params_.count(name) != 0; }

  Param& at(const std::string& name) {
    auto it = params_.find(name);
    RESDYN_REQUIRE(it != params_.end(), "param store: unknown parameter '" << name << "'");
    return it->second;
  }

  const Param& at(const std::string& name) const {
    auto it = params_.find(name);
    RESDYN_REQUIRE(it != params_.end(), "param store: unknown parameter '" << name << "'");
    return it->second;
  }

  std::map<std::string, Param>& entries() { return params_; }
  const std::map<std::string, Param>& entries() const { return params_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
  }

  void zero_grads() {
    for (auto& [name, p] : params_) p.grad.fill(0.0);
  }

  /// Bias-corrected Adam update on the accumulated gradients; gradients
  /// are cleared afterwards so each optimizer step starts fresh.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
    for (auto& [name, p] : params_) {
      double* w = p.value.data();
      double* g = p.grad.data();
      double* m = p.adam_m.data();
      double* v = p.adam_v.data();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        g[i] = 0.0;
      }
    }
  }

  std::int64_t adam_step_count() const { return adam_t_; }
  void set_adam_step_count(std::int64_t t) { adam_t_ = t; }

  std::vector<double> gather_values() const { return gather([](const Param& p) -> const Tensor& { return p.value; }); }
  std::vector<double> gather_grads() const { return gather([](const Param& p) -> const Tensor& { return p.grad; }); }

  void scatter_values(const std::vector<double>& flat) {
    RESDYN_REQUIRE(flat.size() == scalar_count(), "param store: flat size mismatch");
    std::size_t k = 0;
    for (auto& [name, p] : params_)
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value.data()[i] = flat[k++];
  }

  /// Name of the parameter owning flat index k, plus the offset within it.
  std::pair<std::string, std::size_t> locate(std::size_t k) const {
    for (const auto& [name, p] : params_) {
      if (k < p.value.size()) return {name, k};
      k -= p.value.size();
    }
    RESDYN_REQUIRE(false, "param store: flat index out of range");
    return {};
  }

 private:
  template <typename Pick>
  std::vector<double> gather(Pick pick) const {
    std::vector<double> flat;
    flat.reserve(scalar_count());
    for (const auto& [name, p] : params_) {
      const Tensor& t = pick(p);
      flat.insert(flat.end(), t.data(), t.data() + t.size());
    }
    return flat;
  }

  std::map<std::string, Param> params_;
  std::int64_t adam_t_ = 0;
};

/// Exposes store parameters as tape leaves for one forward/backward pass
/// and routes the resulting tape gradients back into the store.
class TapeBinding {
 public:
  TapeBinding(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  NodeId operator()(const std::string& name) {
    NodeId id = tape_->leaf(store_->at(name).value);
    bound_.emplace_back(name, id);
    return id;
  }

  void accumulate_grads() {
    for (const auto& [name, id] : bound_) {
      Tensor& g = store_->at(name).grad;
      const Tensor dg = tape_->grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += dg.data()[i];
    }
  }

 private:
  Tape* tape_;
  ParamStore* store_;
  std::vector<std::pair<std::string, NodeId>> bound_;
};

}  // namespace resdyn::core
