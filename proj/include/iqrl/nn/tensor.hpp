#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "iqrl/error.hpp"
#include "iqrl/random.hpp"

namespace iqrl::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

/// Dense row-major array of doubles. One- and two-dimensional tensors are the
/// only ones the layers produce; the container itself accepts any rank.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
    }
  }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) {
    requires_grad_ = flag;
    if (!flag) grad_.reset();
  }

  /// Gradient buffer, created zeroed on first access.
  std::vector<double>& grad() {
    if (!grad_) grad_.emplace(data_.size(), 0.0);
    return *grad_;
  }
  bool has_grad() const { return grad_.has_value(); }
  const std::vector<double>* grad_if_present() const { return grad_ ? &*grad_ : nullptr; }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape& shape) {
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }

  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

/// Named model parameters. Iteration follows name order, so serialization and
/// optimizer updates are deterministic.
class ParameterSet {
 public:
  explicit ParameterSet(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

  std::uint64_t rng_seed() const { return rng_seed_; }

  /// Adds a parameter holding uniform(-scale, scale) values drawn from a
  /// stream derived from the set's seed and the parameter name.
  Tensor& add_uniform(const std::string& name, Shape shape, double scale) {
    Tensor t(std::move(shape));
    Rng rng = derive_rng(rng_seed_, name);
    for (double& v : t.data()) v = uniform(rng, -scale, scale);
    return add(name, std::move(t));
  }

  Tensor& add_zeros(const std::string& name, Shape shape) { return add(name, Tensor(std::move(shape))); }

  Tensor& add(const std::string& name, Tensor tensor) {
    if (params_.contains(name)) throw Error("duplicate parameter name '" + name + "'");
    tensor.set_requires_grad(true);
    return params_.emplace(name, std::move(tensor)).first->second;
  }

  bool contains(const std::string& name) const { return params_.contains(name); }

  Tensor& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.params_ == b.params_; }

 private:
  std::uint64_t rng_seed_;
  std::map<std::string, Tensor> params_;
};

}  // namespace iqrl::nn
