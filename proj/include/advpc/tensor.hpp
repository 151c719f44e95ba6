#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace advpc {
class Rng;
}

namespace advpc::nn {

// Dense row-major matrix of doubles. Vectors are 1 x n.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);

  std::vector<std::size_t> shape() const { return {rows, cols}; }
  std::size_t size() const noexcept { return data.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool same_shape(const Tensor& o) const noexcept { return rows == o.rows && cols == o.cols; }
  bool operator==(const Tensor&) const = default;
};

// Named parameter tensors with paired gradient storage.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> values;
  std::vector<Tensor> grads;

  std::size_t add(std::string name, Tensor init);
  std::size_t index(std::string_view name) const;
  std::size_t size() const noexcept { return values.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  std::vector<Tensor> zeros_like() const;
  void accumulate_grads(const std::vector<Tensor>& g, double weight = 1.0);
  bool all_finite() const;

  bool operator==(const ParamSet& o) const { return names == o.names && values == o.values; }
};

// Gaussian init with std = gain / sqrt(fan_in).
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, double gain, Rng& rng);

// SGD with momentum and L2 weight decay.
class SgdMomentum {
 public:
  SgdMomentum(const ParamSet& params, double lr, double momentum, double weight_decay);
  void step(ParamSet& params);
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_;
  double momentum_;
  double weight_decay_;
  std::vector<Tensor> velocity_;
};

class Adam {
 public:
  Adam(const ParamSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(ParamSet& params);
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace advpc::nn
