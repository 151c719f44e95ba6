#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "advpc/tensor.hpp"

namespace advpc::nn {

struct Var {
  std::size_t id = 0;
};

// Reverse-mode tape over 2-D tensors. Nodes are appended in evaluation
// order; backward() walks them in reverse. A graph is single-use and owned
// by one thread; parameters are referenced, never copied.
class Graph {
 public:
  Var constant(Tensor value);
  // Differentiable leaf whose gradient is readable after backward().
  Var input(Tensor value);
  // `group` selects which gradient buffer backward() accumulates into
  // when several parameter sets share one graph.
  Var param(const ParamSet& params, std::size_t index, std::size_t group = 0);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // a[n x m] + row[1 x m], broadcast over rows
  Var add_row(Var a, Var row);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  Var relu(Var a);
  Var tanh(Var a);
  Var silu(Var a);
  Var exp(Var a);
  Var square(Var a);

  // Column-wise max over rows: [n x m] -> [1 x m].
  Var max_rows(Var a);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);

  Var sum(Var a);
  Var mean(Var a);
  // logits [1 x C] -> scalar
  Var softmax_cross_entropy(Var logits, int label);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  double scalar(Var v) const { return value(v).data.at(0); }

  // Seeds d(loss)/d(loss) = 1. Parameter gradients are added into
  // `param_grads` (indexed like the ParamSet) when it is non-null.
  void backward(Var loss, std::vector<Tensor>* param_grads = nullptr);
  void backward(Var loss, std::span<std::vector<Tensor>* const> group_grads);

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor own;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    long param_index = -1;
    std::size_t param_group = 0;
    std::function<void(Graph&, std::size_t)> backward;

    const Tensor& val() const { return ref ? *ref : own; }
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Graph&, std::size_t)> bw);
  Tensor& grad_buf(std::size_t id);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace advpc::nn
