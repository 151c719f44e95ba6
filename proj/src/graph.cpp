#include "advpc/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "advpc/error.hpp"

namespace advpc::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const Tensor& t) { return MapC(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }
Map view(Tensor& t) { return Map(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }

void require(bool cond, const char* what) {
  if (!cond) throw Error(std::string("graph: ") + what);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var Graph::push(Tensor value, bool requires_grad, std::function<void(Graph&, std::size_t)> bw) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tensor& Graph::grad_buf(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.val().size()) n.grad = Tensor(n.val().rows, n.val().cols);
  return n.grad;
}

const Tensor& Graph::value(Var v) const { return nodes_.at(v.id).val(); }

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.size() != n.val().size()) throw Error("graph: gradient not available");
  return n.grad;
}

Var Graph::constant(Tensor value) { return push(std::move(value), false, {}); }

Var Graph::input(Tensor value) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::param(const ParamSet& params, std::size_t index, std::size_t group) {
  Node n;
  n.param_group = group;
  n.ref = &params.values.at(index);
  n.requires_grad = true;
  n.param_index = static_cast<long>(index);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.cols == B.rows, "matmul shape mismatch");
  Tensor out(A.rows, B.cols);
  view(out).noalias() = view(A) * view(B);
  return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs(a)) view(g.grad_buf(a.id)).noalias() += view(G) * view(g.value(b)).transpose();
    if (g.needs(b)) view(g.grad_buf(b.id)).noalias() += view(g.value(a)).transpose() * view(G);
  });
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.same_shape(B), "add shape mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs(a)) view(g.grad_buf(a.id)) += view(G);
    if (g.needs(b)) view(g.grad_buf(b.id)) += view(G);
  });
}

Var Graph::sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.same_shape(B), "sub shape mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs(a)) view(g.grad_buf(a.id)) += view(G);
    if (g.needs(b)) view(g.grad_buf(b.id)) -= view(G);
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.same_shape(B), "mul shape mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs(a)) {
      Tensor& ga = g.grad_buf(a.id);
      const Tensor& vb = g.value(b);
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += G.data[i] * vb.data[i];
    }
    if (g.needs(b)) {
      Tensor& gb = g.grad_buf(b.id);
      const Tensor& va = g.value(a);
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += G.data[i] * va.data[i];
    }
  });
}

Var Graph::add_row(Var a, Var row) {
  const Tensor& A = value(a);
  const Tensor& R = value(row);
  require(R.rows == 1 && R.cols == A.cols, "add_row shape mismatch");
  Tensor out = A;
  view(out).rowwise() += view(R).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs(a)) view(g.grad_buf(a.id)) += view(G);
    if (g.needs(row)) view(g.grad_buf(row.id)).row(0) += view(G).colwise().sum();
  });
}

Var Graph::scale(Var a, double s) {
  Tensor out = value(a);
  for (auto& v : out.data) v *= s;
  return push(std::move(out), needs(a), [a, s](Graph& g, std::size_t self) {
    view(g.grad_buf(a.id)) += s * view(g.nodes_[self].grad);
  });
}

Var Graph::add_scalar(Var a, double s) {
  Tensor out = value(a);
  for (auto& v : out.data) v += s;
  return push(std::move(out), needs(a), [a](Graph& g, std::size_t self) {
    view(g.grad_buf(a.id)) += view(g.nodes_[self].grad);
  });
}

Var Graph::relu(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), needs(a), [a](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& X = g.value(a);
    Tensor& ga = g.grad_buf(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (X.data[i] > 0.0) ga.data[i] += G.data[i];
    }
  });
}

Var Graph::tanh(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data) v = std::tanh(v);
  return push(std::move(out), needs(a), [a](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& Y = g.nodes_[self].val();
    Tensor& ga = g.grad_buf(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += G.data[i] * (1.0 - Y.data[i] * Y.data[i]);
  });
}

Var Graph::silu(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data) v = v * sigmoid(v);
  return push(std::move(out), needs(a), [a](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& X = g.value(a);
    Tensor& ga = g.grad_buf(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double s = sigmoid(X.data[i]);
      ga.data[i] += G.data[i] * (s + X.data[i] * s * (1.0 - s));
    }
  });
}

Var Graph::exp(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data) v = std::exp(v);
  return push(std::move(out), needs(a), [a](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& Y = g.nodes_[self].val();
    Tensor& ga = g.grad_buf(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += G.data[i] * Y.data[i];
  });
}

Var Graph::square(Var a) {
  Tensor out = value(a);
  for (auto& v : out.data) v = v * v;
  return push(std::move(out), needs(a), [a](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    const Tensor& X = g.value(a);
    Tensor& ga = g.grad_buf(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += 2.0 * G.data[i] * X.data[i];
  });
}

Var Graph::max_rows(Var a) {
  const Tensor& A = value(a);
  require(A.rows >= 1, "max_rows on empty tensor");
  Tensor out(1, A.cols);
  std::vector<std::size_t> arg(A.cols, 0);
  for (std::size_t c = 0; c < A.cols; ++c) out.data[c] = A(0, c);
  for (std::size_t r = 1; r < A.rows; ++r) {
    for (std::size_t c = 0; c < A.cols; ++c) {
      if (A(r, c) > out.data[c]) {
        out.data[c] = A(r, c);
        arg[c] = r;
      }
    }
  }
  return push(std::move(out), needs(a), [a, arg = std::move(arg)](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    Tensor& ga = g.grad_buf(a.id);
    for (std::size_t c = 0; c < arg.size(); ++c) ga(arg[c], c) += G.data[c];
  });
}

Var Graph::concat_cols(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.rows == B.rows, "concat_cols row mismatch");
  Tensor out(A.rows, A.cols + B.cols);
  view(out).leftCols(static_cast<Eigen::Index>(A.cols)) = view(A);
  view(out).rightCols(static_cast<Eigen::Index>(B.cols)) = view(B);
  const auto ac = static_cast<Eigen::Index>(A.cols);
  const auto bc = static_cast<Eigen::Index>(B.cols);
  return push(std::move(out), needs(a) || needs(b), [a, b, ac, bc](Graph& g, std::size_t self) {
    const Tensor& G = g.nodes_[self].grad;
    if (g.needs(a)) view(g.grad_buf(a.id)) += view(G).leftCols(ac);
    if (g.needs(b)) view(g.grad_buf(b.id)) += view(G).rightCols(bc);
  });
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = value(a);
  require(begin + count <= A.cols, "slice_cols out of range");
  Tensor out(A.rows, count);
  const auto b = static_cast<Eigen::Index>(begin);
  const auto c = static_cast<Eigen::Index>(count);
  view(out) = view(A).middleCols(b, c);
  return push(std::move(out), needs(a), [a, b, c](Graph& g, std::size_t self) {
    view(g.grad_buf(a.id)).middleCols(b, c) += view(g.nodes_[self].grad);
  });
}

Var Graph::sum(Var a) {
  const Tensor& A = value(a);
  double s = 0.0;
  for (double v : A.data) s += v;
  return push(Tensor(1, 1, s), needs(a), [a](Graph& g, std::size_t self) {
    const double G = g.nodes_[self].grad.data[0];
    for (auto& v : g.grad_buf(a.id).data) v += G;
  });
}

Var Graph::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  return scale(sum(a), 1.0 / n);
}

Var Graph::softmax_cross_entropy(Var logits, int label) {
  const Tensor& L = value(logits);
  require(L.rows == 1 && label >= 0 && static_cast<std::size_t>(label) < L.cols,
          "softmax_cross_entropy: bad label or shape");
  const double mx = *std::max_element(L.data.begin(), L.data.end());
  double z = 0.0;
  for (double v : L.data) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  std::vector<double> prob(L.cols);
  for (std::size_t c = 0; c < L.cols; ++c) prob[c] = std::exp(L.data[c] - log_z);
  const double loss = log_z - L.data[static_cast<std::size_t>(label)];
  return push(Tensor(1, 1, loss), needs(logits),
              [logits, label, prob = std::move(prob)](Graph& g, std::size_t self) {
                const double G = g.nodes_[self].grad.data[0];
                Tensor& gl = g.grad_buf(logits.id);
                for (std::size_t c = 0; c < prob.size(); ++c) {
                  gl.data[c] += G * (prob[c] - (static_cast<int>(c) == label ? 1.0 : 0.0));
                }
              });
}

void Graph::backward(Var loss, std::vector<Tensor>* param_grads) {
  std::vector<Tensor>* groups[1] = {param_grads};
  backward(loss, std::span<std::vector<Tensor>* const>(groups, 1));
}

void Graph::backward(Var loss, std::span<std::vector<Tensor>* const> group_grads) {
  require(value(loss).size() == 1, "backward needs a scalar loss");
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buf(loss.id).data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param_index >= 0 && n.param_group < group_grads.size() && group_grads[n.param_group]) {
      Tensor& dst = (*group_grads[n.param_group])[static_cast<std::size_t>(n.param_index)];
      for (std::size_t j = 0; j < dst.size(); ++j) dst.data[j] += n.grad.data[j];
    }
  }
}

}  // namespace advpc::nn
