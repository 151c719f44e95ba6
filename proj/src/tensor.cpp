#include "advpc/tensor.hpp"

#include <cmath>

#include "advpc/error.hpp"
#include "advpc/rng.hpp"

namespace advpc::nn {

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw Error("Tensor: data length does not match shape");
}

std::size_t ParamSet::add(std::string name, Tensor init) {
  names.push_back(std::move(name));
  grads.emplace_back(init.rows, init.cols);
  values.push_back(std::move(init));
  return values.size() - 1;
}

std::size_t ParamSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw Error("ParamSet: no parameter named " + std::string(name));
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
}

std::vector<Tensor> ParamSet::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(values.size());
  for (const auto& v : values) out.emplace_back(v.rows, v.cols);
  return out;
}

void ParamSet::accumulate_grads(const std::vector<Tensor>& g, double weight) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t j = 0; j < grads[i].size(); ++j) grads[i].data[j] += weight * g[i].data[j];
  }
}

bool ParamSet::all_finite() const {
  for (const auto& v : values) {
    for (double x : v.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, double gain, Rng& rng) {
  Tensor w(fan_in, fan_out);
  const double sd = gain / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w.data) v = sd * rng.normal();
  return w;
}

SgdMomentum::SgdMomentum(const ParamSet& params, double lr, double momentum, double weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay), velocity_(params.zeros_like()) {}

void SgdMomentum::step(ParamSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params.values[i].data;
    const auto& g = params.grads[i].data;
    auto& vel = velocity_[i].data;
    for (std::size_t j = 0; j < w.size(); ++j) {
      vel[j] = momentum_ * vel[j] + g[j] + weight_decay_ * w[j];
      w[j] -= lr_ * vel[j];
    }
  }
}

Adam::Adam(const ParamSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(params.zeros_like()),
      v_(params.zeros_like()) {}

void Adam::step(ParamSet& params) {
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params.values[i].data;
    const auto& g = params.grads[i].data;
    auto& m = m_[i].data;
    auto& v = v_[i].data;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

}  // namespace advpc::nn
