#pragma once

#include <cmath>
#include <vector>

#include "wsseg/nn/unet.hpp"

namespace wsseg::nn {

/// Adam with bias correction and a constant learning rate.
template <typename T>
class Adam {
 public:
  explicit Adam(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

  /// params -= lr * m_hat / (sqrt(v_hat) + eps); `grads` is not modified.
  void step(ModelParams<T>& params, const ModelParams<T>& grads) {
    if (m_.empty()) {
      for (const auto& v : params.values) {
        m_.emplace_back(v.size(), 0.0);
        v_.emplace_back(v.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.values.size(); ++k) {
      auto& p = params.values[k];
      const auto& g = grads.values[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
        v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
        p[i] -= static_cast<T>(lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
      }
    }
  }

  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace wsseg::nn
