#include "relstance/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace relstance {

Adam::Adam(AdamConfig cfg, std::span<const std::span<double>> params) : cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("optimizer block layout changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = m_[b];
    auto& v = v_[b];
    if (p.size() != m.size() || g.size() != m.size())
      throw std::invalid_argument("optimizer block size changed");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace relstance
