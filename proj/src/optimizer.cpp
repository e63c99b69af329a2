#include "futureseg/optimizer.hpp"

#include <cmath>

#include "futureseg/error.hpp"

namespace futureseg {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0,1)");
  }
  if (!(eps > 0.0)) throw ConfigError("adam: eps must be > 0");
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t t, const AdamConfig& cfg) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ShapeError("adam: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw Error("adam: step index starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    param[i] = static_cast<T>(param[i] - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<NamedParam<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& p : params_) {
    m_.emplace_back(p.var.dims());
    v_.emplace_back(p.var.dims());
  }
}

template <typename T>
void Adam<T>::step(const GradientSet<T>& grads) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<T>& var = params_[i].var;
    const Tensor<T> g = grads.of(var);
    g.check_finite("gradient");
    Tensor<T> value = var.value();
    adam_update<T>(value.data(), g.data(), m_[i].data(), v_[i].data(), t_, cfg_);
    var.assign(std::move(value));
  }
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                 std::uint64_t, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, std::uint64_t, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace futureseg
