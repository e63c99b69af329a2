#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "futureseg/autodiff.hpp"
#include "futureseg/convlstm.hpp"

namespace futureseg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// One bias-corrected Adam update of `param` in place; `t` is the 1-based step.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t t, const AdamConfig& cfg);

// Adam over a fixed list of parameters. Parameters missing from a gradient
// set are treated as having zero gradient.
template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedParam<T>> params, AdamConfig cfg);

  void step(const GradientSet<T>& grads);
  std::uint64_t steps() const { return t_; }

 private:
  std::vector<NamedParam<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace futureseg
