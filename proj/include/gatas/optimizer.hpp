#pragma once

#include <cstdint>
#include <vector>

#include "gatas/tensor.hpp"

namespace gatas {

struct NadamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with Nesterov momentum and constant beta1:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
///   m_hat = b1 m / (1 - b1^(t+1)) + (1-b1) g / (1 - b1^t),  v_hat = v / (1 - b2^t)
///   w -= lr m_hat / (sqrt(v_hat) + eps)
template <typename T>
class Nadam {
 public:
  Nadam(nn::ParameterStore<T>& params, NadamOptions options = {});

  /// Applies one update from the accumulated gradients. A non-finite
  /// gradient raises NumericError naming the parameter; nothing is updated.
  void step();

  std::uint64_t steps() const { return steps_; }
  const NadamOptions& options() const { return options_; }

 private:
  nn::ParameterStore<T>* params_;
  NadamOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<nn::Matrix<T>> m_;
  std::vector<nn::Matrix<T>> v_;
};

extern template class Nadam<float>;
extern template class Nadam<double>;

}  // namespace gatas
