#include "gatas/optimizer.hpp"

#include <cmath>

#include "gatas/error.hpp"

namespace gatas {

template <typename T>
Nadam<T>::Nadam(nn::ParameterStore<T>& params, NadamOptions options)
    : params_(&params), options_(options) {
  if (!(options.learning_rate > 0) || !(options.beta1 >= 0 && options.beta1 < 1) ||
      !(options.beta2 >= 0 && options.beta2 < 1) || !(options.epsilon > 0)) {
    throw ConfigError("invalid Nadam settings");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_.push_back(nn::Matrix<T>::Zero(params[k].value.rows(), params[k].value.cols()));
    v_.push_back(m_.back());
  }
}

template <typename T>
void Nadam<T>::step() {
  if (params_->size() != m_.size()) throw ShapeError("parameter set changed after optimizer creation");
  for (std::size_t k = 0; k < params_->size(); ++k) {
    const auto& p = (*params_)[k];
    if (p.grad.size() != 0 && !p.grad.allFinite()) {
      throw NumericError("non-finite gradient for parameter '" + p.name + "'");
    }
  }
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double t = static_cast<double>(steps_);
  const double c_next = 1.0 - std::pow(b1, t + 1.0);
  const double c_now = 1.0 - std::pow(b1, t);
  const double c_v = 1.0 - std::pow(b2, t);
  const T lr = static_cast<T>(options_.learning_rate);
  const T eps = static_cast<T>(options_.epsilon);
  for (std::size_t k = 0; k < params_->size(); ++k) {
    auto& p = (*params_)[k];
    if (p.grad.size() == 0) continue;
    m_[k] = static_cast<T>(b1) * m_[k] + static_cast<T>(1 - b1) * p.grad;
    v_[k] = static_cast<T>(b2) * v_[k] + static_cast<T>(1 - b2) * p.grad.cwiseProduct(p.grad);
    const nn::Matrix<T> m_hat =
        static_cast<T>(b1 / c_next) * m_[k] + static_cast<T>((1 - b1) / c_now) * p.grad;
    const nn::Matrix<T> v_hat = v_[k] / static_cast<T>(c_v);
    p.value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
  }
}

template class Nadam<float>;
template class Nadam<double>;

}  // namespace gatas
