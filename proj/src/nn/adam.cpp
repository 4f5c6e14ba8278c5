#include "eyedrive/nn/adam.hpp"

#include <cmath>

namespace eyedrive::nn {

template <typename T>
AdamState<T>::AdamState(const std::vector<Parameter<T>*>& params, AdamConfig cfg) : config(cfg) {
  for (const Parameter<T>* p : params) {
    first_moment.emplace_back(p->value.shape());
    second_moment.emplace_back(p->value.shape());
  }
}

template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Parameter<T>*>& params) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter<T>& p = *params[i];
    if (p.value.shape() != state.first_moment[i].shape() || p.grad.size() != p.value.size()) {
      throw ShapeError("adam parameter " + std::to_string(i) + " shape " +
                       shape_to_string(p.value.shape()) + " does not match its moments");
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    T* m = state.first_moment[i].data();
    T* v = state.second_moment[i].data();
    T* w = p.value.data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      const double mj = c.beta1 * static_cast<double>(m[j]) + (1.0 - c.beta1) * g;
      const double vj = c.beta2 * static_cast<double>(v[j]) + (1.0 - c.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / correction1;
      const double v_hat = vj / correction2;
      w[j] = static_cast<T>(static_cast<double>(w[j]) -
                            c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(AdamState<float>&, const std::vector<Parameter<float>*>&);
template void adam_step(AdamState<double>&, const std::vector<Parameter<double>*>&);

}  // namespace eyedrive::nn
