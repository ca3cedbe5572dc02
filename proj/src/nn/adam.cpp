#include "e2emd/nn/adam.hpp"

#include <cmath>

namespace e2emd::nn {

void validate(const AdamConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

template <typename T>
BasicAdamState<T> BasicAdamState<T>::init(const BasicWeightStore<T>& weights, const std::vector<std::string>& trainable) {
  BasicAdamState state;
  for (const auto& name : trainable) {
    auto it = weights.find(name);
    if (it == weights.end()) throw ConsistencyError("Adam state requested for unknown tensor " + name);
    state.first_moment.emplace(name, BasicTensor<T>(it->second.shape()));
    state.second_moment.emplace(name, BasicTensor<T>(it->second.shape()));
  }
  return state;
}

template <typename T>
void adam_step(BasicWeightStore<T>& weights, const BasicWeightStore<T>& grads, BasicAdamState<T>& state,
               const AdamConfig& cfg) {
  validate(cfg);
  for (const auto& [name, m] : state.first_moment) {
    auto g = grads.find(name);
    if (g == grads.end()) throw ConsistencyError("no gradient for trainable tensor " + name);
    auto w = weights.find(name);
    if (w == weights.end()) throw ConsistencyError("optimizer tracks tensor " + name + " missing from the weights");
    if (g->second.shape() != m.shape() || w->second.shape() != m.shape()) {
      throw DimensionError("gradient/weight/moment shapes disagree for " + name);
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  for (auto& [name, m] : state.first_moment) {
    BasicTensor<T>& v = state.second_moment.at(name);
    BasicTensor<T>& w = weights.at(name);
    const BasicTensor<T>& g = grads.at(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const double m_hat = static_cast<double>(m[i]) / correction1;
      const double v_hat = static_cast<double>(v[i]) / correction2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

template struct BasicAdamState<float>;
template struct BasicAdamState<double>;
template void adam_step<float>(WeightStore&, const WeightStore&, AdamState&, const AdamConfig&);
template void adam_step<double>(WeightStore64&, const WeightStore64&, BasicAdamState<double>&, const AdamConfig&);

}  // namespace e2emd::nn
