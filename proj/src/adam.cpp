#include "frans/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace frans {

void adam_step(const std::vector<Param*>& params, AdamState& state) {
    if (state.first_moment.empty()) {
        for (const Param* p : params) {
            state.first_moment.emplace_back(p->value.shape());
            state.second_moment.emplace_back(p->value.shape());
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw std::invalid_argument("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                    " tensors, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Param& p = *params[i];
        if (!p.grad.same_shape(p.value) || !state.first_moment[i].same_shape(p.value)) {
            throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(i));
        }
        if (!p.grad.all_finite()) {
            throw std::runtime_error("adam_step: non-finite gradient in parameter " + std::to_string(i));
        }
    }

    const AdamConfig& cfg = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p.value[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

}  // namespace frans
