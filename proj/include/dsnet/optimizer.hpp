#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dsnet/tensor.hpp"

namespace dsnet {

enum class ScheduleKind { constant, step_decay };

// Step decay: lr0 * gamma^floor(step / period). Constant ignores the knobs.
struct LrSchedule {
    ScheduleKind kind = ScheduleKind::step_decay;
    double gamma = 0.5;
    long period = 2000;
};

inline double lr_at(long step, const LrSchedule& schedule, double lr0) {
    if (step < 0) throw ContractError("lr_at: negative step");
    if (schedule.kind == ScheduleKind::constant) return lr0;
    return lr0 * std::pow(schedule.gamma, static_cast<double>(step / schedule.period));
}

// SGD with momentum and L2 weight decay. The velocity folds in the learning
// rate: v <- mu*v - lr*(g + wd*theta); theta <- theta + v.
template <typename T>
struct SgdState {
    double lr0 = 1e-3;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LrSchedule schedule;
    long step_count = 0;
    std::vector<std::pair<std::string, BasicTensor<T>>> velocity;  // ordered by first use

    void validate() const {
        if (!(lr0 > 0.0)) throw ContractError("sgd: learning rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw ContractError("sgd: momentum must be in [0, 1)");
        if (weight_decay < 0.0) throw ContractError("sgd: weight decay must be >= 0");
    }

    double current_lr() const { return lr_at(step_count, schedule, lr0); }

    BasicTensor<T>& velocity_for(const std::string& name, const Shape& shape) {
        for (auto& [n, v] : velocity)
            if (n == name) {
                if (v.shape != shape)
                    throw ContractError("sgd: velocity shape changed for '" + name + "'");
                return v;
            }
        velocity.emplace_back(name, BasicTensor<T>(shape));
        return velocity.back().second;
    }
};

// One update over every parameter the model exposes. Gradients are left
// untouched; the caller resets them between steps.
template <typename T, typename Model>
void sgd_step(Model& model, SgdState<T>& state) {
    state.validate();
    const double lr = state.current_lr();
    const double mu = state.momentum;
    const double wd = state.weight_decay;
    model.for_each_param([&](const std::string& name, BasicTensor<T>& p) {
        if (!p.has_grad())
            throw ContractError("sgd_step: parameter '" + name + "' has no gradient");
        BasicTensor<T>& v = state.velocity_for(name, p.shape);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double g = static_cast<double>(p.grad[i]) +
                             wd * static_cast<double>(p.data[i]);
            v.data[i] = static_cast<T>(mu * static_cast<double>(v.data[i]) - lr * g);
            p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) +
                                       static_cast<double>(v.data[i]));
        }
    });
    ++state.step_count;
}

}  // namespace dsnet
