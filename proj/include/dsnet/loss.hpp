#pragma once

#include <string>
#include <vector>

#include "dsnet/tape.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

// Smoothing added to numerator and denominator of the differentiable DSC;
// keeps empty-vs-empty at 1 and gradients finite. Hand-value tests must
// account for it.
inline constexpr double kDiceEps = 1e-6;

// Per-head supervision weights (alpha) plus the weight of the main loss.
template <typename T>
struct SupervisionWeights {
    std::vector<T> alpha;
    T main_weight = T(1);

    static SupervisionWeights uniform(int m, T value = T(1)) {
        SupervisionWeights w;
        w.alpha.assign(static_cast<std::size_t>(m), value);
        return w;
    }

    void validate(int head_count) const {
        if (static_cast<int>(alpha.size()) != head_count)
            throw ContractError("supervision weights: " + std::to_string(alpha.size()) +
                                " alphas for " + std::to_string(head_count) + " heads");
        bool any = main_weight > T(0);
        for (T a : alpha) {
            if (a < T(0)) throw ContractError("supervision weights: alpha must be >= 0");
            if (a > T(0)) any = true;
        }
        if (main_weight < T(0)) throw ContractError("supervision weights: main weight must be >= 0");
        if (!any) throw ContractError("supervision weights: all weights are zero");
    }
};

// Loss breakdown of one training example. Values are double regardless of the
// tensor scalar type; total is recomputed from the parts.
struct LossReport {
    std::vector<double> head_losses;
    double supervised_sum = 0.0;
    double main_loss = 0.0;
    double total = 0.0;
};

// Set-form Dice coefficient 2|A∩B| / (|A|+|B|) over strictly binary masks.
// Both-empty is defined as 1.
template <typename T>
double dice_binary(const BasicTensor<T>& pred, const BasicTensor<T>& truth) {
    check_same_shape(pred, truth, "dice_binary");
    double inter = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const T p = pred.data[i], q = truth.data[i];
        if ((p != T(0) && p != T(1)) || (q != T(0) && q != T(1)))
            throw ContractError("dice_binary: inputs must be strictly {0,1}");
        inter += static_cast<double>(p) * static_cast<double>(q);
        sa += static_cast<double>(p);
        sb += static_cast<double>(q);
    }
    if (sa + sb == 0.0) return 1.0;
    return 2.0 * inter / (sa + sb);
}

// Differentiable Dice loss 1 - (2*sum(p*q)+eps) / (sum(p^2)+sum(q^2)+eps),
// recorded on the tape so gradients flow into `prob`.
template <typename T>
Value soft_dice_loss(Tape<T>& tape, Value prob, Value truth, double eps = kDiceEps) {
    check_same_shape(tape.value(prob), tape.value(truth), "soft_dice_loss");
    Value spq = tape.sum(tape.mul(prob, truth));
    Value spp = tape.sum(tape.mul(prob, prob));
    Value sqq = tape.sum(tape.mul(truth, truth));
    Value num = tape.add_scalar(tape.scale(spq, 2.0), eps);
    Value den = tape.add_scalar(tape.add(spp, sqq), eps);
    Value dsc = tape.divide(num, den);
    return tape.add_scalar(tape.scale(dsc, -1.0), 1.0);
}

template <typename T>
Value soft_dice_loss(Tape<T>& tape, Value prob, const BasicTensor<T>& truth,
                     double eps = kDiceEps) {
    return soft_dice_loss(tape, prob, tape.leaf(truth), eps);
}

// Tape-free evaluation of the same quantity.
template <typename T>
double soft_dice_loss_value(const BasicTensor<T>& prob, const BasicTensor<T>& truth,
                            double eps = kDiceEps) {
    check_same_shape(prob, truth, "soft_dice_loss");
    double spq = 0.0, spp = 0.0, sqq = 0.0;
    for (std::size_t i = 0; i < prob.data.size(); ++i) {
        const double p = static_cast<double>(prob.data[i]);
        const double q = static_cast<double>(truth.data[i]);
        spq += p * q;
        spp += p * p;
        sqq += q * q;
    }
    return 1.0 - (2.0 * spq + eps) / (spp + sqq + eps);
}

// Weighted sum of already-computed per-head losses.
template <typename T>
Value weighted_loss_sum(Tape<T>& tape, const std::vector<Value>& head_losses,
                        const SupervisionWeights<T>& weights) {
    weights.validate(static_cast<int>(head_losses.size()));
    Value acc = tape.leaf(BasicTensor<T>(Shape{1, 1, 1, 1}, T(0)));
    for (std::size_t i = 0; i < head_losses.size(); ++i)
        acc = tape.add(acc, tape.scale(head_losses[i], static_cast<double>(weights.alpha[i])));
    return acc;
}

// Deep-supervision term: weighted sum of per-head Dice losses against the
// shared ground truth.
template <typename T>
Value supervised_loss(Tape<T>& tape, const std::vector<Value>& head_probs, Value truth,
                      const SupervisionWeights<T>& weights) {
    weights.validate(static_cast<int>(head_probs.size()));
    std::vector<Value> losses;
    losses.reserve(head_probs.size());
    for (Value hp : head_probs) losses.push_back(soft_dice_loss(tape, hp, truth));
    return weighted_loss_sum(tape, losses, weights);
}

template <typename T>
struct ObjectiveValues {
    Value total;       // backward() entry point
    Value main_loss;
    Value supervised;
    std::vector<Value> head_losses;
    LossReport report;
};

// Full training objective: weighted supervised sum plus the main-output loss.
template <typename T>
ObjectiveValues<T> total_objective(Tape<T>& tape, Value main_prob,
                                   const std::vector<Value>& head_probs, Value truth,
                                   const SupervisionWeights<T>& weights) {
    weights.validate(static_cast<int>(head_probs.size()));
    ObjectiveValues<T> out;
    out.main_loss = soft_dice_loss(tape, main_prob, truth);
    for (Value hp : head_probs) out.head_losses.push_back(soft_dice_loss(tape, hp, truth));
    out.supervised = weighted_loss_sum(tape, out.head_losses, weights);
    out.total = tape.add(out.supervised, tape.scale(out.main_loss,
                                                    static_cast<double>(weights.main_weight)));

    out.report.main_loss = tape.scalar_value(out.main_loss);
    double sup = 0.0;
    for (std::size_t i = 0; i < out.head_losses.size(); ++i) {
        const double l = tape.scalar_value(out.head_losses[i]);
        out.report.head_losses.push_back(l);
        sup += static_cast<double>(weights.alpha[i]) * l;
    }
    out.report.supervised_sum = sup;
    out.report.total = sup + static_cast<double>(weights.main_weight) * out.report.main_loss;
    return out;
}

template <typename T>
ObjectiveValues<T> total_objective(Tape<T>& tape, Value main_prob,
                                   const std::vector<Value>& head_probs,
                                   const BasicTensor<T>& truth,
                                   const SupervisionWeights<T>& weights) {
    return total_objective(tape, main_prob, head_probs, tape.leaf(truth), weights);
}

}  // namespace dsnet
