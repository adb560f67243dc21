#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "dsnet/loss.hpp"
#include "dsnet/network.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tape.hpp"

namespace dsnet {

struct GradCheckOptions {
    double h = 1e-3;
    double tol = 1e-3;
    int samples_per_param = 100;   // element subsample per parameter (all if fewer)
    std::uint64_t seed = 0;
    std::string param_filter;      // substring filter; empty checks everything
    std::string corrupt_param;     // test hook: +1.0 into this parameter's analytic grad
    std::int64_t corrupt_index = 0;
};

struct ParamCheckResult {
    std::string name;
    std::int64_t checked = 0;
    double max_rel_error = 0.0;
    std::int64_t worst_index = -1;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

struct GradCheckReport {
    double tol = 0.0;
    bool pass = true;
    std::vector<ParamCheckResult> params;

    double max_rel_error() const {
        double m = 0.0;
        for (const auto& p : params) m = std::max(m, p.max_rel_error);
        return m;
    }

    std::string summary(int worst = 5) const {
        char buf[256];
        std::string out;
        std::snprintf(buf, sizeof(buf), "gradcheck: %s (max relative error %.3e, tolerance %.1e, %zu parameters)\n",
                      pass ? "PASS" : "FAIL", max_rel_error(), tol, params.size());
        out += buf;
        std::vector<const ParamCheckResult*> sorted;
        for (const auto& p : params) sorted.push_back(&p);
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto* a, const auto* b) { return a->max_rel_error > b->max_rel_error; });
        const int n = std::min<int>(worst, static_cast<int>(sorted.size()));
        for (int i = 0; i < n; ++i) {
            const auto& p = *sorted[i];
            std::snprintf(buf, sizeof(buf),
                          "  %-24s rel %.3e at [%lld] analytic %.6e numeric %.6e (%lld checked)\n",
                          p.name.c_str(), p.max_rel_error,
                          static_cast<long long>(p.worst_index), p.analytic_at_worst,
                          p.numeric_at_worst, static_cast<long long>(p.checked));
            out += buf;
        }
        return out;
    }
};

// One parameter as seen by the checker: the double-precision tensor to
// perturb plus the analytic gradient to compare against.
struct GradCheckParamView {
    std::string name;
    BasicTensor<double>* dual = nullptr;
    std::vector<double> analytic;
};

// Central differences on the 64-bit side against the supplied analytic
// gradients. Relative error per element is |a - n| / max(|a|, |n|, 1e-8);
// an empty parameter list passes vacuously.
inline GradCheckReport finite_diff_check_core(std::vector<GradCheckParamView> params,
                                              const std::function<double()>& eval_loss64,
                                              const GradCheckOptions& opts = {}) {
    if (!(opts.h > 0.0)) throw ContractError("gradcheck: step h must be > 0");
    GradCheckReport report;
    report.tol = opts.tol;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        GradCheckParamView& pv = params[pi];
        BasicTensor<double>& theta = *pv.dual;
        const std::int64_t numel = theta.numel();
        if (static_cast<std::int64_t>(pv.analytic.size()) != numel)
            throw ContractError("gradcheck: analytic gradient size mismatch for '" + pv.name +
                                "'");
        std::vector<std::int64_t> indices(static_cast<std::size_t>(numel));
        std::iota(indices.begin(), indices.end(), 0);
        if (numel > opts.samples_per_param) {
            Rng rng = Rng::at(opts.seed, 0x6fd1 + pi);
            // partial Fisher-Yates: the first samples_per_param entries
            for (int j = 0; j < opts.samples_per_param; ++j) {
                const std::size_t k =
                    j + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(numel - j)));
                std::swap(indices[j], indices[k]);
            }
            indices.resize(static_cast<std::size_t>(opts.samples_per_param));
        }
        ParamCheckResult res;
        res.name = pv.name;
        res.checked = static_cast<std::int64_t>(indices.size());
        for (const std::int64_t idx : indices) {
            const double saved = theta.data[idx];
            const double plus = saved + opts.h;
            const double minus = saved - opts.h;
            theta.data[idx] = plus;
            const double f_plus = eval_loss64();
            theta.data[idx] = minus;
            const double f_minus = eval_loss64();
            theta.data[idx] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw NumericError("gradcheck: non-finite loss while perturbing '" + pv.name +
                                   "'");
            const double numeric = (f_plus - f_minus) / (plus - minus);
            const double analytic = pv.analytic[idx];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_index = idx;
                res.analytic_at_worst = analytic;
                res.numeric_at_worst = numeric;
            }
        }
        if (res.max_rel_error > opts.tol) report.pass = false;
        report.params.push_back(std::move(res));
    }
    return report;
}

// Default loss for model-level checks: the full deeply-supervised objective
// with unit weights.
struct TotalObjectiveLoss {
    template <typename T>
    Value operator()(Tape<T>& tape, NetworkGraph<T>& model, const BasicTensor<T>& image,
                     const BasicTensor<T>& mask) const {
        std::vector<Value> outs = model.forward(tape, tape.leaf(image));
        const std::vector<Value> heads(outs.begin() + 1, outs.end());
        return total_objective(tape, outs[0], heads, mask,
                               SupervisionWeights<T>::uniform(model.head_count()))
            .total;
    }
};

// Model-level check. The numeric side runs entirely on a double-precision
// clone of the model; the analytic side is the clone's own backward pass, so
// the comparison isolates the backward rules from float storage noise.
template <typename LossBuilder = TotalObjectiveLoss>
GradCheckReport finite_diff_check(NetworkGraph<float>& model, const Tensor& image,
                                  const Tensor& mask, const GradCheckOptions& opts = {},
                                  LossBuilder&& build_loss = {}) {
    model.for_each_param([&](const std::string& n, const Tensor& t) {
        for (float v : t.data)
            if (!std::isfinite(v))
                throw NumericError("gradcheck: parameter '" + n + "' is not finite");
    });
    NetworkGraph<double> dmodel = model.template cast<double>();
    const BasicTensor<double> image64 = image.cast<double>();
    const BasicTensor<double> mask64 = mask.cast<double>();

    dmodel.zero_grads();
    {
        Tape<double> tape;
        Value loss = build_loss(tape, dmodel, image64, mask64);
        tape.backward(loss);
    }

    std::vector<GradCheckParamView> views;
    dmodel.for_each_param([&](const std::string& n, BasicTensor<double>& t) {
        if (!opts.param_filter.empty() && n.find(opts.param_filter) == std::string::npos) return;
        GradCheckParamView v;
        v.name = n;
        v.dual = &t;
        v.analytic = t.grad;
        views.push_back(std::move(v));
    });
    if (!opts.corrupt_param.empty()) {
        bool hit = false;
        for (auto& v : views) {
            if (v.name.find(opts.corrupt_param) != std::string::npos) {
                v.analytic[static_cast<std::size_t>(opts.corrupt_index) % v.analytic.size()] +=
                    1.0;
                hit = true;
                break;
            }
        }
        if (!hit) throw ContractError("gradcheck: corrupt target '" + opts.corrupt_param +
                                      "' matches no parameter");
    }

    auto eval64 = [&]() {
        Tape<double> tape;
        Value loss = build_loss(tape, dmodel, image64, mask64);
        return tape.scalar_value(loss);
    };
    return finite_diff_check_core(std::move(views), eval64, opts);
}

}  // namespace dsnet
