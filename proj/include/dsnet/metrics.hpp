#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "dsnet/data.hpp"
#include "dsnet/loss.hpp"
#include "dsnet/network.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

// Hard threshold: 1 where prob > threshold (strict), else 0.
template <typename T>
BasicTensor<T> binarize(const BasicTensor<T>& prob, double threshold = 0.5) {
    if (threshold < 0.0 || threshold > 1.0)
        throw SpecError("binarize: threshold must be in [0,1]");
    BasicTensor<T> out(prob.shape);
    for (std::size_t i = 0; i < prob.data.size(); ++i)
        out.data[i] = static_cast<double>(prob.data[i]) > threshold ? T(1) : T(0);
    return out;
}

// Per-sample Dice scores plus the three Table-style statistics.
struct EvalSummary {
    std::string label;
    std::vector<double> dsc;
    double mean = 0.0;
    double median = 0.0;
    double max = 0.0;
};

inline EvalSummary summarize(std::string label, std::vector<double> dsc) {
    if (dsc.empty()) throw ContractError("summarize: empty score list");
    EvalSummary s;
    s.label = std::move(label);
    s.dsc = std::move(dsc);
    double sum = 0.0;
    for (double v : s.dsc) sum += v;
    s.mean = sum / static_cast<double>(s.dsc.size());
    std::vector<double> sorted = s.dsc;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size() / 2;
    s.median = sorted.size() % 2 ? sorted[k] : 0.5 * (sorted[k - 1] + sorted[k]);
    s.max = sorted.back();
    return s;
}

// Slice-level evaluation: binarized main output scored with the set-form DSC.
inline EvalSummary evaluate(NetworkGraph<float>& model, const Dataset& test,
                            double threshold = 0.5, const std::string& label = "") {
    if (test.empty()) throw ContractError("evaluate: empty test set");
    std::vector<double> scores;
    scores.reserve(test.size());
    for (const auto& sample : test.samples) {
        const std::vector<Tensor> outputs = model.predict(sample.image);
        scores.push_back(dice_binary(binarize(outputs[0], threshold), sample.mask));
    }
    return summarize(label.empty() ? model_kind_name(model.kind) : label, std::move(scores));
}

// Aligned plain-text table, three decimals per value.
inline std::string compare_report(const std::vector<EvalSummary>& summaries) {
    if (summaries.empty()) throw ContractError("compare_report: no summaries");
    std::size_t label_w = 6;  // "method"
    for (const auto& s : summaries) label_w = std::max(label_w, s.label.size());
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-*s  %8s  %9s  %10s\n", static_cast<int>(label_w), "method",
                  "meanDSC", "medianDSC", "maximumDSC");
    out += buf;
    for (const auto& s : summaries) {
        std::snprintf(buf, sizeof(buf), "%-*s  %8.3f  %9.3f  %10.3f\n",
                      static_cast<int>(label_w), s.label.c_str(), s.mean, s.median, s.max);
        out += buf;
    }
    return out;
}

}  // namespace dsnet
