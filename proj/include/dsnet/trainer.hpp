#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dsnet/checkpoint.hpp"
#include "dsnet/config.hpp"
#include "dsnet/data.hpp"
#include "dsnet/loss.hpp"
#include "dsnet/network.hpp"
#include "dsnet/optimizer.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tape.hpp"

namespace dsnet {

struct StepRecord {
    long step = 0;  // 0-based index of the step just taken
    double lr = 0.0;
    LossReport loss;
};

// One training run: deterministic sample schedule (per-epoch shuffles keyed
// by the seed), per-step augmentation draws keyed by (seed, stream index),
// forward + total objective + backward + SGD. All randomness is a pure
// function of (seed, step), so restoring a checkpoint replays the exact
// stream of an uninterrupted run.
class Trainer {
public:
    Trainer(const RunConfig& cfg, Dataset train)
        : cfg_(cfg), train_(std::move(train)) {
        cfg_.validate();
        if (train_.empty()) throw ContractError("trainer: empty training set");
        if (cfg_.model_kind() == ModelKind::dscnn)
            model_ = build_dscnn<float>(cfg_.in_channels, cfg_.base_channels, cfg_.seed);
        else
            model_ = build_unet<float>(cfg_.in_channels, cfg_.base_channels, cfg_.seed);
        optim_ = cfg_.make_optimizer();
        weights_ = cfg_.weights(model_.head_count());
    }

    void restore(const std::string& checkpoint_path) {
        model_ = load_model(checkpoint_path, &optim_);
        // run hyperparameters come from the config, not the checkpoint
        optim_.lr0 = cfg_.lr;
        optim_.momentum = cfg_.momentum;
        optim_.weight_decay = cfg_.weight_decay;
        optim_.schedule = cfg_.schedule();
        weights_ = cfg_.weights(model_.head_count());
    }

    NetworkGraph<float>& model() { return model_; }
    SgdState<float>& optimizer() { return optim_; }
    const RunConfig& config() const { return cfg_; }
    long current_step() const { return optim_.step_count; }

    StepRecord step() {
        const long t = optim_.step_count;
        std::vector<SamplePair> picks;
        picks.reserve(static_cast<std::size_t>(cfg_.batch_size));
        for (int j = 0; j < cfg_.batch_size; ++j)
            picks.push_back(sample_at(t * static_cast<long>(cfg_.batch_size) + j));
        const Tensor batch_image = stack(picks, /*masks=*/false);
        const Tensor batch_mask = stack(picks, /*masks=*/true);

        model_.zero_grads();
        Tape<float> tape;
        std::vector<Value> outs = model_.forward(tape, tape.leaf(batch_image));
        const std::vector<Value> heads(outs.begin() + 1, outs.end());
        ObjectiveValues<float> obj = total_objective(tape, outs[0], heads, batch_mask, weights_);
        if (!std::isfinite(obj.report.total))
            throw NumericError("train: non-finite loss at step " + std::to_string(t));
        tape.backward(obj.total);

        StepRecord rec;
        rec.step = t;
        rec.lr = optim_.current_lr();
        rec.loss = obj.report;
        sgd_step(model_, optim_);
        return rec;
    }

    void save(const std::string& path) const { save_model(path, model_, &optim_); }

    std::string csv_header() const {
        std::string h = "step,lr,total,main";
        for (int i = 1; i <= model_.head_count(); ++i) h += ",head" + std::to_string(i);
        return h;
    }

    static std::string csv_line(const StepRecord& rec) {
        std::string line = std::to_string(rec.step);
        line += ',';
        line += fmt(rec.lr);
        line += ',';
        line += fmt(rec.loss.total);
        line += ',';
        line += fmt(rec.loss.main_loss);
        for (double l : rec.loss.head_losses) {
            line += ',';
            line += fmt(l);
        }
        return line;
    }

    // Sample at stream position i: per-epoch shuffle, then augmentation.
    SamplePair sample_at(long stream_index) {
        const long n = static_cast<long>(train_.size());
        const long epoch = stream_index / n;
        const long pos = stream_index % n;
        if (epoch != order_epoch_) {
            order_.resize(train_.size());
            for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
            Rng rng = Rng::at(cfg_.seed, 0xe90c4 + static_cast<std::uint64_t>(epoch));
            rng.shuffle(order_.begin(), order_.end());
            order_epoch_ = epoch;
        }
        const SamplePair& base = train_.samples[static_cast<std::size_t>(order_[pos])];
        const AugmentSpec spec = cfg_.augment_spec(base.image.shape.w);
        if (spec.is_identity()) return base;
        Rng rng = Rng::at(cfg_.seed ^ 0xa4a4a4a4ULL, static_cast<std::uint64_t>(stream_index));
        return augment(base, spec, rng);
    }

private:
    static std::string fmt(double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    }

    static Tensor stack(const std::vector<SamplePair>& picks, bool masks) {
        const int B = static_cast<int>(picks.size());
        const Shape s0 = picks[0].image.shape;
        Tensor out(Shape{B, masks ? 1 : s0.c, s0.h, s0.w});
        std::size_t off = 0;
        for (const SamplePair& p : picks) {
            const Tensor& src = masks ? p.mask : p.image;
            if (src.shape.h != s0.h || src.shape.w != s0.w)
                throw DimensionError("train: samples in one batch must share H,W");
            std::copy(src.data.begin(), src.data.end(), out.data.begin() + off);
            off += src.data.size();
        }
        return out;
    }

    RunConfig cfg_;
    Dataset train_;
    NetworkGraph<float> model_;
    SgdState<float> optim_;
    SupervisionWeights<float> weights_;
    std::vector<int> order_;
    long order_epoch_ = -1;
};

}  // namespace dsnet
