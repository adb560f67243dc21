#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsnet/layers.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tape.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

enum class ModelKind { unet, dscnn };

inline const char* model_kind_name(ModelKind k) { return k == ModelKind::unet ? "unet" : "dscnn"; }

// Where a supervision head attaches: the conv-block output of an encoder
// stage (pre-pool) or of a decoder stage. Stage s sits at spatial scale
// 1/2^(s-1) on both paths, so a head there needs s-1 doublings to reach full
// resolution.
struct HeadSite {
    enum Path { encoder, decoder };
    Path path;
    int stage;  // encoder: 2..5 (5 = bottleneck); decoder: 1..4

    int upsample_steps() const { return stage - 1; }
    std::string name() const {
        return (path == encoder ? "enc" : "dec") + std::to_string(stage);
    }
};

inline std::vector<HeadSite> default_head_sites() {
    return {{HeadSite::encoder, 2}, {HeadSite::encoder, 3}, {HeadSite::encoder, 4},
            {HeadSite::encoder, 5}, {HeadSite::decoder, 4}, {HeadSite::decoder, 3},
            {HeadSite::decoder, 2}, {HeadSite::decoder, 1}};
}

template <typename T>
struct EncoderStage {
    std::vector<Conv2dLayer<T>> convs;  // two 3x3 (+ one trailing 1x1 for dscnn)
    bool pool = true;
};

template <typename T>
struct DecoderStage {
    Conv2dLayer<T> halve;  // 1x1 channel-halving projection after upsampling
    std::vector<Conv2dLayer<T>> convs;
    int skip = 0;  // 0-based encoder stage whose output is concatenated
};

template <typename T>
struct SupervisionHead {
    HeadSite site;
    DeconvLayer<T> project;  // 3x3 stride-1 transposed conv -> 1 channel
};

// Encoder/decoder segmentation network. Encoder channels double per stage
// from base_ch; the bottleneck doubles once more; the decoder halves back to
// base_ch with skip concatenations. The DS-CNN variant adds a 1x1 convolution
// to every stage and one sigmoid supervision head per configured site.
template <typename T>
class NetworkGraph {
public:
    ModelKind kind = ModelKind::unet;
    int in_ch = 1;
    int base_ch = 64;
    std::vector<EncoderStage<T>> encoder;  // encoder[4] is the bottleneck (no pool)
    std::vector<DecoderStage<T>> decoder;  // deepest first
    Conv2dLayer<T> out_proj;               // 1x1 -> 1 channel
    std::vector<SupervisionHead<T>> heads;

    int head_count() const { return static_cast<int>(heads.size()); }

    // Records the full forward pass on `tape`. Returns outputs[0] = main
    // prediction followed by head predictions ordered shallow-to-deep; every
    // output is (batch, 1, H, W) in (0,1). `enc_taps`/`dec_taps`, when given,
    // receive the per-stage conv-block outputs (encoder pre-pool).
    std::vector<Value> forward(Tape<T>& tape, Value image, std::vector<Value>* enc_taps = nullptr,
                               std::vector<Value>* dec_taps = nullptr) {
        const Shape in_shape = tape.value(image).shape;
        if (in_shape.c != in_ch)
            throw DimensionError("forward: model expects " + std::to_string(in_ch) +
                                 " input channels, got " + in_shape.str());
        if (in_shape.h % 16 != 0 || in_shape.w % 16 != 0)
            throw DimensionError("forward: input H,W must be divisible by 16, got " +
                                 in_shape.str());

        std::vector<Value> enc_out(encoder.size());  // conv-block outputs, pre-pool
        std::vector<Value> dec_out(decoder.size() + 1);  // indexed by paired stage (1..4)

        Value x = image;
        for (std::size_t s = 0; s < encoder.size(); ++s) {
            for (auto& conv : encoder[s].convs) x = tape.relu(conv.apply(tape, x));
            enc_out[s] = x;
            if (encoder[s].pool) x = tape.maxpool2(x);
        }
        for (auto& stage : decoder) {
            x = tape.upsample2(x);
            x = tape.relu(stage.halve.apply(tape, x));
            x = tape.concat(enc_out[stage.skip], x);
            for (auto& conv : stage.convs) x = tape.relu(conv.apply(tape, x));
            dec_out[stage.skip + 1] = x;
        }
        Value main = tape.sigmoid(out_proj.apply(tape, x));
        if (enc_taps) *enc_taps = enc_out;
        if (dec_taps) dec_taps->assign(dec_out.begin() + 1, dec_out.end());

        std::vector<Value> outputs{main};
        for (auto& head : heads) {
            Value h = head.site.path == HeadSite::encoder ? enc_out[head.site.stage - 1]
                                                          : dec_out[head.site.stage];
            for (int i = 0; i < head.site.upsample_steps(); ++i) h = tape.upsample2(h);
            outputs.push_back(tape.sigmoid(head.project.apply(tape, h)));
        }
        return outputs;
    }

    // Tape-free convenience: forward pass returning plain tensors.
    std::vector<BasicTensor<T>> predict(const BasicTensor<T>& image) {
        Tape<T> tape;
        std::vector<Value> vals = forward(tape, tape.leaf(image));
        std::vector<BasicTensor<T>> out;
        out.reserve(vals.size());
        for (Value v : vals) out.push_back(tape.value(v));
        return out;
    }

    template <typename F>
    void for_each_param(F&& fn) {
        visit(*this, fn);
    }

    template <typename F>
    void for_each_param(F&& fn) const {
        visit(*this, fn);
    }

    std::int64_t parameter_count() const {
        std::int64_t total = 0;
        for_each_param([&](const std::string&, const BasicTensor<T>& t) { total += t.numel(); });
        return total;
    }

    void zero_grads() {
        for_each_param([](const std::string&, BasicTensor<T>& t) { t.zero_grad(); });
    }

    BasicTensor<T>* find_param(const std::string& name) {
        BasicTensor<T>* found = nullptr;
        for_each_param([&](const std::string& n, BasicTensor<T>& t) {
            if (n == name) found = &t;
        });
        return found;
    }

    template <typename U>
    NetworkGraph<U> cast() const {
        NetworkGraph<U> out;
        out.kind = kind;
        out.in_ch = in_ch;
        out.base_ch = base_ch;
        for (const auto& st : encoder) {
            EncoderStage<U> s;
            s.pool = st.pool;
            for (const auto& c : st.convs) s.convs.push_back(cast_conv<U>(c));
            out.encoder.push_back(std::move(s));
        }
        for (const auto& st : decoder) {
            DecoderStage<U> s;
            s.skip = st.skip;
            s.halve = cast_conv<U>(st.halve);
            for (const auto& c : st.convs) s.convs.push_back(cast_conv<U>(c));
            out.decoder.push_back(std::move(s));
        }
        out.out_proj = cast_conv<U>(out_proj);
        for (const auto& h : heads) {
            SupervisionHead<U> s;
            s.site = h.site;
            s.project.kernel = h.project.kernel.template cast<U>();
            s.project.bias = h.project.bias.template cast<U>();
            s.project.stride = h.project.stride;
            s.project.padding = h.project.padding;
            out.heads.push_back(std::move(s));
        }
        return out;
    }

private:
    template <typename U>
    static Conv2dLayer<U> cast_conv(const Conv2dLayer<T>& c) {
        Conv2dLayer<U> out;
        out.kernel = c.kernel.template cast<U>();
        out.bias = c.bias.template cast<U>();
        out.padding = c.padding;
        return out;
    }

    // Single walk used by both const and mutable for_each_param; order here
    // defines the canonical parameter order (checkpoints, optimizer state).
    template <typename Self, typename F>
    static void visit(Self& self, F& fn) {
        auto conv = [&](const std::string& name, auto& layer) {
            fn(name + ".kernel", layer.kernel);
            fn(name + ".bias", layer.bias);
        };
        for (std::size_t s = 0; s < self.encoder.size(); ++s) {
            for (std::size_t j = 0; j < self.encoder[s].convs.size(); ++j)
                conv("enc" + std::to_string(s + 1) + ".conv" + std::to_string(j + 1),
                     self.encoder[s].convs[j]);
        }
        for (auto& st : self.decoder) {
            const std::string base = "dec" + std::to_string(st.skip + 1);
            conv(base + ".halve", st.halve);
            for (std::size_t j = 0; j < st.convs.size(); ++j)
                conv(base + ".conv" + std::to_string(j + 1), st.convs[j]);
        }
        conv("out", self.out_proj);
        for (std::size_t i = 0; i < self.heads.size(); ++i)
            conv("head" + std::to_string(i + 1) + ".deconv", self.heads[i].project);
    }
};

namespace detail {

// Shared trunk construction. with_1x1 appends the DS-CNN's stage-deepening
// 1x1 convolution after the two 3x3 convolutions of every stage.
template <typename T>
NetworkGraph<T> build_trunk(ModelKind kind, int in_ch, int base_ch, bool with_1x1, Rng& rng) {
    if (in_ch < 1) throw DimensionError("build: in_ch must be >= 1");
    if (base_ch < 1) throw DimensionError("build: base_ch must be >= 1");
    NetworkGraph<T> net;
    net.kind = kind;
    net.in_ch = in_ch;
    net.base_ch = base_ch;

    int prev = in_ch;
    for (int s = 1; s <= 5; ++s) {
        const int ch = base_ch << (s - 1);  // 64,128,256,512 then 1024 bottleneck
        EncoderStage<T> stage;
        stage.pool = s < 5;
        stage.convs.push_back(Conv2dLayer<T>::kaiming(ch, prev, 3, rng));
        stage.convs.push_back(Conv2dLayer<T>::kaiming(ch, ch, 3, rng));
        if (with_1x1) stage.convs.push_back(Conv2dLayer<T>::kaiming(ch, ch, 1, rng));
        net.encoder.push_back(std::move(stage));
        prev = ch;
    }
    for (int s = 4; s >= 1; --s) {
        const int ch = base_ch << (s - 1);
        DecoderStage<T> stage;
        stage.skip = s - 1;
        stage.halve = Conv2dLayer<T>::kaiming(ch, 2 * ch, 1, rng);
        stage.convs.push_back(Conv2dLayer<T>::kaiming(ch, 2 * ch, 3, rng));
        stage.convs.push_back(Conv2dLayer<T>::kaiming(ch, ch, 3, rng));
        if (with_1x1) stage.convs.push_back(Conv2dLayer<T>::kaiming(ch, ch, 1, rng));
        net.decoder.push_back(std::move(stage));
    }
    net.out_proj = Conv2dLayer<T>::kaiming(1, base_ch, 1, rng);
    return net;
}

}  // namespace detail

// Fig-2 style U-Net baseline: four encoder stages of two 3x3 conv+ReLU with
// 2x2 pooling, a bottleneck, four decoder stages of upsample + 1x1 halving +
// skip concat + two 3x3 conv+ReLU, and a final 1x1 conv + sigmoid.
template <typename T = float>
NetworkGraph<T> build_unet(int in_ch, int base_ch = 64, std::uint64_t seed = 0) {
    Rng rng = Rng::at(seed, 0x756e6574);  // "unet" stream
    return detail::build_trunk<T>(ModelKind::unet, in_ch, base_ch, false, rng);
}

// Deeply-supervised variant: the same trunk with one 1x1 convolution added to
// every stage and a supervision head (nearest upsampling to full resolution,
// 3x3 stride-1 transposed conv to 1 channel, sigmoid) at each site.
template <typename T = float>
NetworkGraph<T> build_dscnn(int in_ch, int base_ch = 64, std::uint64_t seed = 0,
                            const std::vector<HeadSite>& sites = default_head_sites()) {
    Rng rng = Rng::at(seed, 0x6473636e);  // "dscn" stream
    NetworkGraph<T> net = detail::build_trunk<T>(ModelKind::dscnn, in_ch, base_ch, true, rng);
    for (const HeadSite& site : sites) {
        if (site.path == HeadSite::encoder ? (site.stage < 2 || site.stage > 5)
                                           : (site.stage < 1 || site.stage > 4))
            throw ContractError("build_dscnn: invalid head site " + site.name());
        const int ch = net.base_ch << (site.stage - 1);
        SupervisionHead<T> head;
        head.site = site;
        head.project = DeconvLayer<T>::kaiming(ch, 1, 3, 1, 1, rng);
        net.heads.push_back(std::move(head));
    }
    return net;
}

}  // namespace dsnet
