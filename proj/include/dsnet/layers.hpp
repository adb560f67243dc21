#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dsnet/ops.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tape.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

// Stride-1, zero same-padded convolution (cross-correlation). Kernel layout
// (out_ch, in_ch, k, k), bias one value per output channel.
template <typename T>
struct Conv2dLayer {
    BasicTensor<T> kernel;
    BasicTensor<T> bias;
    int padding = 0;

    Conv2dLayer() = default;

    Conv2dLayer(int out_ch, int in_ch, int k)
        : kernel(Shape{out_ch, in_ch, k, k}), bias(Shape{1, out_ch, 1, 1}), padding((k - 1) / 2) {
        if (k != 1 && k != 3)
            throw DimensionError("conv2d: kernel size must be 1 or 3, got " + std::to_string(k));
    }

    // Kaiming-scaled normal weights (std = sqrt(2 / fan_in)), zero bias.
    static Conv2dLayer kaiming(int out_ch, int in_ch, int k, Rng& rng) {
        Conv2dLayer layer(out_ch, in_ch, k);
        const double std = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
        for (T& v : layer.kernel.data) v = static_cast<T>(rng.normal(0.0, std));
        return layer;
    }

    BasicTensor<T> forward(const BasicTensor<T>& x) const {
        return ops::conv2d_fwd(x, kernel, bias, padding);
    }

    Value apply(Tape<T>& tape, Value x) {
        return tape.conv2d(x, tape.param(kernel), tape.param(bias), padding);
    }
};

// 2x2 max pooling with stride 2; forward records the argmax index of each
// window so backward can route gradients to the winning element only.
template <typename T>
struct MaxPoolLayer {
    std::vector<std::int32_t> argmax;

    BasicTensor<T> forward(const BasicTensor<T>& x) { return ops::maxpool2_fwd(x, argmax); }

    static Value apply(Tape<T>& tape, Value x) { return tape.maxpool2(x); }
};

// Nearest-neighbor 2x upsampling.
template <typename T>
struct UpsampleLayer {
    static BasicTensor<T> forward(const BasicTensor<T>& x) { return ops::upsample2_fwd(x); }
    static Value apply(Tape<T>& tape, Value x) { return tape.upsample2(x); }
};

// Transposed convolution: the adjoint of the stride/padding-matched forward
// convolution. Kernel layout (in_ch, out_ch, k, k); output spatial size is
// stride*(in-1) + k - 2*padding.
template <typename T>
struct DeconvLayer {
    BasicTensor<T> kernel;
    BasicTensor<T> bias;
    int stride = 1;
    int padding = 0;

    DeconvLayer() = default;

    DeconvLayer(int in_ch, int out_ch, int k, int stride_ = 1, int padding_ = 0)
        : kernel(Shape{in_ch, out_ch, k, k}),
          bias(Shape{1, out_ch, 1, 1}),
          stride(stride_),
          padding(padding_) {}

    static DeconvLayer kaiming(int in_ch, int out_ch, int k, int stride, int padding, Rng& rng) {
        DeconvLayer layer(in_ch, out_ch, k, stride, padding);
        const double std = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
        for (T& v : layer.kernel.data) v = static_cast<T>(rng.normal(0.0, std));
        return layer;
    }

    BasicTensor<T> forward(const BasicTensor<T>& x) const {
        return ops::deconv2d_fwd(x, kernel, bias, stride, padding);
    }

    Value apply(Tape<T>& tape, Value x) {
        return tape.deconv2d(x, tape.param(kernel), tape.param(bias), stride, padding);
    }
};

// Free-function forms.

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const Conv2dLayer<T>& layer) {
    return layer.forward(input);
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
    return ops::relu_fwd(input);
}

template <typename T>
BasicTensor<T> maxpool_forward(const BasicTensor<T>& input) {
    std::vector<std::int32_t> argmax;
    return ops::maxpool2_fwd(input, argmax);
}

template <typename T>
BasicTensor<T> upsample_forward(const BasicTensor<T>& input) {
    return ops::upsample2_fwd(input);
}

template <typename T>
BasicTensor<T> deconv_forward(const BasicTensor<T>& input, const DeconvLayer<T>& layer) {
    return layer.forward(input);
}

template <typename T>
BasicTensor<T> concat_forward(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return ops::concat_fwd(a, b);
}

template <typename T>
BasicTensor<T> sigmoid_forward(const BasicTensor<T>& input) {
    return ops::sigmoid_fwd(input);
}

}  // namespace dsnet
