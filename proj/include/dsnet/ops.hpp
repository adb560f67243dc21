#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "dsnet/tensor.hpp"

// Raw forward/backward kernels over rank-4 tensors. Convolutions are
// cross-correlations (no kernel flip) with stride 1 and zero same-padding;
// the transposed convolution takes an explicit stride and padding. All
// reductions accumulate in double. Backward kernels accumulate (+=) into the
// gradient tensors they are given.

namespace dsnet::ops {

// ---------------------------------------------------------------------------
// conv2d: input (N,Ci,H,W), kernel (Co,Ci,k,k), bias (1,Co,1,1), output (N,Co,H,W)

template <typename T>
inline void check_conv_args(const BasicTensor<T>& x, const BasicTensor<T>& k, int pad) {
    if (k.shape.h != k.shape.w)
        throw DimensionError("conv2d: kernel must be square, got " + k.shape.str());
    if (x.shape.c != k.shape.c)
        throw DimensionError("conv2d: input has " + std::to_string(x.shape.c) +
                             " channels, kernel expects " + std::to_string(k.shape.c));
    if (pad < 0) throw DimensionError("conv2d: negative padding");
}

template <typename T>
BasicTensor<T> conv2d_fwd(const BasicTensor<T>& x, const BasicTensor<T>& k,
                          const BasicTensor<T>& bias, int pad) {
    check_conv_args(x, k, pad);
    const int N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int Co = k.shape.n, K = k.shape.h;
    const int Ho = H + 2 * pad - K + 1, Wo = W + 2 * pad - K + 1;
    if (Ho < 1 || Wo < 1)
        throw DimensionError("conv2d: kernel larger than padded input");
    BasicTensor<T> out(Shape{N, Co, Ho, Wo});
    std::vector<double> acc(static_cast<std::size_t>(Wo));
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            const double b = bias.empty() ? 0.0 : static_cast<double>(bias.data[co]);
            for (int ho = 0; ho < Ho; ++ho) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int ci = 0; ci < Ci; ++ci) {
                    const T* kplane = &k.data[k.index(co, ci, 0, 0)];
                    for (int kh = 0; kh < K; ++kh) {
                        const int ih = ho + kh - pad;
                        if (ih < 0 || ih >= H) continue;
                        const T* in_row = &x.data[x.index(n, ci, ih, 0)];
                        for (int kw = 0; kw < K; ++kw) {
                            const double kv = static_cast<double>(kplane[kh * K + kw]);
                            const int off = kw - pad;
                            const int wlo = std::max(0, -off);
                            const int whi = std::min(Wo, W - off);
                            const T* src = in_row + off;
                            for (int w = wlo; w < whi; ++w)
                                acc[w] += static_cast<double>(src[w]) * kv;
                        }
                    }
                }
                T* out_row = &out.data[out.index(n, co, ho, 0)];
                for (int w = 0; w < Wo; ++w) out_row[w] = static_cast<T>(acc[w] + b);
            }
        }
    }
    return out;
}

template <typename T>
void conv2d_bwd(const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& dout,
                int pad, BasicTensor<T>* dx, BasicTensor<T>* dk, BasicTensor<T>* dbias) {
    const int N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int Co = k.shape.n, K = k.shape.h;
    const int Ho = dout.shape.h, Wo = dout.shape.w;
    if (dx) {
        // dL/dx gathers dout against the kernel transposed over channels.
        std::vector<double> acc(static_cast<std::size_t>(W));
        for (int n = 0; n < N; ++n) {
            for (int ci = 0; ci < Ci; ++ci) {
                for (int ih = 0; ih < H; ++ih) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int co = 0; co < Co; ++co) {
                        const T* kplane = &k.data[k.index(co, ci, 0, 0)];
                        for (int kh = 0; kh < K; ++kh) {
                            const int ho = ih + pad - kh;
                            if (ho < 0 || ho >= Ho) continue;
                            const T* g_row = &dout.data[dout.index(n, co, ho, 0)];
                            for (int kw = 0; kw < K; ++kw) {
                                const double kv = static_cast<double>(kplane[kh * K + kw]);
                                const int off = pad - kw;  // wo = iw + pad - kw
                                const int wlo = std::max(0, -off);
                                const int whi = std::min(W, Wo - off);
                                const T* src = g_row + off;
                                for (int w = wlo; w < whi; ++w)
                                    acc[w] += static_cast<double>(src[w]) * kv;
                            }
                        }
                    }
                    T* dx_row = &dx->data[dx->index(n, ci, ih, 0)];
                    for (int w = 0; w < W; ++w) dx_row[w] += static_cast<T>(acc[w]);
                }
            }
        }
    }
    if (dk) {
        for (int co = 0; co < Co; ++co) {
            for (int ci = 0; ci < Ci; ++ci) {
                for (int kh = 0; kh < K; ++kh) {
                    for (int kw = 0; kw < K; ++kw) {
                        double acc = 0.0;
                        for (int n = 0; n < N; ++n) {
                            for (int ho = 0; ho < Ho; ++ho) {
                                const int ih = ho + kh - pad;
                                if (ih < 0 || ih >= H) continue;
                                const int off = kw - pad;
                                const int wlo = std::max(0, -off);
                                const int whi = std::min(Wo, W - off);
                                const T* g_row = &dout.data[dout.index(n, co, ho, 0)];
                                const T* in_row = &x.data[x.index(n, ci, ih, 0)] + off;
                                for (int w = wlo; w < whi; ++w)
                                    acc += static_cast<double>(g_row[w]) *
                                           static_cast<double>(in_row[w]);
                            }
                        }
                        dk->data[dk->index(co, ci, kh, kw)] += static_cast<T>(acc);
                    }
                }
            }
        }
    }
    if (dbias) {
        for (int co = 0; co < Co; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const T* p = &dout.data[dout.index(n, co, 0, 0)];
                const std::int64_t plane = static_cast<std::int64_t>(Ho) * Wo;
                for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
            }
            dbias->data[co] += static_cast<T>(acc);
        }
    }
}

// ---------------------------------------------------------------------------
// deconv2d (transposed convolution): input (N,Ci,H,W), kernel (Ci,Co,k,k),
// bias (1,Co,1,1), output (N,Co,Ho,Wo) with Ho = s*(H-1) + k - 2*pad.
// out[n,co,oh,ow] = b[co] + sum_{ci,kh,kw} x[n,ci,ih,iw] * K[ci,co,kh,kw]
// where oh = s*ih + kh - pad, ow = s*iw + kw - pad. This is the adjoint of the
// stride-s convolution with the same padding.

template <typename T>
inline Shape deconv2d_out_shape(const Shape& in, const Shape& k, int stride, int pad) {
    const int K = k.h;
    return Shape{in.n, k.c, stride * (in.h - 1) + K - 2 * pad,
                 stride * (in.w - 1) + K - 2 * pad};
}

inline int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

// Valid input-column range [lo, hi) for which ow = stride*iw + kw - pad lands
// inside [0, wo_limit).
inline void deconv_col_range(int kw, int pad, int stride, int in_w, int out_w, int& lo, int& hi) {
    lo = std::max(0, ceil_div(pad - kw, stride));
    hi = std::min(in_w, (out_w - 1 - kw + pad) / stride + 1);
    if (out_w - 1 - kw + pad < 0) hi = lo;
}

template <typename T>
BasicTensor<T> deconv2d_fwd(const BasicTensor<T>& x, const BasicTensor<T>& k,
                            const BasicTensor<T>& bias, int stride, int pad) {
    if (k.shape.h != k.shape.w)
        throw DimensionError("deconv2d: kernel must be square, got " + k.shape.str());
    if (x.shape.c != k.shape.n)
        throw DimensionError("deconv2d: input has " + std::to_string(x.shape.c) +
                             " channels, kernel expects " + std::to_string(k.shape.n));
    if (stride < 1) throw DimensionError("deconv2d: stride must be >= 1");
    const Shape os = deconv2d_out_shape<T>(x.shape, k.shape, stride, pad);
    if (os.h < 1 || os.w < 1) throw DimensionError("deconv2d: empty output " + os.str());
    const int N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int Co = k.shape.c, K = k.shape.h;
    BasicTensor<T> out(os);
    std::vector<double> acc(static_cast<std::size_t>(os.w));
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            const double b = bias.empty() ? 0.0 : static_cast<double>(bias.data[co]);
            for (int oh = 0; oh < os.h; ++oh) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int ci = 0; ci < Ci; ++ci) {
                    for (int kh = 0; kh < K; ++kh) {
                        const int t = oh + pad - kh;
                        if (t < 0 || t % stride != 0) continue;
                        const int ih = t / stride;
                        if (ih >= H) continue;
                        const T* in_row = &x.data[x.index(n, ci, ih, 0)];
                        for (int kw = 0; kw < K; ++kw) {
                            const double kv =
                                static_cast<double>(k.data[k.index(ci, co, kh, kw)]);
                            int lo, hi;
                            deconv_col_range(kw, pad, stride, W, os.w, lo, hi);
                            double* dst = acc.data() + (kw - pad);
                            if (stride == 1) {
                                for (int iw = lo; iw < hi; ++iw)
                                    dst[iw] += static_cast<double>(in_row[iw]) * kv;
                            } else {
                                for (int iw = lo; iw < hi; ++iw)
                                    dst[stride * iw] += static_cast<double>(in_row[iw]) * kv;
                            }
                        }
                    }
                }
                T* out_row = &out.data[out.index(n, co, oh, 0)];
                for (int w = 0; w < os.w; ++w) out_row[w] = static_cast<T>(acc[w] + b);
            }
        }
    }
    return out;
}

template <typename T>
void deconv2d_bwd(const BasicTensor<T>& x, const BasicTensor<T>& k, const BasicTensor<T>& dout,
                  int stride, int pad, BasicTensor<T>* dx, BasicTensor<T>* dk,
                  BasicTensor<T>* dbias) {
    const int N = x.shape.n, Ci = x.shape.c, H = x.shape.h, W = x.shape.w;
    const int Co = k.shape.c, K = k.shape.h;
    const int Ho = dout.shape.h, Wo = dout.shape.w;
    if (dx) {
        std::vector<double> acc(static_cast<std::size_t>(W));
        for (int n = 0; n < N; ++n) {
            for (int ci = 0; ci < Ci; ++ci) {
                for (int ih = 0; ih < H; ++ih) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int co = 0; co < Co; ++co) {
                        for (int kh = 0; kh < K; ++kh) {
                            const int oh = stride * ih + kh - pad;
                            if (oh < 0 || oh >= Ho) continue;
                            const T* g_row = &dout.data[dout.index(n, co, oh, 0)];
                            for (int kw = 0; kw < K; ++kw) {
                                const double kv =
                                    static_cast<double>(k.data[k.index(ci, co, kh, kw)]);
                                int lo, hi;
                                deconv_col_range(kw, pad, stride, W, Wo, lo, hi);
                                const T* src = g_row + (kw - pad);
                                if (stride == 1) {
                                    for (int iw = lo; iw < hi; ++iw)
                                        acc[iw] += static_cast<double>(src[iw]) * kv;
                                } else {
                                    for (int iw = lo; iw < hi; ++iw)
                                        acc[iw] += static_cast<double>(src[stride * iw]) * kv;
                                }
                            }
                        }
                    }
                    T* dx_row = &dx->data[dx->index(n, ci, ih, 0)];
                    for (int iw = 0; iw < W; ++iw) dx_row[iw] += static_cast<T>(acc[iw]);
                }
            }
        }
    }
    if (dk) {
        for (int ci = 0; ci < Ci; ++ci) {
            for (int co = 0; co < Co; ++co) {
                for (int kh = 0; kh < K; ++kh) {
                    for (int kw = 0; kw < K; ++kw) {
                        int lo, hi;
                        deconv_col_range(kw, pad, stride, W, Wo, lo, hi);
                        double acc = 0.0;
                        for (int n = 0; n < N; ++n) {
                            for (int ih = 0; ih < H; ++ih) {
                                const int oh = stride * ih + kh - pad;
                                if (oh < 0 || oh >= Ho) continue;
                                const T* in_row = &x.data[x.index(n, ci, ih, 0)];
                                const T* g_row = &dout.data[dout.index(n, co, oh, 0)] + (kw - pad);
                                if (stride == 1) {
                                    for (int iw = lo; iw < hi; ++iw)
                                        acc += static_cast<double>(in_row[iw]) *
                                               static_cast<double>(g_row[iw]);
                                } else {
                                    for (int iw = lo; iw < hi; ++iw)
                                        acc += static_cast<double>(in_row[iw]) *
                                               static_cast<double>(g_row[stride * iw]);
                                }
                            }
                        }
                        dk->data[dk->index(ci, co, kh, kw)] += static_cast<T>(acc);
                    }
                }
            }
        }
    }
    if (dbias) {
        for (int co = 0; co < Co; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const T* p = &dout.data[dout.index(n, co, 0, 0)];
                const std::int64_t plane = static_cast<std::int64_t>(Ho) * Wo;
                for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
            }
            dbias->data[co] += static_cast<T>(acc);
        }
    }
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Ties resolve to the first element in row-major
// scan order; argmax holds the flat input index per output element.

template <typename T>
BasicTensor<T> maxpool2_fwd(const BasicTensor<T>& x, std::vector<std::int32_t>& argmax) {
    const int N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    if (H % 2 != 0 || W % 2 != 0)
        throw DimensionError("maxpool2: input H,W must be even, got " + x.shape.str());
    BasicTensor<T> out(Shape{N, C, H / 2, W / 2});
    argmax.resize(static_cast<std::size_t>(out.numel()));
    std::int64_t o = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int oh = 0; oh < H / 2; ++oh) {
                for (int ow = 0; ow < W / 2; ++ow) {
                    std::int64_t base = x.index(n, c, 2 * oh, 2 * ow);
                    std::int64_t best = base;
                    T bv = x.data[base];
                    const std::int64_t cand[3] = {base + 1, base + W, base + W + 1};
                    for (std::int64_t idx : cand) {
                        if (x.data[idx] > bv) {
                            bv = x.data[idx];
                            best = idx;
                        }
                    }
                    out.data[o] = bv;
                    argmax[static_cast<std::size_t>(o)] = static_cast<std::int32_t>(best);
                    ++o;
                }
            }
        }
    }
    return out;
}

template <typename T>
void maxpool2_bwd(const std::vector<std::int32_t>& argmax, const BasicTensor<T>& dout,
                  BasicTensor<T>* dx) {
    for (std::size_t i = 0; i < argmax.size(); ++i)
        dx->data[static_cast<std::size_t>(argmax[i])] += dout.data[i];
}

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsampling: each input value fills a 2x2 output block.

template <typename T>
BasicTensor<T> upsample2_fwd(const BasicTensor<T>& x) {
    const int N = x.shape.n, C = x.shape.c, H = x.shape.h, W = x.shape.w;
    BasicTensor<T> out(Shape{N, C, 2 * H, 2 * W});
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int h = 0; h < H; ++h) {
                const T* in_row = &x.data[x.index(n, c, h, 0)];
                T* r0 = &out.data[out.index(n, c, 2 * h, 0)];
                T* r1 = &out.data[out.index(n, c, 2 * h + 1, 0)];
                for (int w = 0; w < W; ++w) {
                    r0[2 * w] = r0[2 * w + 1] = in_row[w];
                    r1[2 * w] = r1[2 * w + 1] = in_row[w];
                }
            }
        }
    }
    return out;
}

template <typename T>
void upsample2_bwd(const BasicTensor<T>& dout, BasicTensor<T>* dx) {
    const int N = dx->shape.n, C = dx->shape.c, H = dx->shape.h, W = dx->shape.w;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int h = 0; h < H; ++h) {
                const T* r0 = &dout.data[dout.index(n, c, 2 * h, 0)];
                const T* r1 = &dout.data[dout.index(n, c, 2 * h + 1, 0)];
                T* dx_row = &dx->data[dx->index(n, c, h, 0)];
                for (int w = 0; w < W; ++w)
                    dx_row[w] += static_cast<T>(
                        static_cast<double>(r0[2 * w]) + static_cast<double>(r0[2 * w + 1]) +
                        static_cast<double>(r1[2 * w]) + static_cast<double>(r1[2 * w + 1]));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Elementwise activations.

template <typename T>
BasicTensor<T> relu_fwd(const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return out;
}

// Numerically stable logistic; branches on sign so large |x| cannot overflow.
template <typename T>
inline T sigmoid_scalar(T x) {
    if (x >= T(0)) {
        const T e = static_cast<T>(std::exp(-static_cast<double>(x)));
        return T(1) / (T(1) + e);
    }
    const T e = static_cast<T>(std::exp(static_cast<double>(x)));
    return e / (T(1) + e);
}

template <typename T>
BasicTensor<T> sigmoid_fwd(const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = sigmoid_scalar(x.data[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Channel concatenation.

template <typename T>
BasicTensor<T> concat_fwd(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.shape.n != b.shape.n || a.shape.h != b.shape.h || a.shape.w != b.shape.w)
        throw DimensionError("concat: batch/spatial mismatch " + a.shape.str() + " vs " +
                             b.shape.str());
    BasicTensor<T> out(Shape{a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
    const std::int64_t ablk = static_cast<std::int64_t>(a.shape.c) * a.shape.h * a.shape.w;
    const std::int64_t bblk = static_cast<std::int64_t>(b.shape.c) * b.shape.h * b.shape.w;
    for (int n = 0; n < a.shape.n; ++n) {
        std::memcpy(&out.data[n * (ablk + bblk)], &a.data[n * ablk], sizeof(T) * ablk);
        std::memcpy(&out.data[n * (ablk + bblk) + ablk], &b.data[n * bblk], sizeof(T) * bblk);
    }
    return out;
}

template <typename T>
void concat_bwd(const BasicTensor<T>& dout, BasicTensor<T>* da, BasicTensor<T>* db) {
    const std::int64_t ablk = static_cast<std::int64_t>(da->shape.c) * da->shape.h * da->shape.w;
    const std::int64_t bblk = static_cast<std::int64_t>(db->shape.c) * db->shape.h * db->shape.w;
    for (int n = 0; n < da->shape.n; ++n) {
        const T* g = &dout.data[n * (ablk + bblk)];
        for (std::int64_t i = 0; i < ablk; ++i) da->data[n * ablk + i] += g[i];
        for (std::int64_t i = 0; i < bblk; ++i) db->data[n * bblk + i] += g[ablk + i];
    }
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
double sum_all(const BasicTensor<T>& x) {
    double acc = 0.0;
    for (const T v : x.data) acc += static_cast<double>(v);
    return acc;
}

template <typename T>
double dot_all(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        acc += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
    return acc;
}

}  // namespace dsnet::ops
