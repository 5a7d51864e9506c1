#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lorafp/rng.hpp"

// The fingerprinting classifier: a stack of width-pooled 1x4 conv blocks
// (conv -> batch norm -> leaky ReLU -> 1x2 max pool), a final 2x4 conv that
// collapses the two input rows, average pooling over the remaining width, and
// a fully connected softmax head. Forward, backward and the momentum-SGD
// update are all in this header; everything is templated on the scalar type
// so training runs in float while gradient verification runs in double.

namespace lorafp {

struct CnnArchitecture {
    int window_len = 8192;
    int conv_blocks = 5;
    int filters = 16;
    int kernel_width = 4;
    int input_rows = 2;
    int num_classes = 25;
    double leaky_slope = 0.01;
    double dropout_rate = 0.5;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.1;

    // Width surviving the pooling pyramid; the average-pool length.
    int pooled_width() const { return window_len >> conv_blocks; }

    void validate() const {
        if (window_len <= 0 || (window_len & (window_len - 1)) != 0)
            throw std::invalid_argument("CnnArchitecture: window_len must be a power of two");
        if (conv_blocks < 1 || (window_len >> conv_blocks) < 1)
            throw std::invalid_argument("CnnArchitecture: too many conv blocks for window");
        if (num_classes < 2)
            throw std::invalid_argument("CnnArchitecture: need at least two classes");
        if (input_rows != 2)
            throw std::invalid_argument("CnnArchitecture: input must have two rows");
    }
};

template <typename Real>
struct ConvParams {
    int in_ch = 1, out_ch = 16, kh = 1, kw = 4;
    std::vector<Real> w;  // [out][in][kh][kw]
    std::vector<Real> b;  // [out]

    Real& at(int co, int ci, int r, int k) {
        return w[static_cast<std::size_t>(((co * in_ch + ci) * kh + r) * kw + k)];
    }
    const Real& at(int co, int ci, int r, int k) const {
        return w[static_cast<std::size_t>(((co * in_ch + ci) * kh + r) * kw + k)];
    }
};

template <typename Real>
struct BnParams {
    std::vector<Real> gamma, beta;
};

template <typename Real>
struct BnRunning {
    std::vector<Real> mean, var;
};

template <typename Real>
struct FcParams {
    int in_dim = 16, out_dim = 25;
    std::vector<Real> w;  // [out][in]
    std::vector<Real> b;  // [out]
};

template <typename Real>
struct CnnParams {
    std::vector<ConvParams<Real>> conv;  // one per block, kh = 1
    std::vector<BnParams<Real>> bn;      // one per block
    ConvParams<Real> final_conv;         // kh = input_rows, collapses the rows
    FcParams<Real> fc;
};

// Visits every trainable tensor in a fixed order. The decay flag marks the
// tensors included in the L2 penalty (weights only, never biases or batch
// norm affine parameters).
template <typename Real, typename F>
void for_each_param_tensor(CnnParams<Real>& p, F&& f) {
    for (std::size_t i = 0; i < p.conv.size(); ++i) {
        const std::string tag = std::to_string(i + 1);
        f("conv" + tag + ".w", p.conv[i].w, true);
        f("conv" + tag + ".b", p.conv[i].b, false);
        f("bn" + tag + ".gamma", p.bn[i].gamma, false);
        f("bn" + tag + ".beta", p.bn[i].beta, false);
    }
    f("final_conv.w", p.final_conv.w, true);
    f("final_conv.b", p.final_conv.b, false);
    f("fc.w", p.fc.w, true);
    f("fc.b", p.fc.b, false);
}

template <typename Real>
struct CnnModel {
    CnnArchitecture arch;
    CnnParams<Real> params;
    std::vector<BnRunning<Real>> running;
    std::uint64_t init_seed = 0;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_param_tensor(const_cast<CnnParams<Real>&>(params),
                              [&](const std::string&, std::vector<Real>& t, bool) { n += t.size(); });
        return n;
    }
};

namespace detail {

template <typename Real>
ConvParams<Real> make_conv(int in_ch, int out_ch, int kh, int kw, Rng& rng) {
    ConvParams<Real> c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.kh = kh;
    c.kw = kw;
    c.w.resize(static_cast<std::size_t>(out_ch * in_ch * kh * kw));
    c.b.assign(static_cast<std::size_t>(out_ch), Real(0));
    const double limit = std::sqrt(6.0 / static_cast<double>(in_ch * kh * kw));
    for (auto& v : c.w) v = static_cast<Real>(rng.uniform(-limit, limit));
    return c;
}

}  // namespace detail

template <typename Real>
CnnModel<Real> make_cnn_model(const CnnArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    CnnModel<Real> m;
    m.arch = arch;
    m.init_seed = seed;
    Rng rng(mix_seeds(seed, 0xC22ULL));
    for (int i = 0; i < arch.conv_blocks; ++i) {
        const int in_ch = i == 0 ? 1 : arch.filters;
        m.params.conv.push_back(detail::make_conv<Real>(in_ch, arch.filters, 1, arch.kernel_width, rng));
        BnParams<Real> bn;
        bn.gamma.assign(static_cast<std::size_t>(arch.filters), Real(1));
        bn.beta.assign(static_cast<std::size_t>(arch.filters), Real(0));
        m.params.bn.push_back(std::move(bn));
        BnRunning<Real> run;
        run.mean.assign(static_cast<std::size_t>(arch.filters), Real(0));
        run.var.assign(static_cast<std::size_t>(arch.filters), Real(1));
        m.running.push_back(std::move(run));
    }
    m.params.final_conv =
        detail::make_conv<Real>(arch.filters, arch.filters, arch.input_rows, arch.kernel_width, rng);
    m.params.fc.in_dim = arch.filters;
    m.params.fc.out_dim = arch.num_classes;
    m.params.fc.w.resize(static_cast<std::size_t>(arch.filters * arch.num_classes));
    m.params.fc.b.assign(static_cast<std::size_t>(arch.num_classes), Real(0));
    {
        const double limit = std::sqrt(6.0 / static_cast<double>(arch.filters));
        for (auto& v : m.params.fc.w) v = static_cast<Real>(rng.uniform(-limit, limit));
    }
    return m;
}

// Gradients mirror the parameter containers.
template <typename Real>
CnnParams<Real> make_zero_gradients(const CnnModel<Real>& model) {
    CnnParams<Real> g = model.params;
    for_each_param_tensor(g, [](const std::string&, std::vector<Real>& t, bool) {
        std::fill(t.begin(), t.end(), Real(0));
    });
    return g;
}

namespace detail {

// out[co][r][x] += sum_ci sum_k w[co][ci][k] * in[ci][r][x + k - pad_left]
// with zero padding on the width axis (pad_left = (kw-1)/2, the rest on the
// right).  kh = 1 path; rows pass through untouched.
template <typename Real>
void conv_rowwise_forward(const ConvParams<Real>& cp, const Real* in, Real* out, int rows, int width) {
    const int pad_left = (cp.kw - 1) / 2;
    const auto plane = static_cast<std::size_t>(rows * width);
    for (int co = 0; co < cp.out_ch; ++co) {
        Real* out_base = out + static_cast<std::size_t>(co) * plane;
        std::fill(out_base, out_base + plane, cp.b[static_cast<std::size_t>(co)]);
        for (int ci = 0; ci < cp.in_ch; ++ci) {
            const Real* in_base = in + static_cast<std::size_t>(ci) * plane;
            for (int k = 0; k < cp.kw; ++k) {
                const Real wk = cp.at(co, ci, 0, k);
                const int shift = k - pad_left;
                const int x_lo = std::max(0, -shift);
                const int x_hi = std::min(width, width - shift);
                for (int r = 0; r < rows; ++r) {
                    Real* o = out_base + static_cast<std::size_t>(r) * width;
                    const Real* s = in_base + static_cast<std::size_t>(r) * width + shift;
                    for (int x = x_lo; x < x_hi; ++x) o[x] += wk * s[x];
                }
            }
        }
    }
}

// d_in[ci][r][y] += sum_co sum_k w[co][ci][k] * d_out[co][r][y - shift]
template <typename Real>
void conv_rowwise_backward_data(const ConvParams<Real>& cp, const Real* d_out, Real* d_in, int rows,
                                int width) {
    const int pad_left = (cp.kw - 1) / 2;
    const auto plane = static_cast<std::size_t>(rows * width);
    std::fill(d_in, d_in + static_cast<std::size_t>(cp.in_ch) * plane, Real(0));
    for (int co = 0; co < cp.out_ch; ++co) {
        const Real* dob = d_out + static_cast<std::size_t>(co) * plane;
        for (int ci = 0; ci < cp.in_ch; ++ci) {
            Real* dib = d_in + static_cast<std::size_t>(ci) * plane;
            for (int k = 0; k < cp.kw; ++k) {
                const Real wk = cp.at(co, ci, 0, k);
                const int shift = k - pad_left;
                const int y_lo = std::max(0, shift);
                const int y_hi = std::min(width, width + shift);
                for (int r = 0; r < rows; ++r) {
                    Real* di = dib + static_cast<std::size_t>(r) * width;
                    const Real* dout = dob + static_cast<std::size_t>(r) * width - shift;
                    for (int y = y_lo; y < y_hi; ++y) di[y] += wk * dout[y];
                }
            }
        }
    }
}

// d_w[co][ci][k] += sum_r sum_x d_out[co][r][x] * in[ci][r][x + shift]
template <typename Real>
void conv_rowwise_backward_params(const ConvParams<Real>& cp, const Real* in, const Real* d_out,
                                  ConvParams<Real>& grad, int rows, int width) {
    const int pad_left = (cp.kw - 1) / 2;
    const auto plane = static_cast<std::size_t>(rows * width);
    for (int co = 0; co < cp.out_ch; ++co) {
        const Real* dob = d_out + static_cast<std::size_t>(co) * plane;
        Real bias_acc = 0;
        for (std::size_t i = 0; i < plane; ++i) bias_acc += dob[i];
        grad.b[static_cast<std::size_t>(co)] += bias_acc;
        for (int ci = 0; ci < cp.in_ch; ++ci) {
            const Real* in_base = in + static_cast<std::size_t>(ci) * plane;
            for (int k = 0; k < cp.kw; ++k) {
                const int shift = k - pad_left;
                const int x_lo = std::max(0, -shift);
                const int x_hi = std::min(width, width - shift);
                Real acc = 0;
                for (int r = 0; r < rows; ++r) {
                    const Real* o = dob + static_cast<std::size_t>(r) * width;
                    const Real* s = in_base + static_cast<std::size_t>(r) * width + shift;
                    for (int x = x_lo; x < x_hi; ++x) acc += o[x] * s[x];
                }
                grad.at(co, ci, 0, k) += acc;
            }
        }
    }
}

// Final conv: kernel spans all input rows ("valid" on the row axis, output is
// a single row), same padding on width.
template <typename Real>
void conv_collapse_forward(const ConvParams<Real>& cp, const Real* in, Real* out, int width) {
    const int pad_left = (cp.kw - 1) / 2;
    const auto in_plane = static_cast<std::size_t>(cp.kh * width);
    for (int co = 0; co < cp.out_ch; ++co) {
        Real* o = out + static_cast<std::size_t>(co) * width;
        std::fill(o, o + width, cp.b[static_cast<std::size_t>(co)]);
        for (int ci = 0; ci < cp.in_ch; ++ci) {
            const Real* in_base = in + static_cast<std::size_t>(ci) * in_plane;
            for (int r = 0; r < cp.kh; ++r) {
                for (int k = 0; k < cp.kw; ++k) {
                    const Real wk = cp.at(co, ci, r, k);
                    const int shift = k - pad_left;
                    const int x_lo = std::max(0, -shift);
                    const int x_hi = std::min(width, width - shift);
                    const Real* s = in_base + static_cast<std::size_t>(r) * width + shift;
                    for (int x = x_lo; x < x_hi; ++x) o[x] += wk * s[x];
                }
            }
        }
    }
}

template <typename Real>
void conv_collapse_backward(const ConvParams<Real>& cp, const Real* in, const Real* d_out,
                            Real* d_in, ConvParams<Real>& grad, int width) {
    const int pad_left = (cp.kw - 1) / 2;
    const auto in_plane = static_cast<std::size_t>(cp.kh * width);
    std::fill(d_in, d_in + static_cast<std::size_t>(cp.in_ch) * in_plane, Real(0));
    for (int co = 0; co < cp.out_ch; ++co) {
        const Real* dob = d_out + static_cast<std::size_t>(co) * width;
        Real bias_acc = 0;
        for (int x = 0; x < width; ++x) bias_acc += dob[x];
        grad.b[static_cast<std::size_t>(co)] += bias_acc;
        for (int ci = 0; ci < cp.in_ch; ++ci) {
            const Real* in_base = in + static_cast<std::size_t>(ci) * in_plane;
            Real* dib = d_in + static_cast<std::size_t>(ci) * in_plane;
            for (int r = 0; r < cp.kh; ++r) {
                const Real* s_row = in_base + static_cast<std::size_t>(r) * width;
                Real* di_row = dib + static_cast<std::size_t>(r) * width;
                for (int k = 0; k < cp.kw; ++k) {
                    const Real wk = cp.at(co, ci, r, k);
                    const int shift = k - pad_left;
                    const int x_lo = std::max(0, -shift);
                    const int x_hi = std::min(width, width - shift);
                    Real acc = 0;
                    for (int x = x_lo; x < x_hi; ++x) {
                        acc += dob[x] * s_row[x + shift];
                        di_row[x + shift] += wk * dob[x];
                    }
                    grad.at(co, ci, r, k) += acc;
                }
            }
        }
    }
}

}  // namespace detail

// Per-batch activation storage. Allocated once and reused across batches.
template <typename Real>
struct CnnWorkspace {
    struct Block {
        std::vector<Real> xhat;      // [n][c][rows][w_in]
        std::vector<Real> out;       // [n][c][rows][w_in/2], post pool
        std::vector<std::uint8_t> idx;  // pool argmax, same shape as out
        std::vector<Real> mean, inv_std;  // batch stats per channel
        int w_in = 0;
    };
    int n = 0;
    std::vector<Real> input;      // [n][1][rows][W]
    std::vector<Block> blocks;
    std::vector<Real> final_out;  // [n][c][pooled_width]
    std::vector<Real> avg_out;    // [n][c]
    std::vector<Real> fc_out;     // [n][C], pre-activation
    std::vector<Real> head_act;   // [n][C], post leaky + dropout
    std::vector<Real> drop_mask;  // [n][C]
    std::vector<Real> probs;      // [n][C]
    std::vector<Real> scratch_a, scratch_b;  // conv/grad ping-pong buffers

    void resize(const CnnArchitecture& arch, int batch) {
        n = batch;
        const auto nb = static_cast<std::size_t>(batch);
        input.resize(nb * static_cast<std::size_t>(arch.input_rows * arch.window_len));
        blocks.resize(static_cast<std::size_t>(arch.conv_blocks));
        int w = arch.window_len;
        std::size_t max_plane = 0;
        for (int i = 0; i < arch.conv_blocks; ++i) {
            Block& blk = blocks[static_cast<std::size_t>(i)];
            blk.w_in = w;
            const auto full = nb * static_cast<std::size_t>(arch.filters * arch.input_rows * w);
            blk.xhat.resize(full);
            blk.out.resize(full / 2);
            blk.idx.resize(full / 2);
            blk.mean.resize(static_cast<std::size_t>(arch.filters));
            blk.inv_std.resize(static_cast<std::size_t>(arch.filters));
            max_plane = std::max(max_plane, full);
            w /= 2;
        }
        final_out.resize(nb * static_cast<std::size_t>(arch.filters * arch.pooled_width()));
        avg_out.resize(nb * static_cast<std::size_t>(arch.filters));
        fc_out.resize(nb * static_cast<std::size_t>(arch.num_classes));
        head_act.resize(nb * static_cast<std::size_t>(arch.num_classes));
        drop_mask.resize(nb * static_cast<std::size_t>(arch.num_classes));
        probs.resize(nb * static_cast<std::size_t>(arch.num_classes));
        scratch_a.resize(std::max(max_plane, final_out.size()));
        scratch_b.resize(std::max(max_plane, final_out.size()));
    }
};

namespace detail {

// Batch-norm statistics over (sample, row, x) per channel, written into the
// block cache. In inference mode the model's running statistics are used.
template <typename Real>
void bn_stats(const Real* conv_out, int n, int channels, std::size_t plane,
              std::size_t sample_stride, typename CnnWorkspace<Real>::Block& blk, bool training,
              const BnRunning<Real>& running, double eps) {
    if (!training) {
        for (int c = 0; c < channels; ++c) {
            blk.mean[static_cast<std::size_t>(c)] = running.mean[static_cast<std::size_t>(c)];
            blk.inv_std[static_cast<std::size_t>(c)] = static_cast<Real>(
                1.0 / std::sqrt(static_cast<double>(running.var[static_cast<std::size_t>(c)]) + eps));
        }
        return;
    }
    const double m = static_cast<double>(n) * static_cast<double>(plane);
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int s = 0; s < n; ++s) {
            const Real* p = conv_out + static_cast<std::size_t>(s) * sample_stride +
                            static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double v = static_cast<double>(p[i]);
                sum += v;
                sq += v * v;
            }
        }
        const double mean = sum / m;
        const double var = std::max(0.0, sq / m - mean * mean);
        blk.mean[static_cast<std::size_t>(c)] = static_cast<Real>(mean);
        blk.inv_std[static_cast<std::size_t>(c)] = static_cast<Real>(1.0 / std::sqrt(var + eps));
    }
}

}  // namespace detail

// Forward over a batch. Input layout: [sample][row][x] (single input channel).
// Labels may be empty (pure inference); when training is true batch statistics
// are used for normalization and dropout is applied with the given seed.
template <typename Real>
void cnn_forward_batch(const CnnModel<Real>& model, CnnWorkspace<Real>& ws, int n, bool training,
                       std::uint64_t dropout_seed = 0) {
    const CnnArchitecture& arch = model.arch;
    const int rows = arch.input_rows;
    const int C = arch.num_classes;
    const int F = arch.filters;

    const Real* layer_in = ws.input.data();
    std::size_t in_stride = static_cast<std::size_t>(rows * arch.window_len);

    for (int b = 0; b < arch.conv_blocks; ++b) {
        auto& blk = ws.blocks[static_cast<std::size_t>(b)];
        const ConvParams<Real>& cp = model.params.conv[static_cast<std::size_t>(b)];
        const int w = blk.w_in;
        const auto plane = static_cast<std::size_t>(rows * w);
        const auto conv_stride = static_cast<std::size_t>(F) * plane;

        // conv into scratch_a
        for (int s = 0; s < n; ++s)
            detail::conv_rowwise_forward(cp, layer_in + static_cast<std::size_t>(s) * in_stride,
                                         ws.scratch_a.data() + static_cast<std::size_t>(s) * conv_stride,
                                         rows, w);

        detail::bn_stats<Real>(ws.scratch_a.data(), n, F, plane, conv_stride, blk, training,
                               model.running[static_cast<std::size_t>(b)], arch.bn_epsilon);

        // normalize + affine + leaky relu + pool, fused
        const auto out_plane = plane / 2;
        const auto out_stride = static_cast<std::size_t>(F) * out_plane;
        const Real slope = static_cast<Real>(arch.leaky_slope);
        for (int s = 0; s < n; ++s) {
            for (int c = 0; c < F; ++c) {
                const Real mean = blk.mean[static_cast<std::size_t>(c)];
                const Real inv_std = blk.inv_std[static_cast<std::size_t>(c)];
                const Real gamma = model.params.bn[static_cast<std::size_t>(b)].gamma[static_cast<std::size_t>(c)];
                const Real beta = model.params.bn[static_cast<std::size_t>(b)].beta[static_cast<std::size_t>(c)];
                const Real* cin = ws.scratch_a.data() + static_cast<std::size_t>(s) * conv_stride +
                                  static_cast<std::size_t>(c) * plane;
                Real* xh = blk.xhat.data() + static_cast<std::size_t>(s) * conv_stride +
                           static_cast<std::size_t>(c) * plane;
                Real* out = blk.out.data() + static_cast<std::size_t>(s) * out_stride +
                            static_cast<std::size_t>(c) * out_plane;
                std::uint8_t* idx = blk.idx.data() + static_cast<std::size_t>(s) * out_stride +
                                    static_cast<std::size_t>(c) * out_plane;
                for (int r = 0; r < rows; ++r) {
                    const Real* ci_row = cin + static_cast<std::size_t>(r) * w;
                    Real* xh_row = xh + static_cast<std::size_t>(r) * w;
                    Real* out_row = out + static_cast<std::size_t>(r) * (w / 2);
                    std::uint8_t* idx_row = idx + static_cast<std::size_t>(r) * (w / 2);
                    for (int x = 0; x < w; ++x) xh_row[x] = (ci_row[x] - mean) * inv_std;
                    for (int t = 0; t < w / 2; ++t) {
                        Real a0 = gamma * xh_row[2 * t] + beta;
                        Real a1 = gamma * xh_row[2 * t + 1] + beta;
                        a0 = a0 > Real(0) ? a0 : slope * a0;
                        a1 = a1 > Real(0) ? a1 : slope * a1;
                        // ties resolve to the left element
                        const bool right = a1 > a0;
                        out_row[t] = right ? a1 : a0;
                        idx_row[t] = right ? 1 : 0;
                    }
                }
            }
        }
        layer_in = blk.out.data();
        in_stride = out_stride;
    }

    // final conv (collapses rows), then average pool over width
    const int wp = arch.pooled_width();
    const auto fo_stride = static_cast<std::size_t>(F * wp);
    for (int s = 0; s < n; ++s)
        detail::conv_collapse_forward(model.params.final_conv,
                                      layer_in + static_cast<std::size_t>(s) * in_stride,
                                      ws.final_out.data() + static_cast<std::size_t>(s) * fo_stride, wp);
    for (int s = 0; s < n; ++s) {
        const Real* fo = ws.final_out.data() + static_cast<std::size_t>(s) * fo_stride;
        Real* avg = ws.avg_out.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(F);
        for (int c = 0; c < F; ++c) {
            Real acc = 0;
            const Real* row = fo + static_cast<std::size_t>(c) * static_cast<std::size_t>(wp);
            for (int x = 0; x < wp; ++x) acc += row[x];
            avg[c] = acc / static_cast<Real>(wp);
        }
    }

    // fully connected head: fc -> leaky relu -> dropout -> softmax
    const Real slope = static_cast<Real>(arch.leaky_slope);
    Rng drop_rng(mix_seeds(dropout_seed, 0xD209ULL));
    const double keep = 1.0 - arch.dropout_rate;
    for (int s = 0; s < n; ++s) {
        const Real* avg = ws.avg_out.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(F);
        Real* fc = ws.fc_out.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(C);
        Real* act = ws.head_act.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(C);
        Real* mask = ws.drop_mask.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(C);
        for (int o = 0; o < C; ++o) {
            Real acc = model.params.fc.b[static_cast<std::size_t>(o)];
            const Real* wrow = model.params.fc.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(F);
            for (int i = 0; i < F; ++i) acc += wrow[i] * avg[i];
            fc[o] = acc;
            Real a = acc > Real(0) ? acc : slope * acc;
            if (training && arch.dropout_rate > 0.0) {
                const bool kept = drop_rng.uniform() < keep;
                mask[o] = kept ? static_cast<Real>(1.0 / keep) : Real(0);
                a *= mask[o];
            } else {
                mask[o] = Real(1);
            }
            act[o] = a;
        }
        // stable softmax
        Real* pr = ws.probs.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(C);
        Real mx = act[0];
        for (int o = 1; o < C; ++o) mx = std::max(mx, act[o]);
        double denom = 0.0;
        for (int o = 0; o < C; ++o) {
            const double e = std::exp(static_cast<double>(act[o] - mx));
            pr[o] = static_cast<Real>(e);
            denom += e;
        }
        const Real inv = static_cast<Real>(1.0 / denom);
        for (int o = 0; o < C; ++o) pr[o] *= inv;
    }
}

// Mean categorical cross-entropy over the batch plus the L2 penalty
// l2 * sum(w^2) over weight tensors.
template <typename Real>
double cnn_loss(const CnnModel<Real>& model, const CnnWorkspace<Real>& ws, int n,
                const std::vector<int>& labels, double l2) {
    const int C = model.arch.num_classes;
    double ce = 0.0;
    for (int s = 0; s < n; ++s) {
        const int y = labels[static_cast<std::size_t>(s)];
        if (y < 0 || y >= C) throw std::invalid_argument("cnn_loss: label out of range");
        const double p = static_cast<double>(
            ws.probs[static_cast<std::size_t>(s) * static_cast<std::size_t>(C) + static_cast<std::size_t>(y)]);
        ce -= std::log(std::max(p, 1e-300));
    }
    ce /= static_cast<double>(n);
    if (l2 > 0.0) {
        double sq = 0.0;
        for_each_param_tensor(const_cast<CnnParams<Real>&>(model.params),
                              [&](const std::string&, std::vector<Real>& t, bool decay) {
                                  if (!decay) return;
                                  for (const Real v : t) sq += static_cast<double>(v) * static_cast<double>(v);
                              });
        ce += l2 * sq;
    }
    return ce;
}

// Backward pass; ws must hold the forward state for this batch. Gradients are
// accumulated into `grad` (zeroed here), including the L2 term.
template <typename Real>
void cnn_backward_batch(const CnnModel<Real>& model, CnnWorkspace<Real>& ws, int n,
                        const std::vector<int>& labels, double l2, CnnParams<Real>& grad) {
    const CnnArchitecture& arch = model.arch;
    const int rows = arch.input_rows;
    const int C = arch.num_classes;
    const int F = arch.filters;
    const int wp = arch.pooled_width();
    const Real slope = static_cast<Real>(arch.leaky_slope);

    for_each_param_tensor(grad, [](const std::string&, std::vector<Real>& t, bool) {
        std::fill(t.begin(), t.end(), Real(0));
    });

    // head: d_act = (p - onehot)/n, through dropout and leaky relu
    std::vector<Real> d_fc(static_cast<std::size_t>(n) * static_cast<std::size_t>(C));
    std::vector<Real> d_avg(static_cast<std::size_t>(n) * static_cast<std::size_t>(F), Real(0));
    const Real inv_n = static_cast<Real>(1.0 / static_cast<double>(n));
    for (int s = 0; s < n; ++s) {
        const auto base = static_cast<std::size_t>(s) * static_cast<std::size_t>(C);
        const int y = labels[static_cast<std::size_t>(s)];
        for (int o = 0; o < C; ++o) {
            Real d = ws.probs[base + static_cast<std::size_t>(o)];
            if (o == y) d -= Real(1);
            d *= inv_n;
            d *= ws.drop_mask[base + static_cast<std::size_t>(o)];
            const Real pre = ws.fc_out[base + static_cast<std::size_t>(o)];
            d_fc[base + static_cast<std::size_t>(o)] = pre > Real(0) ? d : slope * d;
        }
    }
    for (int s = 0; s < n; ++s) {
        const Real* avg = ws.avg_out.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(F);
        const Real* dfc = d_fc.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(C);
        Real* davg = d_avg.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(F);
        for (int o = 0; o < C; ++o) {
            const Real d = dfc[o];
            Real* gw = grad.fc.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(F);
            const Real* wrow = model.params.fc.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(F);
            grad.fc.b[static_cast<std::size_t>(o)] += d;
            for (int i = 0; i < F; ++i) {
                gw[i] += d * avg[i];
                davg[i] += d * wrow[i];
            }
        }
    }

    // average pool backward into scratch_a, then final conv backward
    const auto fo_stride = static_cast<std::size_t>(F * wp);
    const Real inv_wp = static_cast<Real>(1.0 / static_cast<double>(wp));
    for (int s = 0; s < n; ++s) {
        const Real* davg = d_avg.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(F);
        Real* dfo = ws.scratch_a.data() + static_cast<std::size_t>(s) * fo_stride;
        for (int c = 0; c < F; ++c) {
            const Real d = davg[c] * inv_wp;
            Real* row = dfo + static_cast<std::size_t>(c) * static_cast<std::size_t>(wp);
            for (int x = 0; x < wp; ++x) row[x] = d;
        }
    }
    const auto& last = ws.blocks.back();
    const auto last_stride = static_cast<std::size_t>(F * rows * (last.w_in / 2));
    for (int s = 0; s < n; ++s)
        detail::conv_collapse_backward(model.params.final_conv,
                                       last.out.data() + static_cast<std::size_t>(s) * last_stride,
                                       ws.scratch_a.data() + static_cast<std::size_t>(s) * fo_stride,
                                       ws.scratch_b.data() + static_cast<std::size_t>(s) * last_stride,
                                       grad.final_conv, wp);

    // blocks in reverse; d (w.r.t. block.out) lives in scratch_b
    for (int b = arch.conv_blocks - 1; b >= 0; --b) {
        auto& blk = ws.blocks[static_cast<std::size_t>(b)];
        const ConvParams<Real>& cp = model.params.conv[static_cast<std::size_t>(b)];
        const BnParams<Real>& bn = model.params.bn[static_cast<std::size_t>(b)];
        const int w = blk.w_in;
        const auto plane = static_cast<std::size_t>(rows * w);
        const auto conv_stride = static_cast<std::size_t>(F) * plane;
        const auto out_plane = plane / 2;
        const auto out_stride = static_cast<std::size_t>(F) * out_plane;

        // pool + leaky relu backward -> d_bn (dense, into scratch_a)
        for (int s = 0; s < n; ++s) {
            Real* dbn = ws.scratch_a.data() + static_cast<std::size_t>(s) * conv_stride;
            std::fill(dbn, dbn + conv_stride, Real(0));
            const Real* dout = ws.scratch_b.data() + static_cast<std::size_t>(s) * out_stride;
            const Real* outv = blk.out.data() + static_cast<std::size_t>(s) * out_stride;
            const std::uint8_t* idx = blk.idx.data() + static_cast<std::size_t>(s) * out_stride;
            for (int c = 0; c < F; ++c) {
                for (int r = 0; r < rows; ++r) {
                    const auto row_off = static_cast<std::size_t>(c) * out_plane +
                                         static_cast<std::size_t>(r) * (static_cast<std::size_t>(w) / 2);
                    const Real* do_row = dout + row_off;
                    const Real* ov_row = outv + row_off;
                    const std::uint8_t* ix_row = idx + row_off;
                    Real* dbn_row = dbn + static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(r) * w;
                    for (int t = 0; t < w / 2; ++t) {
                        const Real g = ov_row[t] > Real(0) ? do_row[t] : slope * do_row[t];
                        dbn_row[2 * t + ix_row[t]] = g;
                    }
                }
            }
        }

        // batch norm backward -> d_conv (into scratch_b, overwriting)
        const double m = static_cast<double>(n) * static_cast<double>(plane);
        for (int c = 0; c < F; ++c) {
            const Real gamma = bn.gamma[static_cast<std::size_t>(c)];
            const Real inv_std = blk.inv_std[static_cast<std::size_t>(c)];
            double sum_dbn = 0.0, sum_dbn_xhat = 0.0;
            for (int s = 0; s < n; ++s) {
                const Real* dbn = ws.scratch_a.data() + static_cast<std::size_t>(s) * conv_stride +
                                  static_cast<std::size_t>(c) * plane;
                const Real* xh = blk.xhat.data() + static_cast<std::size_t>(s) * conv_stride +
                                 static_cast<std::size_t>(c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dbn += static_cast<double>(dbn[i]);
                    sum_dbn_xhat += static_cast<double>(dbn[i]) * static_cast<double>(xh[i]);
                }
            }
            grad.bn[static_cast<std::size_t>(b)].gamma[static_cast<std::size_t>(c)] +=
                static_cast<Real>(sum_dbn_xhat);
            grad.bn[static_cast<std::size_t>(b)].beta[static_cast<std::size_t>(c)] +=
                static_cast<Real>(sum_dbn);

            const Real mean_dxhat = static_cast<Real>(static_cast<double>(gamma) * sum_dbn / m);
            const Real mean_dxhat_xhat =
                static_cast<Real>(static_cast<double>(gamma) * sum_dbn_xhat / m);
            for (int s = 0; s < n; ++s) {
                const Real* dbn = ws.scratch_a.data() + static_cast<std::size_t>(s) * conv_stride +
                                  static_cast<std::size_t>(c) * plane;
                const Real* xh = blk.xhat.data() + static_cast<std::size_t>(s) * conv_stride +
                                 static_cast<std::size_t>(c) * plane;
                Real* dcv = ws.scratch_b.data() + static_cast<std::size_t>(s) * conv_stride +
                            static_cast<std::size_t>(c) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    dcv[i] = inv_std * (gamma * dbn[i] - mean_dxhat - xh[i] * mean_dxhat_xhat);
            }
        }

        // conv backward
        const Real* conv_in;
        std::size_t in_stride;
        if (b == 0) {
            conv_in = ws.input.data();
            in_stride = static_cast<std::size_t>(rows * arch.window_len);
        } else {
            const auto& prev = ws.blocks[static_cast<std::size_t>(b - 1)];
            conv_in = prev.out.data();
            in_stride = static_cast<std::size_t>(F * rows * (prev.w_in / 2));
        }
        for (int s = 0; s < n; ++s)
            detail::conv_rowwise_backward_params(cp, conv_in + static_cast<std::size_t>(s) * in_stride,
                                                 ws.scratch_b.data() + static_cast<std::size_t>(s) * conv_stride,
                                                 grad.conv[static_cast<std::size_t>(b)], rows, w);
        if (b > 0) {
            // data gradient feeds the previous block's pool output
            for (int s = 0; s < n; ++s)
                detail::conv_rowwise_backward_data(
                    cp, ws.scratch_b.data() + static_cast<std::size_t>(s) * conv_stride,
                    ws.scratch_a.data() + static_cast<std::size_t>(s) * in_stride, rows, w);
            // move d into scratch_b for the next (previous) block iteration
            std::swap(ws.scratch_a, ws.scratch_b);
        }
    }

    if (l2 > 0.0) {
        auto& gref = grad;
        CnnParams<Real>& pref = const_cast<CnnParams<Real>&>(model.params);
        const Real two_l2 = static_cast<Real>(2.0 * l2);
        for_each_param_tensor(pref, [&](const std::string& name, std::vector<Real>& t, bool decay) {
            if (!decay) return;
            std::vector<Real>* gt = nullptr;
            for_each_param_tensor(gref, [&](const std::string& gname, std::vector<Real>& g, bool) {
                if (gname == name) gt = &g;
            });
            for (std::size_t i = 0; i < t.size(); ++i) (*gt)[i] += two_l2 * t[i];
        });
    }
}

}  // namespace lorafp
