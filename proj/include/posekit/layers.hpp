#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "posekit/rng.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

enum class Mode { Train, Eval };

// A named view of one parameter tensor and its gradient; the optimizer,
// checkpoint writer and gradient checker all iterate these.
template <class T>
struct ParamRef {
    std::string name;
    TensorT<T>* value = nullptr;
    TensorT<T>* grad = nullptr;
};

// Named persistent state that is not trained (batch-norm running stats).
template <class T>
struct StateRef {
    std::string name;
    TensorT<T>* value = nullptr;
};

namespace shape {

inline int conv_out(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

} // namespace shape

// ---------------------------------------------------------------------------
// Conv2d, channels-last. Input rank 3 = HxWxC, rank 4 = NxHxWxC.
// Weights are [k,k,Cin,Cout]; forward runs as im2col + GEMM (the 1x1/stride-1
// case skips the column copy).
// ---------------------------------------------------------------------------
template <class T>
struct Conv2d {
    int kernel = 0, in_ch = 0, out_ch = 0, stride = 1, pad = 0;
    TensorT<T> weight, bias, grad_weight, grad_bias;

    Conv2d() = default;
    Conv2d(int k, int cin, int cout, int stride_, int pad_)
        : kernel(k), in_ch(cin), out_ch(cout), stride(stride_), pad(pad_),
          weight({k, k, cin, cout}), bias({cout}),
          grad_weight({k, k, cin, cout}), grad_bias({cout}) {
        if (k < 1 || cin < 1 || cout < 1 || stride_ < 1 || pad_ < 0)
            throw ConfigError("bad conv geometry");
    }

    void init(Rng& rng) {
        const double fan_in = static_cast<double>(kernel) * kernel * in_ch;
        const double limit = std::sqrt(6.0 / fan_in);
        for (auto& w : weight.data) w = static_cast<T>(rng.uniform(-limit, limit));
        bias.zero();
    }

    std::vector<int> out_dims(const std::vector<int>& in) const {
        const bool batched = in.size() == 4;
        const int h = batched ? in[1] : in[0];
        const int w = batched ? in[2] : in[1];
        const int c = batched ? in[3] : in[2];
        if (c != in_ch) throw ConfigError("conv2d: channel mismatch");
        const int oh = shape::conv_out(h, kernel, stride, pad);
        const int ow = shape::conv_out(w, kernel, stride, pad);
        if (oh < 1 || ow < 1) throw ConfigError("conv2d: kernel larger than padded input");
        if (batched) return {in[0], oh, ow, out_ch};
        return {oh, ow, out_ch};
    }

    TensorT<T> forward(const TensorT<T>& x) const {
        if (x.rank() != 3 && x.rank() != 4) throw ConfigError("conv2d: rank must be 3 or 4");
        TensorT<T> y(out_dims(x.dims));
        const int n = x.rank() == 4 ? x.dim(0) : 1;
        const int h = x.rank() == 4 ? x.dim(1) : x.dim(0);
        const int w = x.rank() == 4 ? x.dim(2) : x.dim(1);
        const int oh = x.rank() == 4 ? y.dim(1) : y.dim(0);
        const int ow = x.rank() == 4 ? y.dim(2) : y.dim(1);
        const int rows = n * oh * ow;
        const int kc = kernel * kernel * in_ch;

        for (int r = 0; r < rows; ++r) {
            T* dst = y.data.data() + static_cast<size_t>(r) * out_ch;
            for (int c = 0; c < out_ch; ++c) dst[c] = bias.at(c);
        }
        if (kernel == 1 && stride == 1 && pad == 0) {
            gemm_nn(rows, out_ch, kc, x.data.data(), weight.data.data(), y.data.data());
            return y;
        }
        std::vector<T> col;
        im2col(x, n, h, w, oh, ow, col);
        gemm_nn(rows, out_ch, kc, col.data(), weight.data.data(), y.data.data());
        return y;
    }

    // Accumulates grad_weight/grad_bias and returns dL/dx.
    TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& dy) {
        const int n = x.rank() == 4 ? x.dim(0) : 1;
        const int h = x.rank() == 4 ? x.dim(1) : x.dim(0);
        const int w = x.rank() == 4 ? x.dim(2) : x.dim(1);
        const int oh = dy.rank() == 4 ? dy.dim(1) : dy.dim(0);
        const int ow = dy.rank() == 4 ? dy.dim(2) : dy.dim(1);
        const int rows = n * oh * ow;
        const int kc = kernel * kernel * in_ch;

        for (int r = 0; r < rows; ++r) {
            const T* g = dy.data.data() + static_cast<size_t>(r) * out_ch;
            for (int c = 0; c < out_ch; ++c) grad_bias.at(c) += g[c];
        }

        TensorT<T> dx(x.dims);
        if (kernel == 1 && stride == 1 && pad == 0) {
            gemm_tn(kc, out_ch, rows, x.data.data(), dy.data.data(), grad_weight.data.data());
            gemm_nt(rows, kc, out_ch, dy.data.data(), weight.data.data(), dx.data.data());
            return dx;
        }
        std::vector<T> col;
        im2col(x, n, h, w, oh, ow, col);
        gemm_tn(kc, out_ch, rows, col.data(), dy.data.data(), grad_weight.data.data());
        std::vector<T> dcol(col.size(), T(0));
        gemm_nt(rows, kc, out_ch, dy.data.data(), weight.data.data(), dcol.data());
        col2im(dcol, n, h, w, oh, ow, dx);
        return dx;
    }

    std::vector<ParamRef<T>> params(const std::string& prefix) {
        return {{prefix + ".weight", &weight, &grad_weight},
                {prefix + ".bias", &bias, &grad_bias}};
    }

private:
    void im2col(const TensorT<T>& x, int n, int h, int w, int oh, int ow,
                std::vector<T>& col) const {
        const int kc = kernel * kernel * in_ch;
        col.assign(static_cast<size_t>(n) * oh * ow * kc, T(0));
        const T* src = x.data.data();
        size_t r = 0;
        for (int b = 0; b < n; ++b) {
            const T* img = src + static_cast<size_t>(b) * h * w * in_ch;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox, ++r) {
                    T* dst = col.data() + r * kc;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            const T* cell = img + (static_cast<size_t>(iy) * w + ix) * in_ch;
                            T* out = dst + (static_cast<size_t>(ky) * kernel + kx) * in_ch;
                            for (int c = 0; c < in_ch; ++c) out[c] = cell[c];
                        }
                    }
                }
            }
        }
    }

    void col2im(const std::vector<T>& col, int n, int h, int w, int oh, int ow,
                TensorT<T>& dx) const {
        const int kc = kernel * kernel * in_ch;
        size_t r = 0;
        for (int b = 0; b < n; ++b) {
            T* img = dx.data.data() + static_cast<size_t>(b) * h * w * in_ch;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox, ++r) {
                    const T* src = col.data() + r * kc;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            T* cell = img + (static_cast<size_t>(iy) * w + ix) * in_ch;
                            const T* in = src + (static_cast<size_t>(ky) * kernel + kx) * in_ch;
                            for (int c = 0; c < in_ch; ++c) cell[c] += in[c];
                        }
                    }
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Linear: y = W x + b. Input rank 1 = single vector, rank 2 = batch.
// ---------------------------------------------------------------------------
template <class T>
struct Linear {
    int in_dim = 0, out_dim = 0;
    TensorT<T> weight, bias, grad_weight, grad_bias; // weight is [out,in]

    Linear() = default;
    Linear(int in, int out)
        : in_dim(in), out_dim(out), weight({out, in}), bias({out}),
          grad_weight({out, in}), grad_bias({out}) {
        if (in < 1 || out < 1) throw ConfigError("bad linear dims");
    }

    void init(Rng& rng) {
        const double limit = std::sqrt(6.0 / in_dim);
        for (auto& w : weight.data) w = static_cast<T>(rng.uniform(-limit, limit));
        bias.zero();
    }

    TensorT<T> forward(const TensorT<T>& x) const {
        const bool batched = x.rank() == 2;
        if (!batched && x.rank() != 1) throw ConfigError("linear: rank must be 1 or 2");
        const int b = batched ? x.dim(0) : 1;
        const int n = batched ? x.dim(1) : x.dim(0);
        if (n != in_dim) throw ConfigError("linear: input dim mismatch");
        TensorT<T> y(batched ? std::vector<int>{b, out_dim} : std::vector<int>{out_dim});
        for (int i = 0; i < b; ++i) {
            T* row = y.data.data() + static_cast<size_t>(i) * out_dim;
            for (int j = 0; j < out_dim; ++j) row[j] = bias.at(j);
        }
        gemm_nt(b, out_dim, in_dim, x.data.data(), weight.data.data(), y.data.data());
        return y;
    }

    TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& dy) {
        const bool batched = x.rank() == 2;
        const int b = batched ? x.dim(0) : 1;
        for (int i = 0; i < b; ++i) {
            const T* g = dy.data.data() + static_cast<size_t>(i) * out_dim;
            for (int j = 0; j < out_dim; ++j) grad_bias.at(j) += g[j];
        }
        // dW[m,n] = sum_b dy[b,m] x[b,n]
        for (int i = 0; i < b; ++i) {
            const T* g = dy.data.data() + static_cast<size_t>(i) * out_dim;
            const T* xv = x.data.data() + static_cast<size_t>(i) * in_dim;
            for (int m = 0; m < out_dim; ++m) {
                const T gv = g[m];
                if (gv == T(0)) continue;
                T* wrow = grad_weight.data.data() + static_cast<size_t>(m) * in_dim;
                for (int n = 0; n < in_dim; ++n) wrow[n] += gv * xv[n];
            }
        }
        TensorT<T> dx(x.dims);
        gemm_nn(b, in_dim, out_dim, dy.data.data(), weight.data.data(), dx.data.data());
        return dx;
    }

    std::vector<ParamRef<T>> params(const std::string& prefix) {
        return {{prefix + ".weight", &weight, &grad_weight},
                {prefix + ".bias", &bias, &grad_bias}};
    }
};

// ---------------------------------------------------------------------------
// BatchNorm over the channel (last) axis. Accepts [B,C] or [B,H,W,C]; batch
// statistics pool everything but the channel axis. Train mode needs B >= 2.
// Running stats use biased variance and momentum 0.9.
// ---------------------------------------------------------------------------
template <class T>
struct BatchNorm {
    int channels = 0;
    T momentum = T(0.9);
    T epsilon = T(1e-5);
    TensorT<T> gamma, beta, grad_gamma, grad_beta;
    TensorT<T> running_mean, running_var;

    // forward cache for backward
    TensorT<T> xhat_;
    std::vector<T> mean_, inv_std_;
    Mode cached_mode_ = Mode::Eval;

    BatchNorm() = default;
    explicit BatchNorm(int c)
        : channels(c), gamma({c}, T(1)), beta({c}), grad_gamma({c}), grad_beta({c}),
          running_mean({c}), running_var({c}, T(1)) {}

    TensorT<T> forward(const TensorT<T>& x, Mode mode) {
        if (x.rank() < 2) throw ConfigError("batchnorm: input must be batched");
        if (x.dims.back() != channels) throw ConfigError("batchnorm: channel mismatch");
        const int batch = x.dim(0);
        if (mode == Mode::Train && batch < 2)
            throw ConfigError("batchnorm: train mode needs batch >= 2");
        const size_t c = static_cast<size_t>(channels);
        const size_t groups = x.numel() / c;

        TensorT<T> y(x.dims);
        mean_.assign(c, T(0));
        inv_std_.assign(c, T(0));
        cached_mode_ = mode;

        if (mode == Mode::Train) {
            std::vector<T> var(c, T(0));
            for (size_t g = 0; g < groups; ++g) {
                const T* row = x.data.data() + g * c;
                for (size_t j = 0; j < c; ++j) mean_[j] += row[j];
            }
            for (size_t j = 0; j < c; ++j) mean_[j] /= static_cast<T>(groups);
            for (size_t g = 0; g < groups; ++g) {
                const T* row = x.data.data() + g * c;
                for (size_t j = 0; j < c; ++j) {
                    const T d = row[j] - mean_[j];
                    var[j] += d * d;
                }
            }
            for (size_t j = 0; j < c; ++j) var[j] /= static_cast<T>(groups);
            for (size_t j = 0; j < c; ++j) {
                running_mean.data[j] = momentum * running_mean.data[j] + (T(1) - momentum) * mean_[j];
                running_var.data[j] = momentum * running_var.data[j] + (T(1) - momentum) * var[j];
                inv_std_[j] = T(1) / std::sqrt(var[j] + epsilon);
            }
            xhat_ = TensorT<T>(x.dims);
            for (size_t g = 0; g < groups; ++g) {
                const T* row = x.data.data() + g * c;
                T* xh = xhat_.data.data() + g * c;
                T* out = y.data.data() + g * c;
                for (size_t j = 0; j < c; ++j) {
                    xh[j] = (row[j] - mean_[j]) * inv_std_[j];
                    out[j] = gamma.data[j] * xh[j] + beta.data[j];
                }
            }
        } else {
            for (size_t j = 0; j < c; ++j)
                inv_std_[j] = T(1) / std::sqrt(running_var.data[j] + epsilon);
            for (size_t g = 0; g < groups; ++g) {
                const T* row = x.data.data() + g * c;
                T* out = y.data.data() + g * c;
                for (size_t j = 0; j < c; ++j)
                    out[j] = gamma.data[j] * (row[j] - running_mean.data[j]) * inv_std_[j] +
                             beta.data[j];
            }
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& x, const TensorT<T>& dy) {
        const size_t c = static_cast<size_t>(channels);
        const size_t groups = x.numel() / c;
        TensorT<T> dx(x.dims);

        if (cached_mode_ == Mode::Eval) {
            for (size_t g = 0; g < groups; ++g) {
                const T* gin = dy.data.data() + g * c;
                const T* row = x.data.data() + g * c;
                T* out = dx.data.data() + g * c;
                for (size_t j = 0; j < c; ++j) {
                    const T xh = (row[j] - running_mean.data[j]) * inv_std_[j];
                    grad_gamma.data[j] += gin[j] * xh;
                    grad_beta.data[j] += gin[j];
                    out[j] = gin[j] * gamma.data[j] * inv_std_[j];
                }
            }
            return dx;
        }

        std::vector<T> sum_dy(c, T(0)), sum_dy_xhat(c, T(0));
        for (size_t g = 0; g < groups; ++g) {
            const T* gin = dy.data.data() + g * c;
            const T* xh = xhat_.data.data() + g * c;
            for (size_t j = 0; j < c; ++j) {
                sum_dy[j] += gin[j];
                sum_dy_xhat[j] += gin[j] * xh[j];
            }
        }
        for (size_t j = 0; j < c; ++j) {
            grad_gamma.data[j] += sum_dy_xhat[j];
            grad_beta.data[j] += sum_dy[j];
        }
        const T m = static_cast<T>(groups);
        for (size_t g = 0; g < groups; ++g) {
            const T* gin = dy.data.data() + g * c;
            const T* xh = xhat_.data.data() + g * c;
            T* out = dx.data.data() + g * c;
            for (size_t j = 0; j < c; ++j) {
                out[j] = gamma.data[j] * inv_std_[j] / m *
                         (m * gin[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]);
            }
        }
        return dx;
    }

    std::vector<ParamRef<T>> params(const std::string& prefix) {
        return {{prefix + ".gamma", &gamma, &grad_gamma},
                {prefix + ".beta", &beta, &grad_beta}};
    }
    std::vector<StateRef<T>> state(const std::string& prefix) {
        return {{prefix + ".running_mean", &running_mean},
                {prefix + ".running_var", &running_var}};
    }
};

// ---------------------------------------------------------------------------
// Stateless / elementwise pieces.
// ---------------------------------------------------------------------------

template <class T>
inline TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.dims);
    for (size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return y;
}

template <class T>
inline TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& dy) {
    TensorT<T> dx(x.dims);
    for (size_t i = 0; i < x.numel(); ++i) dx.data[i] = x.data[i] > T(0) ? dy.data[i] : T(0);
    return dx;
}

// Dropout keeps its mask so backward matches forward exactly. Eval mode is
// the identity. Survivors are scaled by 1/(1-p).
template <class T>
struct Dropout {
    double p = 0.5;
    TensorT<T> mask_;

    explicit Dropout(double prob = 0.5) : p(prob) {
        if (p < 0.0 || p >= 1.0) throw ConfigError("dropout p must be in [0,1)");
    }

    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng& rng) {
        if (mode == Mode::Eval) {
            mask_ = TensorT<T>();
            return x;
        }
        const T scale = static_cast<T>(1.0 / (1.0 - p));
        mask_ = TensorT<T>(x.dims);
        TensorT<T> y(x.dims);
        for (size_t i = 0; i < x.numel(); ++i) {
            const T m = rng.uniform() < p ? T(0) : scale;
            mask_.data[i] = m;
            y.data[i] = x.data[i] * m;
        }
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) const {
        if (mask_.numel() == 0) return dy; // eval mode
        TensorT<T> dx(dy.dims);
        for (size_t i = 0; i < dy.numel(); ++i) dx.data[i] = dy.data[i] * mask_.data[i];
        return dx;
    }
};

// Row-wise stable softmax; rank 1 = one row, rank 2 = batch of rows.
template <class T>
inline TensorT<T> softmax(const TensorT<T>& x) {
    const bool batched = x.rank() == 2;
    const int b = batched ? x.dim(0) : 1;
    const int k = batched ? x.dim(1) : x.dim(0);
    TensorT<T> y(x.dims);
    for (int i = 0; i < b; ++i) {
        const T* in = x.data.data() + static_cast<size_t>(i) * k;
        T* out = y.data.data() + static_cast<size_t>(i) * k;
        T m = in[0];
        for (int j = 1; j < k; ++j) m = std::max(m, in[j]);
        T sum = T(0);
        for (int j = 0; j < k; ++j) {
            out[j] = std::exp(in[j] - m);
            sum += out[j];
        }
        for (int j = 0; j < k; ++j) out[j] /= sum;
    }
    return y;
}

// ---------------------------------------------------------------------------
// Bilinear upsampling with corner alignment: output corners sample input
// corners exactly, so constant maps stay constant. Rank 3 or 4, channels
// last. out >= in per axis.
// ---------------------------------------------------------------------------
namespace detail {

struct LerpTap {
    int i0, i1;
    double w0, w1;
};

inline std::vector<LerpTap> upsample_taps(int in, int out) {
    std::vector<LerpTap> taps(static_cast<size_t>(out));
    const double scale = out > 1 ? static_cast<double>(in - 1) / (out - 1) : 0.0;
    for (int o = 0; o < out; ++o) {
        const double src = o * scale;
        int i0 = static_cast<int>(std::floor(src));
        if (i0 > in - 2) i0 = in - 2;
        if (i0 < 0) i0 = 0;
        const int i1 = in > 1 ? i0 + 1 : 0;
        const double f = in > 1 ? src - i0 : 0.0;
        taps[static_cast<size_t>(o)] = {i0, i1, 1.0 - f, f};
    }
    return taps;
}

} // namespace detail

template <class T>
inline TensorT<T> upsample_bilinear(const TensorT<T>& x, int out_h, int out_w) {
    const bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3) throw ConfigError("upsample: rank must be 3 or 4");
    const int n = batched ? x.dim(0) : 1;
    const int h = batched ? x.dim(1) : x.dim(0);
    const int w = batched ? x.dim(2) : x.dim(1);
    const int c = batched ? x.dim(3) : x.dim(2);
    if (out_h < h || out_w < w) throw ConfigError("upsample: output must not shrink input");

    const auto ty = detail::upsample_taps(h, out_h);
    const auto tx = detail::upsample_taps(w, out_w);
    TensorT<T> y(batched ? std::vector<int>{n, out_h, out_w, c}
                         : std::vector<int>{out_h, out_w, c});
    for (int b = 0; b < n; ++b) {
        const T* img = x.data.data() + static_cast<size_t>(b) * h * w * c;
        T* dst = y.data.data() + static_cast<size_t>(b) * out_h * out_w * c;
        for (int oy = 0; oy < out_h; ++oy) {
            const auto& sy = ty[static_cast<size_t>(oy)];
            for (int ox = 0; ox < out_w; ++ox) {
                const auto& sx = tx[static_cast<size_t>(ox)];
                const T* p00 = img + (static_cast<size_t>(sy.i0) * w + sx.i0) * c;
                const T* p01 = img + (static_cast<size_t>(sy.i0) * w + sx.i1) * c;
                const T* p10 = img + (static_cast<size_t>(sy.i1) * w + sx.i0) * c;
                const T* p11 = img + (static_cast<size_t>(sy.i1) * w + sx.i1) * c;
                T* out = dst + (static_cast<size_t>(oy) * out_w + ox) * c;
                for (int ch = 0; ch < c; ++ch) {
                    out[ch] = static_cast<T>(sy.w0 * (sx.w0 * p00[ch] + sx.w1 * p01[ch]) +
                                             sy.w1 * (sx.w0 * p10[ch] + sx.w1 * p11[ch]));
                }
            }
        }
    }
    return y;
}

template <class T>
inline TensorT<T> upsample_bilinear_backward(const std::vector<int>& in_dims,
                                             const TensorT<T>& dy) {
    const bool batched = dy.rank() == 4;
    const int n = batched ? dy.dim(0) : 1;
    const int out_h = batched ? dy.dim(1) : dy.dim(0);
    const int out_w = batched ? dy.dim(2) : dy.dim(1);
    const int c = batched ? dy.dim(3) : dy.dim(2);
    const int h = batched ? in_dims[1] : in_dims[0];
    const int w = batched ? in_dims[2] : in_dims[1];

    const auto ty = detail::upsample_taps(h, out_h);
    const auto tx = detail::upsample_taps(w, out_w);
    TensorT<T> dx(in_dims);
    for (int b = 0; b < n; ++b) {
        T* img = dx.data.data() + static_cast<size_t>(b) * h * w * c;
        const T* src = dy.data.data() + static_cast<size_t>(b) * out_h * out_w * c;
        for (int oy = 0; oy < out_h; ++oy) {
            const auto& sy = ty[static_cast<size_t>(oy)];
            for (int ox = 0; ox < out_w; ++ox) {
                const auto& sx = tx[static_cast<size_t>(ox)];
                const T* g = src + (static_cast<size_t>(oy) * out_w + ox) * c;
                T* p00 = img + (static_cast<size_t>(sy.i0) * w + sx.i0) * c;
                T* p01 = img + (static_cast<size_t>(sy.i0) * w + sx.i1) * c;
                T* p10 = img + (static_cast<size_t>(sy.i1) * w + sx.i0) * c;
                T* p11 = img + (static_cast<size_t>(sy.i1) * w + sx.i1) * c;
                for (int ch = 0; ch < c; ++ch) {
                    p00[ch] += static_cast<T>(sy.w0 * sx.w0 * g[ch]);
                    p01[ch] += static_cast<T>(sy.w0 * sx.w1 * g[ch]);
                    p10[ch] += static_cast<T>(sy.w1 * sx.w0 * g[ch]);
                    p11[ch] += static_cast<T>(sy.w1 * sx.w1 * g[ch]);
                }
            }
        }
    }
    return dx;
}

template <class T>
inline T sigmoid(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

} // namespace posekit
