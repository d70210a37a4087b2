#ifndef E2I_CORE_OPS_HPP
#define E2I_CORE_OPS_HPP

#include <cmath>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

// Layer primitives, templated on scalar so gradient-check tests can run the
// exact same code in double while training runs in float. All tensors are
// row-major; images are NCHW inside the network stack.
namespace e2i::nn {

template <class S>
struct Param {
    Tensor<S> value;
    Tensor<S> grad;

    void resize(std::vector<int64_t> shape) {
        value = Tensor<S>(shape);
        grad = Tensor<S>(std::move(shape));
    }
    void zero_grad() { grad.fill(S(0)); }
};

template <class S>
void init_uniform(Rng& rng, Tensor<S>& t, double lo, double hi) {
    for (auto& v : t.data) v = static_cast<S>(rng.uniform(lo, hi));
}

template <class S>
void init_normal(Rng& rng, Tensor<S>& t, double mean, double stddev) {
    for (auto& v : t.data) v = static_cast<S>(rng.normal(mean, stddev));
}

// ---------------------------------------------------------------- dense

// y[N,out] = x[N,in] * w[out,in]^T + b
template <class S>
void dense_forward(const Tensor<S>& x, const Param<S>& w, const Param<S>& b, Tensor<S>& y) {
    const int64_t n = x.dim(0), in = x.dim(1), out = w.value.dim(0);
    require(w.value.dim(1) == in, Status::shape, "dense: weight/input mismatch");
    y = Tensor<S>({n, out});
    y.mat(n, out).noalias() = x.mat(n, in) * w.value.mat(out, in).transpose();
    y.mat(n, out).rowwise() += b.value.mat(1, out).row(0);
}

template <class S>
void dense_backward(const Tensor<S>& x, Param<S>& w, Param<S>& b, const Tensor<S>& gy,
                    Tensor<S>* gx) {
    const int64_t n = x.dim(0), in = x.dim(1), out = w.value.dim(0);
    w.grad.mat(out, in).noalias() += gy.mat(n, out).transpose() * x.mat(n, in);
    b.grad.mat(1, out).row(0) += gy.mat(n, out).colwise().sum();
    if (gx) {
        *gx = Tensor<S>({n, in});
        gx->mat(n, in).noalias() = gy.mat(n, out) * w.value.mat(out, in);
    }
}

// ---------------------------------------------------------------- activations

template <class S>
void relu_forward(Tensor<S>& x) {
    for (auto& v : x.data) v = v > S(0) ? v : S(0);
}

// gx = gy where y > 0; y is the forward output
template <class S>
void relu_backward(const Tensor<S>& y, Tensor<S>& gy) {
    for (int64_t i = 0; i < y.numel(); ++i) {
        if (!(y.data[static_cast<size_t>(i)] > S(0))) gy.data[static_cast<size_t>(i)] = S(0);
    }
}

template <class S>
void lrelu_forward(Tensor<S>& x, double slope) {
    const S a = static_cast<S>(slope);
    for (auto& v : x.data) v = v > S(0) ? v : a * v;
}

template <class S>
void lrelu_backward(const Tensor<S>& y, double slope, Tensor<S>& gy) {
    const S a = static_cast<S>(slope);
    for (int64_t i = 0; i < y.numel(); ++i) {
        if (!(y.data[static_cast<size_t>(i)] > S(0))) gy.data[static_cast<size_t>(i)] *= a;
    }
}

template <class S>
void tanh_forward(Tensor<S>& x) {
    for (auto& v : x.data) v = std::tanh(v);
}

template <class S>
void tanh_backward(const Tensor<S>& y, Tensor<S>& gy) {
    for (int64_t i = 0; i < y.numel(); ++i) {
        const S t = y.data[static_cast<size_t>(i)];
        gy.data[static_cast<size_t>(i)] *= (S(1) - t * t);
    }
}

// ---------------------------------------------------------------- conv2d

inline int64_t conv_out_dim(int64_t in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

// x[C,H,W] -> col[C*k*k, Ho*Wo]
template <class S>
void im2col(const S* x, int64_t c_in, int64_t h, int64_t w, int k, int s, int p, S* col) {
    const int64_t ho = conv_out_dim(h, k, s, p);
    const int64_t wo = conv_out_dim(w, k, s, p);
    for (int64_t c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                S* dst = col + ((c * k + ky) * k + kx) * ho * wo;
                for (int64_t oy = 0; oy < ho; ++oy) {
                    const int64_t iy = oy * s - p + ky;
                    for (int64_t ox = 0; ox < wo; ++ox) {
                        const int64_t ix = ox * s - p + kx;
                        const bool in_bounds = iy >= 0 && iy < h && ix >= 0 && ix < w;
                        dst[oy * wo + ox] = in_bounds ? x[(c * h + iy) * w + ix] : S(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add col back into the image.
template <class S>
void col2im(const S* col, int64_t c_in, int64_t h, int64_t w, int k, int s, int p, S* x) {
    const int64_t ho = conv_out_dim(h, k, s, p);
    const int64_t wo = conv_out_dim(w, k, s, p);
    std::fill(x, x + c_in * h * w, S(0));
    for (int64_t c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const S* src = col + ((c * k + ky) * k + kx) * ho * wo;
                for (int64_t oy = 0; oy < ho; ++oy) {
                    const int64_t iy = oy * s - p + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t ox = 0; ox < wo; ++ox) {
                        const int64_t ix = ox * s - p + kx;
                        if (ix < 0 || ix >= w) continue;
                        x[(c * h + iy) * w + ix] += src[oy * wo + ox];
                    }
                }
            }
        }
    }
}

// w[Cout, Cin, k, k]; per-sample GEMM over an im2col buffer.
template <class S>
void conv2d_forward(const Tensor<S>& x, const Param<S>& w, const Param<S>& b, int k, int s,
                    int p, Tensor<S>& y, Tensor<S>& col_scratch) {
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t cout = w.value.dim(0);
    require(w.value.dim(1) == cin, Status::shape, "conv2d: channel mismatch");
    const int64_t ho = conv_out_dim(h, k, s, p), wo = conv_out_dim(wd, k, s, p);
    const int64_t ckk = cin * k * k;
    y = Tensor<S>({n, cout, ho, wo});
    col_scratch = Tensor<S>({ckk, ho * wo});
    const auto wm = w.value.mat(cout, ckk);
    for (int64_t i = 0; i < n; ++i) {
        im2col(x.ptr() + i * cin * h * wd, cin, h, wd, k, s, p, col_scratch.ptr());
        MapMat<S> ym(y.ptr() + i * cout * ho * wo, cout, ho * wo);
        ym.noalias() = wm * col_scratch.mat(ckk, ho * wo);
        for (int64_t c = 0; c < cout; ++c) {
            ym.row(c).array() += b.value.data[static_cast<size_t>(c)];
        }
    }
}

template <class S>
void conv2d_backward(const Tensor<S>& x, Param<S>& w, Param<S>& b, int k, int s, int p,
                     const Tensor<S>& gy, Tensor<S>* gx, Tensor<S>& col_scratch) {
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t cout = w.value.dim(0);
    const int64_t ho = gy.dim(2), wo = gy.dim(3);
    const int64_t ckk = cin * k * k;
    col_scratch = Tensor<S>({ckk, ho * wo});
    Tensor<S> gcol({ckk, ho * wo});
    if (gx) *gx = Tensor<S>({n, cin, h, wd});
    auto wgrad = w.grad.mat(cout, ckk);
    const auto wm = w.value.mat(cout, ckk);
    for (int64_t i = 0; i < n; ++i) {
        CMapMat<S> gym(gy.ptr() + i * cout * ho * wo, cout, ho * wo);
        im2col(x.ptr() + i * cin * h * wd, cin, h, wd, k, s, p, col_scratch.ptr());
        wgrad.noalias() += gym * col_scratch.mat(ckk, ho * wo).transpose();
        for (int64_t c = 0; c < cout; ++c) {
            b.grad.data[static_cast<size_t>(c)] += gym.row(c).sum();
        }
        if (gx) {
            gcol.mat(ckk, ho * wo).noalias() = wm.transpose() * gym;
            col2im(gcol.ptr(), cin, h, wd, k, s, p, gx->ptr() + i * cin * h * wd);
        }
    }
}

// ---------------------------------------------------------------- transpose conv

inline int64_t convt_out_dim(int64_t in, int kernel, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + kernel;
}

// w[Cin, Cout, k, k]; the exact adjoint of conv2d with the same k/s/p.
template <class S>
void convt2d_forward(const Tensor<S>& x, const Param<S>& w, const Param<S>& b, int k, int s,
                     int p, Tensor<S>& y) {
    const int64_t n = x.dim(0), cin = x.dim(1), hi = x.dim(2), wi = x.dim(3);
    const int64_t cout = w.value.dim(1);
    require(w.value.dim(0) == cin, Status::shape, "convt2d: channel mismatch");
    const int64_t ho = convt_out_dim(hi, k, s, p), wo = convt_out_dim(wi, k, s, p);
    const int64_t ckk = cout * k * k;
    y = Tensor<S>({n, cout, ho, wo});
    Tensor<S> col({ckk, hi * wi});
    const auto wm = w.value.mat(cin, ckk);
    for (int64_t i = 0; i < n; ++i) {
        CMapMat<S> xm(x.ptr() + i * cin * hi * wi, cin, hi * wi);
        col.mat(ckk, hi * wi).noalias() = wm.transpose() * xm;
        col2im(col.ptr(), cout, ho, wo, k, s, p, y.ptr() + i * cout * ho * wo);
        MapMat<S> ym(y.ptr() + i * cout * ho * wo, cout, ho * wo);
        for (int64_t c = 0; c < cout; ++c) {
            ym.row(c).array() += b.value.data[static_cast<size_t>(c)];
        }
    }
}

template <class S>
void convt2d_backward(const Tensor<S>& x, Param<S>& w, Param<S>& b, int k, int s, int p,
                      const Tensor<S>& gy, Tensor<S>* gx) {
    const int64_t n = x.dim(0), cin = x.dim(1), hi = x.dim(2), wi = x.dim(3);
    const int64_t cout = w.value.dim(1);
    const int64_t ho = gy.dim(2), wo = gy.dim(3);
    const int64_t ckk = cout * k * k;
    Tensor<S> gcol({ckk, hi * wi});
    if (gx) *gx = Tensor<S>({n, cin, hi, wi});
    auto wgrad = w.grad.mat(cin, ckk);
    const auto wm = w.value.mat(cin, ckk);
    for (int64_t i = 0; i < n; ++i) {
        CMapMat<S> gym(gy.ptr() + i * cout * ho * wo, cout, ho * wo);
        im2col(gy.ptr() + i * cout * ho * wo, cout, ho, wo, k, s, p, gcol.ptr());
        CMapMat<S> xm(x.ptr() + i * cin * hi * wi, cin, hi * wi);
        wgrad.noalias() += xm * gcol.mat(ckk, hi * wi).transpose();
        for (int64_t c = 0; c < cout; ++c) {
            b.grad.data[static_cast<size_t>(c)] += gym.row(c).sum();
        }
        if (gx) {
            MapMat<S> gxm(gx->ptr() + i * cin * hi * wi, cin, hi * wi);
            gxm.noalias() = wm * gcol.mat(ckk, hi * wi);
        }
    }
}

// ---------------------------------------------------------------- batch norm

// Per-channel normalization over N*H*W. Training uses batch statistics and
// maintains running averages for inference.
template <class S>
struct BatchNorm {
    Param<S> gamma, beta;
    Tensor<S> running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    void init(int64_t channels) {
        gamma.resize({channels});
        beta.resize({channels});
        gamma.value.fill(S(1));
        running_mean = Tensor<S>({channels});
        running_var = Tensor<S>({channels});
        running_var.fill(S(1));
    }

    struct Cache {
        Tensor<S> xhat;      // normalized input, same shape as x
        std::vector<S> inv;  // 1/sqrt(var+eps) per channel
        int64_t count = 0;   // N*H*W per channel
    };

    // x is [N,C,H,W] (or [N,C] with spatial = 1).
    void forward(const Tensor<S>& x, bool train, Tensor<S>& y, Cache* cache) {
        const int64_t n = x.dim(0), c = x.dim(1);
        const int64_t spatial = x.numel() / (n * c);
        y = Tensor<S>(x.shape);
        if (train) {
            require(cache != nullptr, Status::internal, "batchnorm: train needs a cache");
            cache->xhat = Tensor<S>(x.shape);
            cache->inv.assign(static_cast<size_t>(c), S(0));
            cache->count = n * spatial;
        }
        for (int64_t ch = 0; ch < c; ++ch) {
            double mean, var;
            if (train) {
                double sum = 0.0;
                for (int64_t i = 0; i < n; ++i) {
                    const S* row = x.ptr() + (i * c + ch) * spatial;
                    for (int64_t j = 0; j < spatial; ++j) sum += row[j];
                }
                mean = sum / static_cast<double>(n * spatial);
                double sq = 0.0;
                for (int64_t i = 0; i < n; ++i) {
                    const S* row = x.ptr() + (i * c + ch) * spatial;
                    for (int64_t j = 0; j < spatial; ++j) {
                        const double d = row[j] - mean;
                        sq += d * d;
                    }
                }
                var = sq / static_cast<double>(n * spatial);
                running_mean.data[static_cast<size_t>(ch)] = static_cast<S>(
                    (1.0 - momentum) * running_mean.data[static_cast<size_t>(ch)] +
                    momentum * mean);
                running_var.data[static_cast<size_t>(ch)] = static_cast<S>(
                    (1.0 - momentum) * running_var.data[static_cast<size_t>(ch)] +
                    momentum * var);
            } else {
                mean = running_mean.data[static_cast<size_t>(ch)];
                var = running_var.data[static_cast<size_t>(ch)];
            }
            const S inv = static_cast<S>(1.0 / std::sqrt(var + eps));
            const S g = gamma.value.data[static_cast<size_t>(ch)];
            const S bt = beta.value.data[static_cast<size_t>(ch)];
            const S mu = static_cast<S>(mean);
            if (train) cache->inv[static_cast<size_t>(ch)] = inv;
            for (int64_t i = 0; i < n; ++i) {
                const S* row = x.ptr() + (i * c + ch) * spatial;
                S* out = y.ptr() + (i * c + ch) * spatial;
                S* xh = train ? cache->xhat.ptr() + (i * c + ch) * spatial : nullptr;
                for (int64_t j = 0; j < spatial; ++j) {
                    const S hat = (row[j] - mu) * inv;
                    if (xh) xh[j] = hat;
                    out[j] = g * hat + bt;
                }
            }
        }
    }

    void backward(const Cache& cache, const Tensor<S>& gy, Tensor<S>& gx) {
        const int64_t n = gy.dim(0), c = gy.dim(1);
        const int64_t spatial = gy.numel() / (n * c);
        const double m = static_cast<double>(cache.count);
        gx = Tensor<S>(gy.shape);
        for (int64_t ch = 0; ch < c; ++ch) {
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                const S* g = gy.ptr() + (i * c + ch) * spatial;
                const S* xh = cache.xhat.ptr() + (i * c + ch) * spatial;
                for (int64_t j = 0; j < spatial; ++j) {
                    sum_gy += g[j];
                    sum_gy_xhat += static_cast<double>(g[j]) * xh[j];
                }
            }
            gamma.grad.data[static_cast<size_t>(ch)] += static_cast<S>(sum_gy_xhat);
            beta.grad.data[static_cast<size_t>(ch)] += static_cast<S>(sum_gy);
            const double g = gamma.value.data[static_cast<size_t>(ch)];
            const double inv = cache.inv[static_cast<size_t>(ch)];
            const double k = g * inv / m;
            for (int64_t i = 0; i < n; ++i) {
                const S* gyp = gy.ptr() + (i * c + ch) * spatial;
                const S* xh = cache.xhat.ptr() + (i * c + ch) * spatial;
                S* gxp = gx.ptr() + (i * c + ch) * spatial;
                for (int64_t j = 0; j < spatial; ++j) {
                    gxp[j] = static_cast<S>(
                        k * (m * gyp[j] - sum_gy - static_cast<double>(xh[j]) * sum_gy_xhat));
                }
            }
        }
    }
};

// ---------------------------------------------------------------- softmax / xent

// Mean cross-entropy over the batch; dlogits = (softmax - onehot)/N.
template <class S>
double softmax_xent(const Tensor<S>& logits, const std::vector<int>& labels, Tensor<S>* probs,
                    Tensor<S>* dlogits) {
    const int64_t n = logits.dim(0), k = logits.dim(1);
    require(static_cast<int64_t>(labels.size()) == n, Status::shape,
            "softmax_xent: label count mismatch");
    if (probs) *probs = Tensor<S>({n, k});
    if (dlogits) *dlogits = Tensor<S>({n, k});
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const S* row = logits.ptr() + i * k;
        double mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max<double>(mx, row[j]);
        double z = 0.0;
        for (int64_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
        const double lse = mx + std::log(z);
        const int y = labels[static_cast<size_t>(i)];
        loss += lse - row[y];
        for (int64_t j = 0; j < k; ++j) {
            const double pj = std::exp(static_cast<double>(row[j]) - lse);
            if (probs) probs->data[static_cast<size_t>(i * k + j)] = static_cast<S>(pj);
            if (dlogits) {
                const double d = (pj - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
                dlogits->data[static_cast<size_t>(i * k + j)] = static_cast<S>(d);
            }
        }
    }
    return loss / static_cast<double>(n);
}

// ---------------------------------------------------------------- row L2 norm

template <class S>
void l2_normalize_rows(const Tensor<S>& x, Tensor<S>& y, std::vector<S>* norms) {
    const int64_t n = x.dim(0), d = x.dim(1);
    y = Tensor<S>({n, d});
    if (norms) norms->assign(static_cast<size_t>(n), S(0));
    for (int64_t i = 0; i < n; ++i) {
        const S* row = x.ptr() + i * d;
        double sq = 0.0;
        for (int64_t j = 0; j < d; ++j) sq += static_cast<double>(row[j]) * row[j];
        const S nrm = static_cast<S>(std::max(std::sqrt(sq), 1e-12));
        if (norms) (*norms)[static_cast<size_t>(i)] = nrm;
        S* out = y.ptr() + i * d;
        for (int64_t j = 0; j < d; ++j) out[j] = row[j] / nrm;
    }
}

// gx = (gy - y * (y . gy)) / norm
template <class S>
void l2_normalize_rows_backward(const Tensor<S>& y, const std::vector<S>& norms,
                                const Tensor<S>& gy, Tensor<S>& gx) {
    const int64_t n = y.dim(0), d = y.dim(1);
    gx = Tensor<S>({n, d});
    for (int64_t i = 0; i < n; ++i) {
        const S* yr = y.ptr() + i * d;
        const S* gr = gy.ptr() + i * d;
        double dot = 0.0;
        for (int64_t j = 0; j < d; ++j) dot += static_cast<double>(yr[j]) * gr[j];
        S* out = gx.ptr() + i * d;
        const S nrm = norms[static_cast<size_t>(i)];
        for (int64_t j = 0; j < d; ++j) {
            out[j] = static_cast<S>((gr[j] - yr[j] * dot) / nrm);
        }
    }
}

}  // namespace e2i::nn

#endif
