#ifndef E2I_CORE_LSTM_HPP
#define E2I_CORE_LSTM_HPP

#include <cmath>
#include <vector>

#include "ops.hpp"

// Single-layer LSTM unrolled over time. Input is [N, C, T]; the final hidden
// state is the sequence summary handed to the projection head. Gate rows in
// the packed weight matrices follow the order i, f, g, o.
namespace e2i::nn {

template <class S>
struct Lstm {
    Param<S> wx;  // [4H, C]
    Param<S> wh;  // [4H, H]
    Param<S> b;   // [4H]
    int64_t hidden = 0;
    int64_t input = 0;

    void init(Rng& rng, int64_t input_dim, int64_t hidden_dim) {
        input = input_dim;
        hidden = hidden_dim;
        wx.resize({4 * hidden, input});
        wh.resize({4 * hidden, hidden});
        b.resize({4 * hidden});
        const double a = 1.0 / std::sqrt(static_cast<double>(hidden));
        init_uniform(rng, wx.value, -a, a);
        init_uniform(rng, wh.value, -a, a);
        // forget-gate bias starts at 1 so early gradients flow through time
        for (int64_t j = hidden; j < 2 * hidden; ++j) b.value.data[static_cast<size_t>(j)] = S(1);
    }

    struct Cache {
        int64_t n = 0, t = 0;
        std::vector<Tensor<S>> xt;      // [N,C] per step
        std::vector<Tensor<S>> gates;   // [N,4H] post-activation per step
        std::vector<Tensor<S>> c_prev;  // [N,H] cell state entering the step
        std::vector<Tensor<S>> tanh_c;  // [N,H] tanh of the new cell state
        std::vector<Tensor<S>> h_prev;  // [N,H] hidden entering the step
    };

    static S sigmoid(S v) { return S(1) / (S(1) + std::exp(-v)); }

    // x[N,C,T] -> final hidden state [N,H]
    void forward(const Tensor<S>& x, Tensor<S>& h_final, Cache& cache) const {
        const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2);
        require(c == input, Status::shape, "lstm: channel mismatch");
        cache.n = n;
        cache.t = t;
        cache.xt.assign(static_cast<size_t>(t), Tensor<S>());
        cache.gates.assign(static_cast<size_t>(t), Tensor<S>());
        cache.c_prev.assign(static_cast<size_t>(t), Tensor<S>());
        cache.tanh_c.assign(static_cast<size_t>(t), Tensor<S>());
        cache.h_prev.assign(static_cast<size_t>(t), Tensor<S>());
        Tensor<S> h({n, hidden}), cell({n, hidden});
        h.fill(S(0));
        cell.fill(S(0));
        Tensor<S> act({n, 4 * hidden});
        for (int64_t step = 0; step < t; ++step) {
            Tensor<S>& xt = cache.xt[static_cast<size_t>(step)];
            xt = Tensor<S>({n, c});
            for (int64_t i = 0; i < n; ++i) {
                for (int64_t ch = 0; ch < c; ++ch) {
                    xt.data[static_cast<size_t>(i * c + ch)] =
                        x.data[static_cast<size_t>((i * c + ch) * t + step)];
                }
            }
            cache.h_prev[static_cast<size_t>(step)] = h;
            cache.c_prev[static_cast<size_t>(step)] = cell;
            act.mat(n, 4 * hidden).noalias() =
                xt.mat(n, c) * wx.value.mat(4 * hidden, c).transpose();
            act.mat(n, 4 * hidden).noalias() +=
                h.mat(n, hidden) * wh.value.mat(4 * hidden, hidden).transpose();
            act.mat(n, 4 * hidden).rowwise() += b.value.mat(1, 4 * hidden).row(0);
            Tensor<S>& g = cache.gates[static_cast<size_t>(step)];
            g = Tensor<S>({n, 4 * hidden});
            Tensor<S>& tc = cache.tanh_c[static_cast<size_t>(step)];
            tc = Tensor<S>({n, hidden});
            for (int64_t i = 0; i < n; ++i) {
                const S* a = act.ptr() + i * 4 * hidden;
                S* gp = g.ptr() + i * 4 * hidden;
                S* cp = cell.ptr() + i * hidden;
                S* hp = h.ptr() + i * hidden;
                S* tp = tc.ptr() + i * hidden;
                for (int64_t j = 0; j < hidden; ++j) {
                    const S ig = sigmoid(a[j]);
                    const S fg = sigmoid(a[hidden + j]);
                    const S gg = std::tanh(a[2 * hidden + j]);
                    const S og = sigmoid(a[3 * hidden + j]);
                    gp[j] = ig;
                    gp[hidden + j] = fg;
                    gp[2 * hidden + j] = gg;
                    gp[3 * hidden + j] = og;
                    cp[j] = fg * cp[j] + ig * gg;
                    tp[j] = std::tanh(cp[j]);
                    hp[j] = og * tp[j];
                }
            }
        }
        h_final = h;
    }

    // Backprop through time from the gradient of the final hidden state.
    // Parameter gradients accumulate; input gradients are not produced
    // (the raw signal is never optimized).
    void backward(const Cache& cache, const Tensor<S>& gh_final) {
        const int64_t n = cache.n, t = cache.t;
        Tensor<S> gh = gh_final;
        Tensor<S> gc({n, hidden});
        gc.fill(S(0));
        Tensor<S> gact({n, 4 * hidden});
        for (int64_t step = t - 1; step >= 0; --step) {
            const Tensor<S>& g = cache.gates[static_cast<size_t>(step)];
            const Tensor<S>& tc = cache.tanh_c[static_cast<size_t>(step)];
            const Tensor<S>& cprev = cache.c_prev[static_cast<size_t>(step)];
            for (int64_t i = 0; i < n; ++i) {
                const S* gp = g.ptr() + i * 4 * hidden;
                const S* tp = tc.ptr() + i * hidden;
                const S* cpp = cprev.ptr() + i * hidden;
                const S* ghp = gh.ptr() + i * hidden;
                S* gcp = gc.ptr() + i * hidden;
                S* ga = gact.ptr() + i * 4 * hidden;
                for (int64_t j = 0; j < hidden; ++j) {
                    const S ig = gp[j], fg = gp[hidden + j];
                    const S gg = gp[2 * hidden + j], og = gp[3 * hidden + j];
                    const S gout = ghp[j];
                    const S gcell = gcp[j] + gout * og * (S(1) - tp[j] * tp[j]);
                    ga[j] = gcell * gg * ig * (S(1) - ig);
                    ga[hidden + j] = gcell * cpp[j] * fg * (S(1) - fg);
                    ga[2 * hidden + j] = gcell * ig * (S(1) - gg * gg);
                    ga[3 * hidden + j] = gout * tp[j] * og * (S(1) - og);
                    gcp[j] = gcell * fg;
                }
            }
            const Tensor<S>& xt = cache.xt[static_cast<size_t>(step)];
            const Tensor<S>& hprev = cache.h_prev[static_cast<size_t>(step)];
            wx.grad.mat(4 * hidden, input).noalias() +=
                gact.mat(n, 4 * hidden).transpose() * xt.mat(n, input);
            wh.grad.mat(4 * hidden, hidden).noalias() +=
                gact.mat(n, 4 * hidden).transpose() * hprev.mat(n, hidden);
            b.grad.mat(1, 4 * hidden).row(0) += gact.mat(n, 4 * hidden).colwise().sum();
            gh = Tensor<S>({n, hidden});
            gh.mat(n, hidden).noalias() =
                gact.mat(n, 4 * hidden) * wh.value.mat(4 * hidden, hidden);
        }
    }
};

}  // namespace e2i::nn

#endif
