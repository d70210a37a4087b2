#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "core/adam.hpp"
#include "core/lstm.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "doctest.h"
#include "fd.hpp"

using namespace e2i;
using nn::Param;
using TD = Tensor<double>;

namespace {

TD random_tensor(Rng& rng, std::vector<int64_t> shape, double scale = 1.0) {
    TD t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

// Scalar loss taking a weighted sum so every output element contributes with
// a distinct coefficient.
double weighted_sum(const TD& y, const TD& w) {
    double s = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i)
        s += y.data[static_cast<size_t>(i)] * w.data[static_cast<size_t>(i)];
    return s;
}

TD weights_like(Rng& rng, const TD& y) {
    TD w(y.shape);
    for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);
    return w;
}

}  // namespace

TEST_CASE("dense forward/backward matches finite differences") {
    Rng rng(11);
    TD x = random_tensor(rng, {3, 5});
    Param<double> w, b;
    w.resize({4, 5});
    b.resize({4});
    nn::init_uniform(rng, w.value, -1.0, 1.0);
    nn::init_uniform(rng, b.value, -1.0, 1.0);
    TD y;
    nn::dense_forward(x, w, b, y);
    TD lw = weights_like(rng, y);

    auto loss = [&] {
        TD out;
        nn::dense_forward(x, w, b, out);
        return weighted_sum(out, lw);
    };
    // input gradient
    w.zero_grad();
    b.zero_grad();
    TD gx;
    nn::dense_backward(x, w, b, lw, &gx);
    CHECK(fd::max_err_tensor(x, gx, loss) < 1e-7);
    CHECK(fd::max_err_params({&w, &b},
                             [&] {
                                 w.zero_grad();
                                 b.zero_grad();
                                 TD out;
                                 nn::dense_forward(x, w, b, out);
                                 TD g = lw;
                                 nn::dense_backward<double>(x, w, b, g, nullptr);
                                 return weighted_sum(out, lw);
                             }) < 1e-7);
}

TEST_CASE("conv2d matches finite differences") {
    Rng rng(12);
    TD x = random_tensor(rng, {2, 3, 6, 6});
    Param<double> w, b;
    w.resize({4, 3, 3, 3});
    b.resize({4});
    nn::init_uniform(rng, w.value, -0.5, 0.5);
    nn::init_uniform(rng, b.value, -0.5, 0.5);
    TD scratch;
    TD y;
    nn::conv2d_forward(x, w, b, 3, 2, 1, y, scratch);
    CHECK(y.dim(2) == 3);
    TD lw = weights_like(rng, y);

    auto loss = [&] {
        TD out, sc;
        nn::conv2d_forward(x, w, b, 3, 2, 1, out, sc);
        return weighted_sum(out, lw);
    };
    w.zero_grad();
    b.zero_grad();
    TD gx;
    TD g = lw;
    nn::conv2d_backward(x, w, b, 3, 2, 1, g, &gx, scratch);
    CHECK(fd::max_err_tensor(x, gx, loss) < 1e-7);
    CHECK(fd::max_err_params({&w, &b},
                             [&] {
                                 w.zero_grad();
                                 b.zero_grad();
                                 TD out, sc;
                                 nn::conv2d_forward(x, w, b, 3, 2, 1, out, sc);
                                 TD gg = lw;
                                 nn::conv2d_backward<double>(x, w, b, 3, 2, 1, gg, nullptr, sc);
                                 return weighted_sum(out, lw);
                             }) < 1e-7);
}

TEST_CASE("transpose conv matches finite differences and inverts conv dims") {
    CHECK(nn::convt_out_dim(4, 4, 2, 1) == 8);
    CHECK(nn::conv_out_dim(8, 4, 2, 1) == 4);

    Rng rng(13);
    TD x = random_tensor(rng, {2, 3, 4, 4});
    Param<double> w, b;
    w.resize({3, 5, 4, 4});  // [cin, cout, k, k]
    b.resize({5});
    nn::init_uniform(rng, w.value, -0.5, 0.5);
    nn::init_uniform(rng, b.value, -0.5, 0.5);
    TD y;
    nn::convt2d_forward(x, w, b, 4, 2, 1, y);
    CHECK(y.dim(2) == 8);
    TD lw = weights_like(rng, y);

    auto loss = [&] {
        TD out;
        nn::convt2d_forward(x, w, b, 4, 2, 1, out);
        return weighted_sum(out, lw);
    };
    w.zero_grad();
    b.zero_grad();
    TD g = lw, gx;
    nn::convt2d_backward(x, w, b, 4, 2, 1, g, &gx);
    CHECK(fd::max_err_tensor(x, gx, loss) < 1e-7);
    CHECK(fd::max_err_params({&w, &b},
                             [&] {
                                 w.zero_grad();
                                 b.zero_grad();
                                 TD out;
                                 nn::convt2d_forward(x, w, b, 4, 2, 1, out);
                                 TD gg = lw;
                                 nn::convt2d_backward<double>(x, w, b, 4, 2, 1, gg, nullptr);
                                 return weighted_sum(out, lw);
                             }) < 1e-7);
}

TEST_CASE("batch norm train mode matches finite differences") {
    Rng rng(14);
    TD x = random_tensor(rng, {3, 4, 2, 2});
    nn::BatchNorm<double> bn;
    bn.init(4);
    nn::init_uniform(rng, bn.gamma.value, 0.5, 1.5);
    nn::init_uniform(rng, bn.beta.value, -0.5, 0.5);
    TD y;
    nn::BatchNorm<double>::Cache cache;
    bn.forward(x, true, y, &cache);
    TD lw = weights_like(rng, y);

    auto loss = [&] {
        nn::BatchNorm<double> tmp = bn;  // keep running stats untouched
        TD out;
        nn::BatchNorm<double>::Cache c;
        tmp.forward(x, true, out, &c);
        return weighted_sum(out, lw);
    };
    TD g = lw, gx;
    bn.gamma.zero_grad();
    bn.beta.zero_grad();
    {
        nn::BatchNorm<double> tmp = bn;
        TD out;
        nn::BatchNorm<double>::Cache c;
        tmp.forward(x, true, out, &c);
        tmp.backward(c, g, gx);
        bn.gamma.grad = tmp.gamma.grad;
        bn.beta.grad = tmp.beta.grad;
    }
    CHECK(fd::max_err_tensor(x, gx, loss) < 1e-6);
    CHECK(fd::max_err_tensor(bn.gamma.value, bn.gamma.grad, loss) < 1e-6);
    CHECK(fd::max_err_tensor(bn.beta.value, bn.beta.grad, loss) < 1e-6);
}

TEST_CASE("batch norm eval mode uses running statistics") {
    nn::BatchNorm<double> bn;
    bn.init(1);
    bn.running_mean.data[0] = 2.0;
    bn.running_var.data[0] = 4.0;
    TD x({2, 1});
    x.data = {4.0, 0.0};
    TD y;
    bn.forward(x, false, y, nullptr);
    CHECK(y.data[0] == doctest::Approx((4.0 - 2.0) / std::sqrt(4.0 + 1e-5)));
    CHECK(y.data[1] == doctest::Approx((0.0 - 2.0) / std::sqrt(4.0 + 1e-5)));
}

TEST_CASE("activations match finite differences") {
    Rng rng(15);
    for (int which = 0; which < 3; ++which) {
        TD x = random_tensor(rng, {4, 7});
        // keep away from the kinks where the subgradient is not unique
        for (auto& v : x.data)
            if (std::abs(v) < 1e-2) v = 0.1;
        TD y0 = x;
        auto apply = [&](TD& t) {
            if (which == 0) nn::relu_forward(t);
            if (which == 1) nn::lrelu_forward(t, 0.2);
            if (which == 2) nn::tanh_forward(t);
        };
        apply(y0);
        TD lw = weights_like(rng, y0);
        auto loss = [&] {
            TD t = x;
            apply(t);
            return weighted_sum(t, lw);
        };
        TD g = lw;
        if (which == 0) nn::relu_backward(y0, g);
        if (which == 1) nn::lrelu_backward(y0, 0.2, g);
        if (which == 2) nn::tanh_backward(y0, g);
        CHECK(fd::max_err_tensor(x, g, loss) < 1e-7);
    }
}

TEST_CASE("softmax cross entropy matches finite differences and is stable") {
    Rng rng(16);
    TD logits = random_tensor(rng, {5, 4}, 3.0);
    std::vector<int> labels = {0, 3, 1, 1, 2};
    TD dlogits;
    const double l0 = nn::softmax_xent<double>(logits, labels, nullptr, &dlogits);
    CHECK(l0 > 0.0);
    auto loss = [&] { return nn::softmax_xent<double>(logits, labels, nullptr, nullptr); };
    CHECK(fd::max_err_tensor(logits, dlogits, loss) < 1e-7);

    // huge logits must not overflow
    TD big({1, 3});
    big.data = {1000.0, 999.0, -1000.0};
    const double lb = nn::softmax_xent<double>(big, {0}, nullptr, nullptr);
    CHECK(std::isfinite(lb));
    CHECK(lb == doctest::Approx(std::log(1.0 + std::exp(-1.0))));
}

TEST_CASE("row l2 normalization matches finite differences") {
    Rng rng(17);
    TD x = random_tensor(rng, {3, 6});
    TD y;
    std::vector<double> norms;
    nn::l2_normalize_rows(x, y, &norms);
    for (int64_t r = 0; r < 3; ++r) {
        double s = 0;
        for (int64_t j = 0; j < 6; ++j) {
            const double v = y.data[static_cast<size_t>(r * 6 + j)];
            s += v * v;
        }
        CHECK(s == doctest::Approx(1.0));
    }
    TD lw = weights_like(rng, y);
    auto loss = [&] {
        TD out;
        std::vector<double> ns;
        nn::l2_normalize_rows(x, out, &ns);
        return weighted_sum(out, lw);
    };
    TD g = lw, gx;
    nn::l2_normalize_rows_backward(y, norms, g, gx);
    CHECK(fd::max_err_tensor(x, gx, loss) < 1e-7);
}

TEST_CASE("lstm backward matches finite differences") {
    Rng rng(18);
    const int64_t c = 3, t = 5, h = 4, n = 2;
    nn::Lstm<double> lstm;
    lstm.init(rng, c, h);
    TD x = random_tensor(rng, {n, c, t});
    nn::Lstm<double>::Cache cache;
    TD hn;
    lstm.forward(x, hn, cache);
    CHECK(hn.dim(0) == n);
    CHECK(hn.dim(1) == h);
    TD lw = weights_like(rng, hn);
    CHECK(fd::max_err_params({&lstm.wx, &lstm.wh, &lstm.b},
                             [&] {
                                 lstm.wx.zero_grad();
                                 lstm.wh.zero_grad();
                                 lstm.b.zero_grad();
                                 nn::Lstm<double>::Cache cc;
                                 TD out;
                                 lstm.forward(x, out, cc);
                                 TD g = lw;
                                 lstm.backward(cc, g);
                                 return weighted_sum(out, lw);
                             },
                             1e-6) < 1e-6);
}

TEST_CASE("adam minimizes a quadratic and clip bounds the global norm") {
    Param<float> p;
    p.resize({2});
    p.value.data = {5.0f, -3.0f};
    nn::Adam<float> opt;
    opt.lr = 0.1;
    for (int i = 0; i < 200; ++i) {
        p.grad.data = {p.value.data[0], p.value.data[1]};  // d/dx of x^2/2
        opt.step({&p});
    }
    CHECK(std::abs(p.value.data[0]) < 0.05f);
    CHECK(std::abs(p.value.data[1]) < 0.05f);

    Param<float> q;
    q.resize({3});
    q.grad.data = {3.0f, 4.0f, 0.0f};  // norm 5
    nn::clip_grad_norm<float>({&q}, 1.0);
    double norm = 0;
    for (float v : q.grad.data) norm += static_cast<double>(v) * v;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0));
    // below the cap: untouched
    Param<float> r;
    r.resize({2});
    r.grad.data = {0.3f, 0.4f};
    nn::clip_grad_norm<float>({&r}, 1.0);
    CHECK(r.grad.data[0] == 0.3f);
    CHECK(r.grad.data[1] == 0.4f);
}

TEST_CASE("rng substreams are stable and uniform_int stays in range") {
    CHECK(derive_seed(7, "alpha") == derive_seed(7, "alpha"));
    CHECK(derive_seed(7, "alpha") != derive_seed(7, "beta"));
    CHECK(derive_seed(7, "alpha", 0) != derive_seed(7, "alpha", 1));
    CHECK(derive_seed(7, "alpha") != derive_seed(8, "alpha"));

    Rng rng(123);
    for (int i = 0; i < 1000; ++i) {
        const int64_t v = rng.uniform_int(7);
        CHECK(v >= 0);
        CHECK(v < 7);
    }
    // degenerate range draws the endpoint exactly
    CHECK(rng.uniform(0.25, 0.25) == 0.25);

    // normal() mean sanity on a large sample
    Rng rng2(7);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += rng2.normal();
    CHECK(std::abs(acc / n) < 0.02);
}
