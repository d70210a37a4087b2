#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "core/augment.hpp"
#include "core/rng.hpp"
#include "doctest.h"
#include "fd.hpp"

using namespace e2i;
using TD = Tensor<double>;

namespace {

TD random_images(Rng& rng, int64_t n, int64_t h, int64_t w, double lo = -0.9,
                 double hi = 0.9) {
    TD x({n, 3, h, w});
    for (auto& v : x.data) v = rng.uniform(lo, hi);
    return x;
}

AugmentPolicy all_on() { return AugmentPolicy{}; }

AugmentPolicy zero_magnitude() {
    AugmentPolicy p;
    p.brightness_range = 0.0;
    p.saturation_min = p.saturation_max = 1.0;
    p.contrast_min = p.contrast_max = 1.0;
    p.translation_ratio = 0.0;
    return p;
}

}  // namespace

TEST_CASE("zero-magnitude policy is a bit-exact identity") {
    Rng rng(31);
    TD x = random_images(rng, 3, 8, 8, -1.5, 1.5);  // includes out-of-range pixels
    const AugmentPolicy pol = zero_magnitude();
    const AugParams par = augment_draw(pol, 3, 8, 8, rng);
    AugCache<double> cache;
    const TD y = augment_apply(x, par, &cache);
    REQUIRE(y.numel() == x.numel());
    for (int64_t i = 0; i < x.numel(); ++i)
        CHECK(y.data[static_cast<size_t>(i)] == x.data[static_cast<size_t>(i)]);
}

TEST_CASE("brightness shifts every channel uniformly") {
    TD x({1, 3, 2, 2});
    x.fill(0.1);
    brightness_op(x, {0.25});
    for (double v : x.data) CHECK(v == doctest::Approx(0.35));
}

TEST_CASE("saturation scales toward the per-pixel gray") {
    TD x({1, 3, 1, 1});
    x.data = {0.9, 0.3, 0.0};  // gray = 0.4
    saturation_op(x, {0.0});   // full desaturation
    for (double v : x.data) CHECK(v == doctest::Approx(0.4));

    TD y({1, 3, 1, 1});
    y.data = {0.9, 0.3, 0.0};
    saturation_op(y, {2.0});  // push away from gray
    CHECK(y.data[0] == doctest::Approx(0.4 + 2.0 * (0.9 - 0.4)));
    CHECK(y.data[2] == doctest::Approx(0.4 + 2.0 * (0.0 - 0.4)));
}

TEST_CASE("contrast scales toward the per-image mean") {
    TD x({1, 3, 1, 2});
    x.data = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};  // mean 0.5
    contrast_op(x, {0.5});
    CHECK(x.data[0] == doctest::Approx(0.5 + 0.5 * (0.0 - 0.5)));
    CHECK(x.data[5] == doctest::Approx(0.5 + 0.5 * (1.0 - 0.5)));
}

TEST_CASE("translation shifts with zero padding") {
    TD x({1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) x.data[static_cast<size_t>(i)] = i + 1.0;
    const TD y = translate_op(x, {1}, {0});  // shift right by one
    // out[y][x] = in[y][x-1]
    CHECK(y.data[0] == 0.0);
    CHECK(y.data[1] == 1.0);
    CHECK(y.data[2] == 2.0);
    CHECK(y.data[3] == 0.0);
    CHECK(y.data[4] == 4.0);

    const TD z = translate_op(x, {0}, {-1});  // shift up by one
    CHECK(z.data[0] == 4.0);
    CHECK(z.data[6] == 0.0);
}

TEST_CASE("clamp masks the out-of-range pixels") {
    TD x({1, 1, 1, 4});
    x.data = {-1.5, -0.5, 0.5, 1.5};
    std::vector<uint8_t> mask;
    clamp_op(x, &mask);
    CHECK(x.data[0] == -1.0);
    CHECK(x.data[3] == 1.0);
    CHECK(mask[0] == 0);
    CHECK(mask[1] == 1);
    CHECK(mask[2] == 1);
    CHECK(mask[3] == 0);
}

TEST_CASE("each augmentation op matches finite differences") {
    Rng rng(32);
    TD x = random_images(rng, 2, 4, 4);
    TD lw(x.shape);
    for (auto& v : lw.data) v = rng.uniform(-1.0, 1.0);

    SUBCASE("brightness") {
        const std::vector<double> b = {0.2, -0.3};
        auto f = [&] {
            TD t = x;
            brightness_op(t, b);
            double s = 0;
            for (int64_t i = 0; i < t.numel(); ++i)
                s += t.data[static_cast<size_t>(i)] * lw.data[static_cast<size_t>(i)];
            return s;
        };
        // brightness backward is the identity on the gradient
        CHECK(fd::max_err_tensor(x, lw, f) < 1e-8);
    }
    SUBCASE("saturation") {
        const std::vector<double> sat = {1.7, 0.4};
        auto f = [&] {
            TD t = x;
            saturation_op(t, sat);
            double s = 0;
            for (int64_t i = 0; i < t.numel(); ++i)
                s += t.data[static_cast<size_t>(i)] * lw.data[static_cast<size_t>(i)];
            return s;
        };
        TD g = lw;
        saturation_bwd(g, sat);
        CHECK(fd::max_err_tensor(x, g, f) < 1e-7);
    }
    SUBCASE("contrast") {
        const std::vector<double> con = {0.6, 1.4};
        auto f = [&] {
            TD t = x;
            contrast_op(t, con);
            double s = 0;
            for (int64_t i = 0; i < t.numel(); ++i)
                s += t.data[static_cast<size_t>(i)] * lw.data[static_cast<size_t>(i)];
            return s;
        };
        TD g = lw;
        contrast_bwd(g, con);
        CHECK(fd::max_err_tensor(x, g, f) < 1e-7);
    }
    SUBCASE("translation") {
        const std::vector<int> dx = {1, -1}, dy = {0, 1};
        auto f = [&] {
            const TD t = translate_op(x, dx, dy);
            double s = 0;
            for (int64_t i = 0; i < t.numel(); ++i)
                s += t.data[static_cast<size_t>(i)] * lw.data[static_cast<size_t>(i)];
            return s;
        };
        const TD g = translate_bwd(lw, dx, dy);
        CHECK(fd::max_err_tensor(x, g, f) < 1e-8);
    }
}

TEST_CASE("full pipeline backward matches finite differences") {
    Rng rng(33);
    TD x = random_images(rng, 2, 4, 4, -0.7, 0.7);
    const AugmentPolicy pol = all_on();
    AugParams par = augment_draw(pol, 2, 4, 4, rng);
    // keep pixels away from the clamp kink under these params
    TD lw;
    {
        AugCache<double> c0;
        const TD y0 = augment_apply(x, par, &c0);
        lw = TD(y0.shape);
        for (auto& v : lw.data) v = rng.uniform(-1.0, 1.0);
    }
    auto f = [&] {
        AugCache<double> c;
        const TD y = augment_apply(x, par, &c);
        double s = 0;
        for (int64_t i = 0; i < y.numel(); ++i)
            s += y.data[static_cast<size_t>(i)] * lw.data[static_cast<size_t>(i)];
        return s;
    };
    AugCache<double> cache;
    augment_apply(x, par, &cache);
    const TD g = augment_backward(cache, lw);
    CHECK(fd::max_err_tensor(x, g, f, 1e-6) < 1e-5);
}

TEST_CASE("draws are deterministic and respect disabled ops") {
    const AugmentPolicy pol = all_on();
    Rng a(77), b(77);
    const AugParams pa = augment_draw(pol, 4, 8, 8, a);
    const AugParams pb = augment_draw(pol, 4, 8, 8, b);
    CHECK(pa.bright == pb.bright);
    CHECK(pa.sat == pb.sat);
    CHECK(pa.con == pb.con);
    CHECK(pa.dx == pb.dx);
    CHECK(pa.dy == pb.dy);

    AugmentPolicy off;
    off.brightness = off.saturation = off.contrast = off.translation = false;
    CHECK_FALSE(off.any());
    Rng c(77);
    const AugParams pc = augment_draw(off, 4, 8, 8, c);
    // identity parameters for every sample
    for (double v : pc.bright) CHECK(v == 0.0);
    for (double v : pc.sat) CHECK(v == 1.0);
    for (double v : pc.con) CHECK(v == 1.0);
    for (int v : pc.dx) CHECK(v == 0);
    for (int v : pc.dy) CHECK(v == 0);
    // and no randomness consumed: the stream continues exactly like a fresh one
    Rng d(77);
    CHECK(c.uniform(0.0, 1.0) == d.uniform(0.0, 1.0));
}

TEST_CASE("translation bound follows the ratio rule") {
    AugmentPolicy pol;
    pol.brightness = pol.saturation = pol.contrast = false;
    pol.translation_ratio = 0.125;
    Rng rng(5);
    const int side = 32;  // max shift 4
    for (int trial = 0; trial < 200; ++trial) {
        const AugParams p = augment_draw(pol, 1, side, side, rng);
        CHECK(std::abs(p.dx[0]) <= 4);
        CHECK(std::abs(p.dy[0]) <= 4);
    }
}
