#ifndef E2I_CORE_AUGMENT_HPP
#define E2I_CORE_AUGMENT_HPP

#include <cstdint>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

// Differentiable augmentation applied to both real and generated images
// before the discriminator sees them. Order: brightness -> saturation ->
// contrast -> clamp to [-1,1] -> integer translation with zero padding.
// Every op is skipped when its drawn parameter equals the identity value,
// so zero-magnitude settings reproduce the input bit for bit.
namespace e2i {

struct AugmentPolicy {
    bool brightness = true;
    bool saturation = true;
    bool contrast = true;
    bool translation = true;
    double brightness_range = 0.5;  // shift ~ U(-range, range)
    double saturation_min = 0.0;    // scale ~ U(min, max), toward per-pixel gray
    double saturation_max = 2.0;
    double contrast_min = 0.5;  // scale ~ U(min, max), toward per-image mean
    double contrast_max = 1.5;
    double translation_ratio = 0.125;  // max shift = floor(ratio * side)

    bool any() const { return brightness || saturation || contrast || translation; }
    bool any_color() const { return brightness || saturation || contrast; }
};

// Per-sample parameters; identity values stand in for disabled ops.
struct AugParams {
    std::vector<double> bright;  // 0 = identity
    std::vector<double> sat;     // 1 = identity
    std::vector<double> con;     // 1 = identity
    std::vector<int> dx, dy;     // 0 = identity
};

inline AugParams augment_draw(const AugmentPolicy& pol, int64_t n, int64_t h, int64_t w,
                              Rng& rng) {
    AugParams par;
    par.bright.assign(static_cast<size_t>(n), 0.0);
    par.sat.assign(static_cast<size_t>(n), 1.0);
    par.con.assign(static_cast<size_t>(n), 1.0);
    par.dx.assign(static_cast<size_t>(n), 0);
    par.dy.assign(static_cast<size_t>(n), 0);
    const int64_t my = static_cast<int64_t>(pol.translation_ratio * static_cast<double>(h));
    const int64_t mx = static_cast<int64_t>(pol.translation_ratio * static_cast<double>(w));
    for (int64_t i = 0; i < n; ++i) {
        const size_t s = static_cast<size_t>(i);
        if (pol.brightness)
            par.bright[s] = rng.uniform(-pol.brightness_range, pol.brightness_range);
        if (pol.saturation) par.sat[s] = rng.uniform(pol.saturation_min, pol.saturation_max);
        if (pol.contrast) par.con[s] = rng.uniform(pol.contrast_min, pol.contrast_max);
        if (pol.translation) {
            par.dx[s] = static_cast<int>(rng.uniform_int(2 * mx + 1) - mx);
            par.dy[s] = static_cast<int>(rng.uniform_int(2 * my + 1) - my);
        }
    }
    return par;
}

// ------------------------------------------------------------ individual ops
// All operate on [N, 3, H, W].

template <class S>
void brightness_op(Tensor<S>& x, const std::vector<double>& b) {
    const int64_t n = x.dim(0), per = x.numel() / x.dim(0);
    for (int64_t i = 0; i < n; ++i) {
        const double bi = b[static_cast<size_t>(i)];
        if (bi == 0.0) continue;
        S* p = x.ptr() + i * per;
        for (int64_t k = 0; k < per; ++k) p[k] += static_cast<S>(bi);
    }
}

template <class S>
void saturation_op(Tensor<S>& x, const std::vector<double>& sat) {
    const int64_t n = x.dim(0), hw = x.dim(2) * x.dim(3);
    for (int64_t i = 0; i < n; ++i) {
        const double s = sat[static_cast<size_t>(i)];
        if (s == 1.0) continue;
        S* r = x.ptr() + (i * 3 + 0) * hw;
        S* g = x.ptr() + (i * 3 + 1) * hw;
        S* b = x.ptr() + (i * 3 + 2) * hw;
        for (int64_t k = 0; k < hw; ++k) {
            const double gray =
                (static_cast<double>(r[k]) + g[k] + b[k]) / 3.0;
            r[k] = static_cast<S>((r[k] - gray) * s + gray);
            g[k] = static_cast<S>((g[k] - gray) * s + gray);
            b[k] = static_cast<S>((b[k] - gray) * s + gray);
        }
    }
}

template <class S>
void saturation_bwd(Tensor<S>& grad, const std::vector<double>& sat) {
    const int64_t n = grad.dim(0), hw = grad.dim(2) * grad.dim(3);
    for (int64_t i = 0; i < n; ++i) {
        const double s = sat[static_cast<size_t>(i)];
        if (s == 1.0) continue;
        S* r = grad.ptr() + (i * 3 + 0) * hw;
        S* g = grad.ptr() + (i * 3 + 1) * hw;
        S* b = grad.ptr() + (i * 3 + 2) * hw;
        const double c = (1.0 - s) / 3.0;
        for (int64_t k = 0; k < hw; ++k) {
            const double tot = static_cast<double>(r[k]) + g[k] + b[k];
            r[k] = static_cast<S>(s * r[k] + c * tot);
            g[k] = static_cast<S>(s * g[k] + c * tot);
            b[k] = static_cast<S>(s * b[k] + c * tot);
        }
    }
}

template <class S>
void contrast_op(Tensor<S>& x, const std::vector<double>& con) {
    const int64_t n = x.dim(0), per = x.numel() / x.dim(0);
    for (int64_t i = 0; i < n; ++i) {
        const double c = con[static_cast<size_t>(i)];
        if (c == 1.0) continue;
        S* p = x.ptr() + i * per;
        double mu = 0.0;
        for (int64_t k = 0; k < per; ++k) mu += p[k];
        mu /= static_cast<double>(per);
        for (int64_t k = 0; k < per; ++k) p[k] = static_cast<S>((p[k] - mu) * c + mu);
    }
}

template <class S>
void contrast_bwd(Tensor<S>& grad, const std::vector<double>& con) {
    const int64_t n = grad.dim(0), per = grad.numel() / grad.dim(0);
    for (int64_t i = 0; i < n; ++i) {
        const double c = con[static_cast<size_t>(i)];
        if (c == 1.0) continue;
        S* p = grad.ptr() + i * per;
        double tot = 0.0;
        for (int64_t k = 0; k < per; ++k) tot += p[k];
        const double add = (1.0 - c) * tot / static_cast<double>(per);
        for (int64_t k = 0; k < per; ++k) p[k] = static_cast<S>(c * p[k] + add);
    }
}

template <class S>
void clamp_op(Tensor<S>& x, std::vector<uint8_t>* mask) {
    if (mask) mask->assign(static_cast<size_t>(x.numel()), 1);
    for (int64_t k = 0; k < x.numel(); ++k) {
        S& v = x.data[static_cast<size_t>(k)];
        if (v < S(-1)) {
            v = S(-1);
            if (mask) (*mask)[static_cast<size_t>(k)] = 0;
        } else if (v > S(1)) {
            v = S(1);
            if (mask) (*mask)[static_cast<size_t>(k)] = 0;
        }
    }
}

template <class S>
void clamp_bwd(Tensor<S>& grad, const std::vector<uint8_t>& mask) {
    for (int64_t k = 0; k < grad.numel(); ++k) {
        if (!mask[static_cast<size_t>(k)]) grad.data[static_cast<size_t>(k)] = S(0);
    }
}

// out[y][x] = in[y-dy][x-dx], zero outside.
template <class S>
Tensor<S> translate_op(const Tensor<S>& x, const std::vector<int>& dx,
                       const std::vector<int>& dy) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<S> y(x.shape);
    for (int64_t i = 0; i < n; ++i) {
        const int sx = dx[static_cast<size_t>(i)], sy = dy[static_cast<size_t>(i)];
        if (sx == 0 && sy == 0) {
            std::copy(x.ptr() + i * c * h * w, x.ptr() + (i + 1) * c * h * w,
                      y.ptr() + i * c * h * w);
            continue;
        }
        for (int64_t ch = 0; ch < c; ++ch) {
            const S* src = x.ptr() + (i * c + ch) * h * w;
            S* dst = y.ptr() + (i * c + ch) * h * w;
            for (int64_t yy = 0; yy < h; ++yy) {
                const int64_t iy = yy - sy;
                for (int64_t xx = 0; xx < w; ++xx) {
                    const int64_t ix = xx - sx;
                    const bool ok = iy >= 0 && iy < h && ix >= 0 && ix < w;
                    dst[yy * w + xx] = ok ? src[iy * w + ix] : S(0);
                }
            }
        }
    }
    return y;
}

template <class S>
Tensor<S> translate_bwd(const Tensor<S>& gy, const std::vector<int>& dx,
                        const std::vector<int>& dy) {
    const int64_t n = gy.dim(0), c = gy.dim(1), h = gy.dim(2), w = gy.dim(3);
    Tensor<S> gx(gy.shape);
    for (int64_t i = 0; i < n; ++i) {
        const int sx = dx[static_cast<size_t>(i)], sy = dy[static_cast<size_t>(i)];
        if (sx == 0 && sy == 0) {
            std::copy(gy.ptr() + i * c * h * w, gy.ptr() + (i + 1) * c * h * w,
                      gx.ptr() + i * c * h * w);
            continue;
        }
        for (int64_t ch = 0; ch < c; ++ch) {
            const S* src = gy.ptr() + (i * c + ch) * h * w;
            S* dst = gx.ptr() + (i * c + ch) * h * w;
            for (int64_t iy = 0; iy < h; ++iy) {
                const int64_t yy = iy + sy;
                for (int64_t ix = 0; ix < w; ++ix) {
                    const int64_t xx = ix + sx;
                    const bool ok = yy >= 0 && yy < h && xx >= 0 && xx < w;
                    dst[iy * w + ix] = ok ? src[yy * w + xx] : S(0);
                }
            }
        }
    }
    return gx;
}

// ------------------------------------------------------------ full pipeline

template <class S>
struct AugCache {
    AugParams params;
    std::vector<uint8_t> clamp_mask;  // empty when the clamp was skipped
};

template <class S>
Tensor<S> augment_apply(const Tensor<S>& x, const AugParams& par, AugCache<S>* cache) {
    require(x.ndim() == 4 && x.dim(1) == 3, Status::shape, "augment: expected [N,3,H,W]");
    Tensor<S> y = x;
    if (cache) {
        cache->params = par;
        cache->clamp_mask.clear();
    }
    bool color_touched = false;
    for (const double b : par.bright) color_touched |= (b != 0.0);
    for (const double s : par.sat) color_touched |= (s != 1.0);
    for (const double c : par.con) color_touched |= (c != 1.0);
    if (color_touched) {
        brightness_op(y, par.bright);
        saturation_op(y, par.sat);
        contrast_op(y, par.con);
        clamp_op(y, cache ? &cache->clamp_mask : nullptr);
    }
    bool moved = false;
    for (size_t i = 0; i < par.dx.size(); ++i) {
        moved |= (par.dx[i] != 0 || par.dy[i] != 0);
    }
    if (moved) y = translate_op(y, par.dx, par.dy);
    return y;
}

template <class S>
Tensor<S> augment_backward(const AugCache<S>& cache, const Tensor<S>& gy) {
    Tensor<S> g = translate_bwd(gy, cache.params.dx, cache.params.dy);
    if (!cache.clamp_mask.empty()) clamp_bwd(g, cache.clamp_mask);
    contrast_bwd(g, cache.params.con);
    saturation_bwd(g, cache.params.sat);
    // brightness is an additive shift: identity Jacobian
    return g;
}

}  // namespace e2i

#endif
