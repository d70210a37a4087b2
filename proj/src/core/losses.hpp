#ifndef E2I_CORE_LOSSES_HPP
#define E2I_CORE_LOSSES_HPP

#include <string>
#include <vector>

#include "tensor.hpp"

namespace e2i {

struct Triplet {
    int a = 0, p = 0, n = 0;
};

enum class Mining { semi_hard, hard, all_valid };

inline Mining parse_mining(const std::string& s) {
    if (s == "semi_hard") return Mining::semi_hard;
    if (s == "hard") return Mining::hard;
    if (s == "all_valid") return Mining::all_valid;
    fail(Status::config, "unknown mining mode: " + s);
}

// Squared Euclidean distances between embedding rows, accumulated in double.
// Plain per-pair loops (not a Gram-matrix factorization) so results are a
// deterministic function of the rows alone.
template <class S>
std::vector<double> pairwise_sq_dists(const Tensor<S>& emb) {
    const int64_t n = emb.dim(0), d = emb.dim(1);
    std::vector<double> dist(static_cast<size_t>(n * n), 0.0);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) {
            const S* a = emb.ptr() + i * d;
            const S* b = emb.ptr() + j * d;
            double s = 0.0;
            for (int64_t k = 0; k < d; ++k) {
                const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                s += diff * diff;
            }
            dist[static_cast<size_t>(i * n + j)] = s;
            dist[static_cast<size_t>(j * n + i)] = s;
        }
    }
    return dist;
}

// Online mining over one batch. For each anchor/positive pair:
//   semi_hard — the closest negative inside the margin band
//               (d_ap < d_an < d_ap + beta); if the band is empty, the
//               closest negative beyond d_ap; if none, the closest overall.
//   hard      — the closest negative, unconditionally.
//   all_valid — every negative.
// Ties always resolve to the lowest sample index.
template <class S>
std::vector<Triplet> mine_triplets(const Tensor<S>& emb, const std::vector<int>& labels,
                                   double beta, Mining mode) {
    const int64_t n = emb.dim(0);
    require(static_cast<int64_t>(labels.size()) == n, Status::shape,
            "mine_triplets: label count mismatch");
    bool multi_class = false;
    for (size_t i = 1; i < labels.size(); ++i) {
        if (labels[i] != labels[0]) {
            multi_class = true;
            break;
        }
    }
    require(multi_class, Status::mining, "mining needs at least two classes in the batch");
    const std::vector<double> dist = pairwise_sq_dists(emb);
    std::vector<Triplet> out;
    bool any_pair = false;
    for (int64_t a = 0; a < n; ++a) {
        for (int64_t p = 0; p < n; ++p) {
            if (p == a || labels[static_cast<size_t>(p)] != labels[static_cast<size_t>(a)])
                continue;
            any_pair = true;
            const double d_ap = dist[static_cast<size_t>(a * n + p)];
            if (mode == Mining::all_valid) {
                for (int64_t neg = 0; neg < n; ++neg) {
                    if (labels[static_cast<size_t>(neg)] == labels[static_cast<size_t>(a)])
                        continue;
                    out.push_back({static_cast<int>(a), static_cast<int>(p),
                                   static_cast<int>(neg)});
                }
                continue;
            }
            int best_band = -1, best_beyond = -1, best_any = -1;
            double band_d = 0.0, beyond_d = 0.0, any_d = 0.0;
            for (int64_t neg = 0; neg < n; ++neg) {
                if (labels[static_cast<size_t>(neg)] == labels[static_cast<size_t>(a)]) continue;
                const double d_an = dist[static_cast<size_t>(a * n + neg)];
                if (best_any < 0 || d_an < any_d) {
                    best_any = static_cast<int>(neg);
                    any_d = d_an;
                }
                if (mode == Mining::semi_hard) {
                    if (d_an > d_ap && d_an < d_ap + beta && (best_band < 0 || d_an < band_d)) {
                        best_band = static_cast<int>(neg);
                        band_d = d_an;
                    }
                    if (d_an > d_ap && (best_beyond < 0 || d_an < beyond_d)) {
                        best_beyond = static_cast<int>(neg);
                        beyond_d = d_an;
                    }
                }
            }
            int chosen = best_any;
            if (mode == Mining::semi_hard) {
                chosen = best_band >= 0 ? best_band : (best_beyond >= 0 ? best_beyond : best_any);
            }
            require(chosen >= 0, Status::mining, "no negative available for anchor");
            out.push_back({static_cast<int>(a), static_cast<int>(p), chosen});
        }
    }
    require(any_pair, Status::mining, "no anchor/positive pair in the batch");
    return out;
}

// Hinged triplet loss, mean over triplets:
//   max(0, ||e_a - e_p||^2 - ||e_a - e_n||^2 + beta)
// Inactive triplets contribute exactly zero loss and zero gradient. An empty
// triplet list means "no violations this batch": loss 0, zero gradient.
template <class S>
double triplet_loss(const Tensor<S>& emb, const std::vector<Triplet>& triplets, double beta,
                    Tensor<S>* grad) {
    require(emb.ndim() == 2, Status::shape, "triplet_loss: embeddings must be [N,D]");
    const int64_t d = emb.dim(1);
    if (grad) {
        *grad = Tensor<S>(emb.shape);
        grad->fill(S(0));
    }
    if (triplets.empty()) return 0.0;
    const double inv_m = 1.0 / static_cast<double>(triplets.size());
    double loss = 0.0;
    for (const Triplet& t : triplets) {
        const S* ea = emb.ptr() + static_cast<int64_t>(t.a) * d;
        const S* ep = emb.ptr() + static_cast<int64_t>(t.p) * d;
        const S* en = emb.ptr() + static_cast<int64_t>(t.n) * d;
        double d_ap = 0.0, d_an = 0.0;
        for (int64_t k = 0; k < d; ++k) {
            const double dp = static_cast<double>(ea[k]) - static_cast<double>(ep[k]);
            const double dn = static_cast<double>(ea[k]) - static_cast<double>(en[k]);
            d_ap += dp * dp;
            d_an += dn * dn;
        }
        const double term = d_ap - d_an + beta;
        if (term <= 0.0) continue;
        loss += term;
        if (!grad) continue;
        S* ga = grad->ptr() + static_cast<int64_t>(t.a) * d;
        S* gp = grad->ptr() + static_cast<int64_t>(t.p) * d;
        S* gn = grad->ptr() + static_cast<int64_t>(t.n) * d;
        for (int64_t k = 0; k < d; ++k) {
            // d/de of (||a-p||^2 - ||a-n||^2), scaled by the triplet mean
            const double da = 2.0 * (static_cast<double>(en[k]) - ep[k]) * inv_m;
            const double dp = 2.0 * (static_cast<double>(ep[k]) - ea[k]) * inv_m;
            const double dn = 2.0 * (static_cast<double>(ea[k]) - en[k]) * inv_m;
            ga[k] += static_cast<S>(da);
            gp[k] += static_cast<S>(dp);
            gn[k] += static_cast<S>(dn);
        }
    }
    return loss * inv_m;
}

// Hinge scores for the adversarial game. The discriminator pushes real
// scores above +1 and fake scores below -1; the generator maximizes the
// fake score directly.
//   d_loss = mean(max(0, 1 - s_real)) + mean(max(0, 1 + s_fake))
//   g_loss = -mean(s_fake)
template <class S>
double hinge_d_real(const std::vector<S>& scores, std::vector<S>* dscores) {
    const size_t n = scores.size();
    if (dscores) dscores->assign(n, S(0));
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double term = 1.0 - static_cast<double>(scores[i]);
        if (term > 0.0) {
            loss += term;
            if (dscores) (*dscores)[i] = static_cast<S>(-1.0 / static_cast<double>(n));
        }
    }
    return loss / static_cast<double>(n);
}

template <class S>
double hinge_d_fake(const std::vector<S>& scores, std::vector<S>* dscores) {
    const size_t n = scores.size();
    if (dscores) dscores->assign(n, S(0));
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double term = 1.0 + static_cast<double>(scores[i]);
        if (term > 0.0) {
            loss += term;
            if (dscores) (*dscores)[i] = static_cast<S>(1.0 / static_cast<double>(n));
        }
    }
    return loss / static_cast<double>(n);
}

template <class S>
double hinge_g(const std::vector<S>& scores, std::vector<S>* dscores) {
    const size_t n = scores.size();
    if (dscores) dscores->assign(n, static_cast<S>(-1.0 / static_cast<double>(n)));
    double loss = 0.0;
    for (const S s : scores) loss -= static_cast<double>(s);
    return loss / static_cast<double>(n);
}

// Mode-seeking regularizer over two generator draws for the same conditions:
//   mean_b  dz_b / (dI_b + eps)
// with dz/dI the per-sample mean absolute differences of the latents and the
// images. Gradients flow into both images (the latents are constants).
template <class S>
double mode_seeking_from_images(const Tensor<S>& img1, const Tensor<S>& img2,
                                const Tensor<S>& z1, const Tensor<S>& z2, double eps,
                                Tensor<S>* g1, Tensor<S>* g2) {
    const int64_t b = img1.dim(0);
    require(img2.dim(0) == b && z1.dim(0) == b && z2.dim(0) == b, Status::shape,
            "mode_seeking: batch mismatch");
    const int64_t pix = img1.numel() / b;
    const int64_t zd = z1.numel() / b;
    if (g1) {
        *g1 = Tensor<S>(img1.shape);
        g1->fill(S(0));
    }
    if (g2) {
        *g2 = Tensor<S>(img2.shape);
        g2->fill(S(0));
    }
    double loss = 0.0;
    for (int64_t i = 0; i < b; ++i) {
        double dz = 0.0;
        for (int64_t k = 0; k < zd; ++k) {
            dz += std::abs(static_cast<double>(z1.data[static_cast<size_t>(i * zd + k)]) -
                           z2.data[static_cast<size_t>(i * zd + k)]);
        }
        dz /= static_cast<double>(zd);
        const S* p1 = img1.ptr() + i * pix;
        const S* p2 = img2.ptr() + i * pix;
        double di = 0.0;
        for (int64_t k = 0; k < pix; ++k) {
            di += std::abs(static_cast<double>(p1[k]) - p2[k]);
        }
        di /= static_cast<double>(pix);
        const double denom = di + eps;
        loss += dz / denom;
        if (!g1 && !g2) continue;
        // d(loss)/d(p1) = -dz/denom^2 * sign(p1-p2) / (pix * b)
        const double coef = -dz / (denom * denom) / static_cast<double>(pix * b);
        for (int64_t k = 0; k < pix; ++k) {
            const double diff = static_cast<double>(p1[k]) - p2[k];
            const double sg = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            if (g1) g1->data[static_cast<size_t>(i * pix + k)] = static_cast<S>(coef * sg);
            if (g2) g2->data[static_cast<size_t>(i * pix + k)] = static_cast<S>(-coef * sg);
        }
    }
    return loss / static_cast<double>(b);
}

}  // namespace e2i

#endif
