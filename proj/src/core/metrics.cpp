#include "metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace fs = std::filesystem;

namespace e2i {

// ---------------------------------------------------------------- k-means

namespace {

double sq_dist(const float* a, const double* c, int64_t d) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        const double diff = static_cast<double>(a[j]) - c[j];
        s += diff * diff;
    }
    return s;
}

struct LloydResult {
    std::vector<int> assign;
    std::vector<double> centers;
    double inertia = 0.0;
};

LloydResult lloyd_once(const TensorF& x, int k, int max_iters, Rng& rng) {
    const int64_t n = x.dim(0), d = x.dim(1);
    std::vector<double> centers(static_cast<size_t>(k) * d);

    // k-means++ seeding
    std::vector<double> d2(static_cast<size_t>(n), 0.0);
    {
        const int64_t first = rng.uniform_int(n);
        for (int64_t j = 0; j < d; ++j) centers[static_cast<size_t>(j)] = x.ptr()[first * d + j];
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (int cc = 0; cc < c; ++cc) {
                    best = std::min(best,
                                    sq_dist(x.ptr() + i * d, centers.data() + cc * d, d));
                }
                d2[static_cast<size_t>(i)] = best;
                total += best;
            }
            int64_t pick;
            if (total <= 0.0) {
                pick = rng.uniform_int(n);
            } else {
                const double r = rng.uniform() * total;
                double cum = 0.0;
                pick = n - 1;
                for (int64_t i = 0; i < n; ++i) {
                    cum += d2[static_cast<size_t>(i)];
                    if (cum > r) {
                        pick = i;
                        break;
                    }
                }
            }
            for (int64_t j = 0; j < d; ++j) {
                centers[static_cast<size_t>(c) * d + j] = x.ptr()[pick * d + j];
            }
        }
    }

    LloydResult res;
    res.assign.assign(static_cast<size_t>(n), -1);
    std::vector<double> sums(static_cast<size_t>(k) * d);
    std::vector<int64_t> counts(static_cast<size_t>(k));
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        res.inertia = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(x.ptr() + i * d, centers.data(), d);
            for (int c = 1; c < k; ++c) {
                const double dd = sq_dist(x.ptr() + i * d, centers.data() + c * d, d);
                if (dd < bd) {
                    bd = dd;
                    best = c;
                }
            }
            if (res.assign[static_cast<size_t>(i)] != best) {
                res.assign[static_cast<size_t>(i)] = best;
                changed = true;
            }
            res.inertia += bd;
        }
        if (!changed && iter > 0) break;
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int64_t i = 0; i < n; ++i) {
            const int c = res.assign[static_cast<size_t>(i)];
            counts[static_cast<size_t>(c)]++;
            for (int64_t j = 0; j < d; ++j) {
                sums[static_cast<size_t>(c) * d + j] += x.ptr()[i * d + j];
            }
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] > 0) {
                for (int64_t j = 0; j < d; ++j) {
                    centers[static_cast<size_t>(c) * d + j] =
                        sums[static_cast<size_t>(c) * d + j] /
                        static_cast<double>(counts[static_cast<size_t>(c)]);
                }
            } else {
                // revive an empty cluster at the point farthest from its center
                int64_t far = 0;
                double fd = -1.0;
                for (int64_t i = 0; i < n; ++i) {
                    const int ci = res.assign[static_cast<size_t>(i)];
                    const double dd = sq_dist(x.ptr() + i * d, centers.data() + ci * d, d);
                    if (dd > fd) {
                        fd = dd;
                        far = i;
                    }
                }
                for (int64_t j = 0; j < d; ++j) {
                    centers[static_cast<size_t>(c) * d + j] = x.ptr()[far * d + j];
                }
            }
        }
    }
    res.centers = std::move(centers);
    return res;
}

}  // namespace

KmeansResult kmeans(const TensorF& x, int k, int restarts, int max_iters, uint64_t seed) {
    const int64_t n = x.dim(0), d = x.dim(1);
    require(k >= 1, Status::config, "kmeans: k must be positive");
    require(n >= k, Status::degenerate,
            "kmeans: " + std::to_string(n) + " points for k=" + std::to_string(k));
    require(restarts >= 1 && max_iters >= 1, Status::config, "kmeans: bad restarts/iters");

    LloydResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng(derive_seed(seed, "kmeans-restart", static_cast<uint64_t>(r)));
        LloydResult cur = lloyd_once(x, k, max_iters, rng);
        if (cur.inertia < best.inertia) best = std::move(cur);
    }
    KmeansResult out;
    out.assign = std::move(best.assign);
    out.inertia = best.inertia;
    out.centers = TensorF({k, d});
    for (int64_t i = 0; i < k * d; ++i) {
        out.centers.data[static_cast<size_t>(i)] =
            static_cast<float>(best.centers[static_cast<size_t>(i)]);
    }
    return out;
}

std::vector<std::vector<int64_t>> contingency_table(const std::vector<int>& assign,
                                                    const std::vector<int>& labels, int k,
                                                    int num_classes) {
    require(assign.size() == labels.size(), Status::shape, "contingency: size mismatch");
    std::vector<std::vector<int64_t>> t(static_cast<size_t>(k),
                                        std::vector<int64_t>(static_cast<size_t>(num_classes), 0));
    for (size_t i = 0; i < assign.size(); ++i) {
        require(assign[i] >= 0 && assign[i] < k, Status::shape, "contingency: cluster out of range");
        require(labels[i] >= 0 && labels[i] < num_classes, Status::shape,
                "contingency: label out of range");
        t[static_cast<size_t>(assign[i])][static_cast<size_t>(labels[i])]++;
    }
    return t;
}

std::vector<int> hungarian_min_assign(const std::vector<double>& cost, int n) {
    require(n >= 1 && static_cast<int>(cost.size()) == n * n, Status::shape,
            "hungarian: cost must be n*n");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost[static_cast<size_t>((i0 - 1) * n + (j - 1))] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> ans(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[static_cast<size_t>(j)] > 0) ans[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    }
    return ans;
}

double match_accuracy(const std::vector<std::vector<int64_t>>& table, int64_t total) {
    require(!table.empty() && total > 0, Status::degenerate, "match_accuracy: empty table");
    const int k = static_cast<int>(table.size());
    const int classes = static_cast<int>(table[0].size());
    const int n = std::max(k, classes);
    std::vector<double> cost(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < classes; ++j) {
            cost[static_cast<size_t>(i * n + j)] = -static_cast<double>(table[static_cast<size_t>(i)][static_cast<size_t>(j)]);
        }
    }
    const std::vector<int> match = hungarian_min_assign(cost, n);
    int64_t hit = 0;
    for (int i = 0; i < k; ++i) {
        const int j = match[static_cast<size_t>(i)];
        if (j < classes) hit += table[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

double kmeans_accuracy(const TensorF& emb, const std::vector<int>& labels, int num_classes,
                       int restarts, uint64_t seed) {
    const KmeansResult km = kmeans(emb, num_classes, restarts, 300, seed);
    const auto table = contingency_table(km.assign, labels, num_classes, num_classes);
    return match_accuracy(table, emb.dim(0));
}

// ---------------------------------------------------------------- inception score

InceptionScore inception_score(const TensorF& probs, int splits,
                               const std::function<void(const std::string&)>& warn) {
    const int64_t n = probs.dim(0), k = probs.dim(1);
    require(splits >= 1, Status::config, "inception score: splits must be positive");
    require(n >= splits, Status::degenerate,
            "inception score: " + std::to_string(n) + " samples for " +
                std::to_string(splits) + " splits");
    const int64_t per = n / splits;
    if (per * splits != n && warn) {
        warn("inception score: " + std::to_string(n) + " samples not divisible into " +
             std::to_string(splits) + " splits; using " + std::to_string(per) +
             " per split and dropping " + std::to_string(n - per * splits));
    }
    InceptionScore out;
    std::vector<double> py(static_cast<size_t>(k));
    for (int s = 0; s < splits; ++s) {
        const int64_t lo = s * per;
        std::fill(py.begin(), py.end(), 0.0);
        for (int64_t i = lo; i < lo + per; ++i) {
            for (int64_t j = 0; j < k; ++j) {
                py[static_cast<size_t>(j)] += probs.ptr()[i * k + j];
            }
        }
        for (double& v : py) v /= static_cast<double>(per);
        double kl_sum = 0.0;
        for (int64_t i = lo; i < lo + per; ++i) {
            double kl = 0.0;
            for (int64_t j = 0; j < k; ++j) {
                const double p = probs.ptr()[i * k + j];
                if (p > 0.0) kl += p * std::log(p / py[static_cast<size_t>(j)]);
            }
            kl_sum += kl;
        }
        out.per_split.push_back(std::exp(kl_sum / static_cast<double>(per)));
    }
    double m = 0.0;
    for (const double v : out.per_split) m += v;
    m /= static_cast<double>(splits);
    double var = 0.0;
    for (const double v : out.per_split) var += (v - m) * (v - m);
    out.mean = m;
    out.stddev = std::sqrt(var / static_cast<double>(splits));
    return out;
}

int effective_is_splits(int64_t n, int64_t k, int requested,
                        const std::function<void(const std::string&)>& warn) {
    require(requested >= 1 && k >= 1, Status::config, "inception score: bad split request");
    if (n >= static_cast<int64_t>(requested) * k) return requested;
    const int shrunk = static_cast<int>(n / k);
    require(shrunk >= 1, Status::degenerate,
            "inception score: " + std::to_string(n) + " samples cannot fill one split of " +
                std::to_string(k));
    if (warn) {
        warn("inception score: batch of " + std::to_string(n) + " is below " +
             std::to_string(requested) + "*" + std::to_string(k) + "; shrinking to " +
             std::to_string(shrunk) + " splits");
    }
    return shrunk;
}

// ---------------------------------------------------------------- surrogate classifier

TensorF images_to_nchw(const PairedDataset& ds, const std::vector<int64_t>& idx) {
    const int64_t n = static_cast<int64_t>(idx.size());
    const int64_t h = ds.image_size, w = ds.image_size;
    TensorF out({n, 3, h, w});
    for (int64_t i = 0; i < n; ++i) {
        const TensorF& img = ds.images[static_cast<size_t>(idx[static_cast<size_t>(i)])].image;
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                for (int64_t c = 0; c < 3; ++c) {
                    out.data[static_cast<size_t>(((i * 3 + c) * h + y) * w + x)] =
                        img.data[static_cast<size_t>((y * w + x) * 3 + c)];
                }
            }
        }
    }
    return out;
}

ClassifierF train_surrogate_classifier(const PairedDataset& ds,
                                       const ClassifierTrainConfig& cfg) {
    require(!ds.image_train.empty(), Status::config, "dataset has no train images");
    Rng init_rng(derive_seed(cfg.seed, "clf-init"));
    ClassifierF model;
    model.init(init_rng, ds.num_classes, ds.image_size);
    nn::Adam<float> opt;
    opt.lr = cfg.lr;
    const auto params = model.params();
    const int64_t n = static_cast<int64_t>(ds.image_train.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng(derive_seed(cfg.seed, "clf-epoch", static_cast<uint64_t>(epoch)));
        std::vector<int64_t> order(ds.image_train.begin(), ds.image_train.end());
        erng.shuffle(order.begin(), order.end());
        for (int64_t b = 0; b < n; b += cfg.batch) {
            const int64_t m = std::min<int64_t>(cfg.batch, n - b);
            std::vector<int64_t> idx(order.begin() + b, order.begin() + b + m);
            TensorF x = images_to_nchw(ds, idx);
            std::vector<int> labels;
            for (int64_t i : idx) labels.push_back(ds.images[static_cast<size_t>(i)].label);
            nn::zero_grads(params);
            ClassifierF::Cache cache;
            TensorF logits = model.forward(x, cache);
            TensorF dlogits;
            const double loss = nn::softmax_xent<float>(logits, labels, nullptr, &dlogits);
            require(std::isfinite(loss), Status::training, "classifier loss diverged");
            model.backward(cache, dlogits);
            opt.step(params);
        }
    }
    return model;
}

TensorF classify_probs(ClassifierF& model, const TensorF& images, int batch) {
    const int64_t n = images.dim(0);
    const int64_t per = images.numel() / n;
    TensorF probs({n, model.classes});
    for (int64_t b = 0; b < n; b += batch) {
        const int64_t m = std::min<int64_t>(batch, n - b);
        TensorF x({m, images.dim(1), images.dim(2), images.dim(3)});
        std::copy(images.ptr() + b * per, images.ptr() + (b + m) * per, x.ptr());
        ClassifierF::Cache cache;
        TensorF logits = model.forward(x, cache);
        for (int64_t i = 0; i < m; ++i) {
            const float* row = logits.ptr() + i * model.classes;
            double mx = row[0];
            for (int64_t j = 1; j < model.classes; ++j) mx = std::max<double>(mx, row[j]);
            double z = 0.0;
            for (int64_t j = 0; j < model.classes; ++j) {
                z += std::exp(static_cast<double>(row[j]) - mx);
            }
            for (int64_t j = 0; j < model.classes; ++j) {
                probs.data[static_cast<size_t>((b + i) * model.classes + j)] =
                    static_cast<float>(std::exp(static_cast<double>(row[j]) - mx) / z);
            }
        }
    }
    return probs;
}

double classifier_accuracy(ClassifierF& model, const TensorF& images,
                           const std::vector<int>& labels) {
    const TensorF probs = classify_probs(model, images);
    return class_consistency(probs, labels);
}

// ---------------------------------------------------------------- sample statistics

double class_consistency(const TensorF& probs, const std::vector<int>& labels) {
    const int64_t n = probs.dim(0), k = probs.dim(1);
    require(n > 0, Status::degenerate, "class consistency of an empty batch");
    require(static_cast<int64_t>(labels.size()) == n, Status::shape,
            "class consistency: label count mismatch");
    int64_t hit = 0;
    for (int64_t i = 0; i < n; ++i) {
        const float* row = probs.ptr() + i * k;
        int best = 0;
        for (int64_t j = 1; j < k; ++j) {
            if (row[j] > row[best]) best = static_cast<int>(j);
        }
        if (best == labels[static_cast<size_t>(i)]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(n);
}

double pairwise_diversity(const TensorF& imgs) {
    const int64_t n = imgs.dim(0);
    require(n >= 2, Status::config, "pairwise diversity needs at least two images");
    const int64_t per = imgs.numel() / n;
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) {
            const float* a = imgs.ptr() + i * per;
            const float* b = imgs.ptr() + j * per;
            double s = 0.0;
            for (int64_t k = 0; k < per; ++k) {
                s += std::abs(static_cast<double>(a[k]) - b[k]);
            }
            total += s / static_cast<double>(per);
        }
    }
    return total / (static_cast<double>(n) * (n - 1) / 2.0);
}

// ---------------------------------------------------------------- embedding export

void export_embedding_2d(const TensorF& emb, const std::vector<int>& labels,
                         const fs::path& csv_path) {
    const int64_t n = emb.dim(0), d = emb.dim(1);
    require(n >= 3 && d >= 2, Status::config, "embedding export needs n>=3 and dim>=2");
    require(static_cast<int64_t>(labels.size()) == n, Status::shape,
            "embedding export: label count mismatch");
    Eigen::MatrixXd xc(n, d);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < d; ++j) xc(i, j) = emb.ptr()[i * d + j];
    }
    xc.rowwise() -= xc.colwise().mean();
    const Eigen::MatrixXd cov = xc.transpose() * xc / static_cast<double>(n);
    require(cov.trace() > 1e-24, Status::degenerate,
            "embedding export: zero variance (all points identical)");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    require(es.info() == Eigen::Success, Status::internal, "PCA eigensolver failed");
    Eigen::MatrixXd basis(d, 2);
    basis.col(0) = es.eigenvectors().col(d - 1);  // eigenvalues ascend
    basis.col(1) = es.eigenvectors().col(d - 2);
    for (int c = 0; c < 2; ++c) {
        int64_t arg = 0;
        for (int64_t j = 1; j < d; ++j) {
            if (std::abs(basis(j, c)) > std::abs(basis(arg, c))) arg = j;
        }
        if (basis(arg, c) < 0) basis.col(c) = -basis.col(c);
    }
    const Eigen::MatrixXd proj = xc * basis;
    std::ofstream f(csv_path, std::ios::trunc);
    require(f.good(), Status::io, "cannot write " + csv_path.string());
    f << "x,y,label\n";
    char buf[80];
    for (int64_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d\n", proj(i, 0), proj(i, 1),
                      labels[static_cast<size_t>(i)]);
        f << buf;
    }
    require(f.good(), Status::io, "write failed: " + csv_path.string());
}

}  // namespace e2i
