#ifndef E2I_CORE_METRICS_HPP
#define E2I_CORE_METRICS_HPP

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "adam.hpp"
#include "dataio.hpp"
#include "ops.hpp"

namespace e2i {

// ---------------------------------------------------------------- k-means

struct KmeansResult {
    std::vector<int> assign;
    TensorF centers;  // [k, D]
    double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding, best inertia over restarts.
// Ties (point equidistant to centers, equal restart inertia) resolve to the
// lowest index so results are a pure function of the inputs and seed.
KmeansResult kmeans(const TensorF& x, int k, int restarts, int max_iters, uint64_t seed);

// n x n contingency counts between cluster assignments and labels.
std::vector<std::vector<int64_t>> contingency_table(const std::vector<int>& assign,
                                                    const std::vector<int>& labels, int k,
                                                    int num_classes);

// Minimum-cost perfect assignment on an n x n cost matrix (row-major).
// Returns col index per row.
std::vector<int> hungarian_min_assign(const std::vector<double>& cost, int n);

// Fraction of samples whose cluster maps to their class under the best
// one-to-one cluster->class matching of the contingency table.
double match_accuracy(const std::vector<std::vector<int64_t>>& table, int64_t total);

// Convenience: cluster embeddings into num_classes groups and score against labels.
double kmeans_accuracy(const TensorF& emb, const std::vector<int>& labels, int num_classes,
                       int restarts, uint64_t seed);

// ---------------------------------------------------------------- inception score

struct InceptionScore {
    double mean = 0.0;
    double stddev = 0.0;  // population std over splits
    std::vector<double> per_split;
};

// probs [N, K]. When N is not divisible by splits, each split shrinks to
// floor(N/splits) rows and the remainder is dropped (warn_fn is told).
InceptionScore inception_score(const TensorF& probs, int splits,
                               const std::function<void(const std::string&)>& warn = nullptr);

// Split-count rule: `requested` splits (default 10) unless the batch is
// smaller than requested*k, in which case splits shrink to floor(n/k).
int effective_is_splits(int64_t n, int64_t k, int requested,
                        const std::function<void(const std::string&)>& warn = nullptr);

// ---------------------------------------------------------------- surrogate classifier

// Small conv net scoring p(class | image); stands in for a pretrained
// backbone when computing inception-style metrics on synthetic data.
template <class S>
struct ClassifierModel {
    nn::Param<S> w1, b1, w2, b2, w3, b3;  // conv k3 s2 p1: 3->16->32->64
    nn::Param<S> head_w, head_b;          // [K, 64] after global average pooling
    int64_t classes = 0;
    int64_t image_size = 0;

    void init(Rng& rng, int64_t k, int64_t img) {
        classes = k;
        image_size = img;
        w1.resize({16, 3, 3, 3});
        b1.resize({16});
        w2.resize({32, 16, 3, 3});
        b2.resize({32});
        w3.resize({64, 32, 3, 3});
        b3.resize({64});
        head_w.resize({k, 64});
        head_b.resize({k});
        nn::init_normal(rng, w1.value, 0.0, 0.05);
        nn::init_normal(rng, w2.value, 0.0, 0.05);
        nn::init_normal(rng, w3.value, 0.0, 0.05);
        // zero head: an untrained model scores every class equally
    }

    struct Cache {
        Tensor<S> x, a1, a2, a3, pooled, logits;
        Tensor<S> scratch;
    };

    // x [N,3,H,W] -> logits [N,K]
    Tensor<S> forward(const Tensor<S>& x, Cache& cache) {
        cache.x = x;
        nn::conv2d_forward(x, w1, b1, 3, 2, 1, cache.a1, cache.scratch);
        nn::lrelu_forward(cache.a1, 0.1);
        nn::conv2d_forward(cache.a1, w2, b2, 3, 2, 1, cache.a2, cache.scratch);
        nn::lrelu_forward(cache.a2, 0.1);
        nn::conv2d_forward(cache.a2, w3, b3, 3, 2, 1, cache.a3, cache.scratch);
        nn::lrelu_forward(cache.a3, 0.1);
        const int64_t n = x.dim(0), c = cache.a3.dim(1);
        const int64_t hw = cache.a3.dim(2) * cache.a3.dim(3);
        cache.pooled = Tensor<S>({n, c});
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t ch = 0; ch < c; ++ch) {
                const S* p = cache.a3.ptr() + (i * c + ch) * hw;
                double s = 0.0;
                for (int64_t j = 0; j < hw; ++j) s += p[j];
                cache.pooled.data[static_cast<size_t>(i * c + ch)] =
                    static_cast<S>(s / static_cast<double>(hw));
            }
        }
        nn::dense_forward(cache.pooled, head_w, head_b, cache.logits);
        return cache.logits;
    }

    void backward(Cache& cache, const Tensor<S>& glogits) {
        Tensor<S> gpooled;
        nn::dense_backward(cache.pooled, head_w, head_b, glogits, &gpooled);
        const int64_t n = cache.a3.dim(0), c = cache.a3.dim(1);
        const int64_t hw = cache.a3.dim(2) * cache.a3.dim(3);
        Tensor<S> ga3(cache.a3.shape);
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t ch = 0; ch < c; ++ch) {
                const S g = gpooled.data[static_cast<size_t>(i * c + ch)] /
                            static_cast<S>(hw);
                S* p = ga3.ptr() + (i * c + ch) * hw;
                for (int64_t j = 0; j < hw; ++j) p[j] = g;
            }
        }
        nn::lrelu_backward(cache.a3, 0.1, ga3);
        Tensor<S> ga2;
        nn::conv2d_backward(cache.a2, w3, b3, 3, 2, 1, ga3, &ga2, cache.scratch);
        nn::lrelu_backward(cache.a2, 0.1, ga2);
        Tensor<S> ga1;
        nn::conv2d_backward(cache.a1, w2, b2, 3, 2, 1, ga2, &ga1, cache.scratch);
        nn::lrelu_backward(cache.a1, 0.1, ga1);
        nn::conv2d_backward<S>(cache.x, w1, b1, 3, 2, 1, ga1, nullptr, cache.scratch);
    }

    std::vector<nn::Param<S>*> params() {
        return {&w1, &b1, &w2, &b2, &w3, &b3, &head_w, &head_b};
    }
};

using ClassifierF = ClassifierModel<float>;

struct ClassifierTrainConfig {
    int epochs = 40;
    int batch = 32;
    double lr = 1e-3;
    uint64_t seed = 0;
};

// Trains on the dataset's train images (NCHW, converted internally).
ClassifierF train_surrogate_classifier(const PairedDataset& ds,
                                       const ClassifierTrainConfig& cfg);

// Softmax class probabilities for images in [N,3,H,W] layout.
TensorF classify_probs(ClassifierF& model, const TensorF& images, int batch = 64);

// Top-1 accuracy of the surrogate on [N,3,H,W] images.
double classifier_accuracy(ClassifierF& model, const TensorF& images,
                           const std::vector<int>& labels);

// ---------------------------------------------------------------- sample statistics

// Fraction of probs rows whose argmax equals the intended label.
double class_consistency(const TensorF& probs, const std::vector<int>& labels);

// Mean absolute pixel difference over all unordered image pairs. imgs is
// [N, ...]; the trailing dimensions are flattened.
double pairwise_diversity(const TensorF& imgs);

// ---------------------------------------------------------------- embedding export

// PCA projection to 2D; writes "x,y,label" rows. The sign of each component
// is fixed so the largest-magnitude loading is positive.
void export_embedding_2d(const TensorF& emb, const std::vector<int>& labels,
                         const std::filesystem::path& csv_path);

// HWC [H,W,3] dataset images at the given indices -> NCHW batch [N,3,H,W].
TensorF images_to_nchw(const PairedDataset& ds, const std::vector<int64_t>& idx);

}  // namespace e2i

#endif
