#ifndef E2I_CORE_ENCODER_HPP
#define E2I_CORE_ENCODER_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "adam.hpp"
#include "container.hpp"
#include "dataio.hpp"
#include "losses.hpp"
#include "lstm.hpp"

namespace e2i {

// LSTM over the channel vectors of each time step, then an affine projection
// to the embedding space, optionally L2-normalized.
template <class S>
struct EncoderModel {
    nn::Lstm<S> lstm;
    nn::Param<S> proj_w;  // [out, hidden]
    nn::Param<S> proj_b;  // [out]
    nn::Param<S> head_w;  // [classes, out]; present only for the softmax regime
    nn::Param<S> head_b;
    int64_t channels = 0, timesteps = 0, hidden = 128, out_dim = 128;
    int64_t head_classes = 0;
    bool normalize = true;

    void init(Rng& rng, int64_t c, int64_t t, int64_t h, int64_t out, bool norm,
              int64_t classes = 0) {
        channels = c;
        timesteps = t;
        hidden = h;
        out_dim = out;
        normalize = norm;
        head_classes = classes;
        lstm.init(rng, c, h);
        proj_w.resize({out, h});
        proj_b.resize({out});
        const double a = 1.0 / std::sqrt(static_cast<double>(h));
        nn::init_uniform(rng, proj_w.value, -a, a);
        if (classes > 0) {
            head_w.resize({classes, out});
            head_b.resize({classes});
            const double ah = 1.0 / std::sqrt(static_cast<double>(out));
            nn::init_uniform(rng, head_w.value, -ah, ah);
        }
    }

    struct Cache {
        typename nn::Lstm<S>::Cache lstm;
        Tensor<S> h_final;
        Tensor<S> pre_norm;
        Tensor<S> emb;
        std::vector<S> norms;
    };

    // x[N,C,T] -> embeddings [N,out]
    Tensor<S> forward(const Tensor<S>& x, Cache& cache) const {
        require(x.ndim() == 3 && x.dim(1) == channels && x.dim(2) == timesteps, Status::shape,
                "encoder: input " + x.shape_str() + " does not match model [N," +
                    std::to_string(channels) + "," + std::to_string(timesteps) + "]");
        lstm.forward(x, cache.h_final, cache.lstm);
        nn::dense_forward(cache.h_final, proj_w, proj_b, cache.pre_norm);
        if (normalize) {
            nn::l2_normalize_rows(cache.pre_norm, cache.emb, &cache.norms);
        } else {
            cache.emb = cache.pre_norm;
        }
        return cache.emb;
    }

    void backward(Cache& cache, const Tensor<S>& gemb) {
        Tensor<S> gpre;
        if (normalize) {
            nn::l2_normalize_rows_backward(cache.emb, cache.norms, gemb, gpre);
        } else {
            gpre = gemb;
        }
        Tensor<S> gh;
        nn::dense_backward(cache.h_final, proj_w, proj_b, gpre, &gh);
        lstm.backward(cache.lstm, gh);
    }

    std::vector<nn::Param<S>*> params() {
        std::vector<nn::Param<S>*> p{&lstm.wx, &lstm.wh, &lstm.b, &proj_w, &proj_b};
        if (head_classes > 0) {
            p.push_back(&head_w);
            p.push_back(&head_b);
        }
        return p;
    }
};

using EncoderF = EncoderModel<float>;

struct EncoderTrainConfig {
    std::string regime = "triplet";  // triplet | softmax
    int epochs = 50;
    int batch_classes = 10;   // P classes drawn per batch
    int batch_per_class = 8;  // Kb samples per drawn class (clamped to availability)
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double margin = 0.2;
    Mining mining = Mining::semi_hard;
    int hidden = 128;
    int out_dim = 128;
    bool normalize = true;
    double grad_clip = 5.0;
    int kmeans_restarts = 10;
    uint64_t seed = 0;
};

struct EncoderTrainResult {
    double final_loss = 0.0;
    double train_kmeans_acc = 0.0;
    double test_kmeans_acc = 0.0;
    double cls_acc = 0.0;  // softmax regime only
    int epochs_run = 0;
};

// Trains on the dataset's EEG train split; writes encoder_log.csv and a
// checkpoint directory under out_dir.
EncoderTrainResult train_encoder(const PairedDataset& ds, const EncoderTrainConfig& cfg,
                                 const std::filesystem::path& out_dir, EncoderF& model);

// Stacks the EEG samples at the given indices into one [N,C,T] batch.
TensorF stack_eeg(const PairedDataset& ds, const std::vector<int64_t>& idx);

// Embeds EEG rows in eval mode, batched.
TensorF embed_all(const EncoderF& model, const TensorF& eeg);

// config_json, when nonempty, is echoed into the checkpoint metadata.
void save_encoder(const EncoderF& model, const std::filesystem::path& dir,
                  const std::string& config_json = "");
EncoderF load_encoder(const std::filesystem::path& dir);

std::string encoder_config_json(const EncoderTrainConfig& cfg);

}  // namespace e2i

#endif
