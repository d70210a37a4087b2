#include "encoder.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "metrics.hpp"

namespace fs = std::filesystem;

namespace e2i {

TensorF stack_eeg(const PairedDataset& ds, const std::vector<int64_t>& idx) {
    const int64_t n = static_cast<int64_t>(idx.size());
    TensorF x({n, ds.channels, ds.timesteps});
    const int64_t per = ds.channels * ds.timesteps;
    for (int64_t i = 0; i < n; ++i) {
        const EEGSample& s = ds.eeg[static_cast<size_t>(idx[static_cast<size_t>(i)])];
        std::copy(s.signal.data.begin(), s.signal.data.end(), x.ptr() + i * per);
    }
    return x;
}

TensorF embed_all(const EncoderF& model, const TensorF& eeg) {
    const int64_t n = eeg.dim(0), c = eeg.dim(1), t = eeg.dim(2);
    const int64_t per = c * t;
    const int64_t batch = 64;
    TensorF out({n, model.out_dim});
    for (int64_t b = 0; b < n; b += batch) {
        const int64_t m = std::min(batch, n - b);
        TensorF x({m, c, t});
        std::copy(eeg.ptr() + b * per, eeg.ptr() + (b + m) * per, x.ptr());
        EncoderF::Cache cache;
        const TensorF emb = model.forward(x, cache);
        std::copy(emb.data.begin(), emb.data.end(), out.ptr() + b * model.out_dim);
    }
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// Embeddings + labels for one EEG split.
std::pair<TensorF, std::vector<int>> split_embeddings(const EncoderF& model,
                                                      const PairedDataset& ds,
                                                      const std::vector<int>& split) {
    const std::vector<int64_t> idx(split.begin(), split.end());
    TensorF eeg = stack_eeg(ds, idx);
    std::vector<int> labels;
    labels.reserve(split.size());
    for (int i : split) labels.push_back(ds.eeg[static_cast<size_t>(i)].label);
    return {embed_all(model, eeg), std::move(labels)};
}

double head_accuracy(const EncoderF& model, const TensorF& emb,
                     const std::vector<int>& labels) {
    TensorF logits;
    nn::dense_forward(emb, model.head_w, model.head_b, logits);
    const int64_t n = logits.dim(0), k = logits.dim(1);
    int64_t hit = 0;
    for (int64_t i = 0; i < n; ++i) {
        const float* row = logits.ptr() + i * k;
        int best = 0;
        for (int64_t j = 1; j < k; ++j) {
            if (row[j] > row[best]) best = static_cast<int>(j);
        }
        if (best == labels[static_cast<size_t>(i)]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(n);
}

}  // namespace

EncoderTrainResult train_encoder(const PairedDataset& ds, const EncoderTrainConfig& cfg,
                                 const fs::path& out_dir, EncoderF& model) {
    const bool softmax = cfg.regime == "softmax";
    require(softmax || cfg.regime == "triplet", Status::config,
            "unknown encoder regime: " + cfg.regime);
    require(ds.num_classes >= 2, Status::config,
            "encoder training needs at least two classes, got " +
                std::to_string(ds.num_classes));
    require(cfg.epochs >= 0, Status::config, "negative epoch count");
    require(cfg.batch_classes >= 2 && cfg.batch_per_class >= 2, Status::config,
            "batch spec needs >= 2 classes per batch and >= 2 samples per class");
    require(!ds.eeg_train.empty(), Status::config, "dataset has no EEG train split");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec, Status::io, "cannot create " + out_dir.string());

    // per-class train pools for P x Kb balanced batches
    std::vector<std::vector<int64_t>> pools(static_cast<size_t>(ds.num_classes));
    for (int64_t i : ds.eeg_train) {
        pools[static_cast<size_t>(ds.eeg[static_cast<size_t>(i)].label)].push_back(i);
    }
    int64_t nonempty = 0;
    for (const auto& p : pools) nonempty += p.empty() ? 0 : 1;
    require(nonempty >= 2, Status::config, "train split covers fewer than two classes");
    const int p_eff = static_cast<int>(std::min<int64_t>(cfg.batch_classes, nonempty));

    Rng init_rng(derive_seed(cfg.seed, "encoder-init"));
    model.init(init_rng, ds.channels, ds.timesteps, cfg.hidden, cfg.out_dim, cfg.normalize,
               softmax ? ds.num_classes : 0);
    nn::Adam<float> opt;
    opt.lr = cfg.lr;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    const auto params = model.params();

    std::ofstream log(out_dir / "encoder_log.csv", std::ios::trunc);
    require(log.good(), Status::io, "cannot write encoder_log.csv");
    log << "epoch,loss,train_kmeans_acc,test_kmeans_acc";
    if (softmax) log << ",cls_acc";
    log << "\n";

    const int64_t n_train = static_cast<int64_t>(ds.eeg_train.size());
    const int64_t nominal = static_cast<int64_t>(p_eff) * cfg.batch_per_class;
    const int64_t n_batches = std::max<int64_t>(1, (n_train + nominal - 1) / nominal);

    std::vector<int> class_order(static_cast<size_t>(ds.num_classes));
    for (size_t k = 0; k < class_order.size(); ++k) class_order[k] = static_cast<int>(k);

    EncoderTrainResult res;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng(derive_seed(cfg.seed, "encoder-epoch", static_cast<uint64_t>(epoch)));

        double loss_sum = 0.0;
        for (int64_t b = 0; b < n_batches; ++b) {
            // P classes, Kb samples each (clamped to the class pool)
            erng.shuffle(class_order.begin(), class_order.end());
            std::vector<int64_t> idx;
            int taken_classes = 0;
            for (const int k : class_order) {
                if (taken_classes == p_eff) break;
                auto& pool = pools[static_cast<size_t>(k)];
                if (pool.empty()) continue;
                erng.shuffle(pool.begin(), pool.end());
                const size_t take = std::min<size_t>(pool.size(),
                                                     static_cast<size_t>(cfg.batch_per_class));
                idx.insert(idx.end(), pool.begin(), pool.begin() + static_cast<int64_t>(take));
                ++taken_classes;
            }
            TensorF x = stack_eeg(ds, idx);
            std::vector<int> labels;
            for (int64_t i : idx) labels.push_back(ds.eeg[static_cast<size_t>(i)].label);

            nn::zero_grads(params);
            EncoderF::Cache cache;
            TensorF emb = model.forward(x, cache);
            double loss;
            TensorF gemb;
            if (softmax) {
                TensorF logits, dlogits;
                nn::dense_forward(emb, model.head_w, model.head_b, logits);
                loss = nn::softmax_xent<float>(logits, labels, nullptr, &dlogits);
                nn::dense_backward(emb, model.head_w, model.head_b, dlogits, &gemb);
            } else {
                const auto triplets = mine_triplets(emb, labels, cfg.margin, cfg.mining);
                loss = triplet_loss(emb, triplets, cfg.margin, &gemb);
            }
            if (!std::isfinite(loss)) {
                fail(Status::training, "encoder loss diverged at epoch " +
                                           std::to_string(epoch) + " batch " +
                                           std::to_string(b));
            }
            model.backward(cache, gemb);
            nn::clip_grad_norm(params, cfg.grad_clip);
            opt.step(params);
            loss_sum += loss;
        }

        const auto [train_emb, train_labels] = split_embeddings(model, ds, ds.eeg_train);
        const auto [test_emb, test_labels] = split_embeddings(model, ds, ds.eeg_test);
        res.final_loss = loss_sum / static_cast<double>(n_batches);
        res.train_kmeans_acc = kmeans_accuracy(
            train_emb, train_labels, static_cast<int>(ds.num_classes), cfg.kmeans_restarts,
            derive_seed(cfg.seed, "encoder-km-train", static_cast<uint64_t>(epoch)));
        res.test_kmeans_acc = kmeans_accuracy(
            test_emb, test_labels, static_cast<int>(ds.num_classes), cfg.kmeans_restarts,
            derive_seed(cfg.seed, "encoder-km-test", static_cast<uint64_t>(epoch)));
        res.epochs_run = epoch + 1;
        log << epoch << "," << fmt(res.final_loss) << "," << fmt(res.train_kmeans_acc) << ","
            << fmt(res.test_kmeans_acc);
        if (softmax) {
            res.cls_acc = head_accuracy(model, test_emb, test_labels);
            log << "," << fmt(res.cls_acc);
        }
        log << "\n";
        log.flush();
    }
    save_encoder(model, out_dir / "encoder_ckpt", encoder_config_json(cfg));
    return res;
}

std::string encoder_config_json(const EncoderTrainConfig& cfg) {
    nlohmann::json j;
    j["regime"] = cfg.regime;
    j["epochs"] = cfg.epochs;
    j["batch_classes"] = cfg.batch_classes;
    j["batch_per_class"] = cfg.batch_per_class;
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["margin"] = cfg.margin;
    j["mining"] = cfg.mining == Mining::semi_hard
                      ? "semi_hard"
                      : (cfg.mining == Mining::hard ? "hard" : "all_valid");
    j["hidden"] = cfg.hidden;
    j["out_dim"] = cfg.out_dim;
    j["normalize"] = cfg.normalize;
    j["grad_clip"] = cfg.grad_clip;
    j["kmeans_restarts"] = cfg.kmeans_restarts;
    j["seed"] = cfg.seed;
    return j.dump();
}

void save_encoder(const EncoderF& model, const fs::path& dir, const std::string& config_json) {
    Container c;
    c.add("lstm_wx", model.lstm.wx.value);
    c.add("lstm_wh", model.lstm.wh.value);
    c.add("lstm_b", model.lstm.b.value);
    c.add("proj_w", model.proj_w.value);
    c.add("proj_b", model.proj_b.value);
    if (model.head_classes > 0) {
        c.add("head_w", model.head_w.value);
        c.add("head_b", model.head_b.value);
    }
    c.metadata["kind"] = "encoder";
    c.metadata["channels"] = std::to_string(model.channels);
    c.metadata["timesteps"] = std::to_string(model.timesteps);
    c.metadata["hidden"] = std::to_string(model.hidden);
    c.metadata["out_dim"] = std::to_string(model.out_dim);
    c.metadata["normalize"] = model.normalize ? "1" : "0";
    c.metadata["head_classes"] = std::to_string(model.head_classes);
    if (!config_json.empty()) c.metadata["config"] = config_json;
    save_container_atomic(c, dir.string());
}

namespace {

int64_t meta_int(const Container& c, const std::string& key) {
    const auto it = c.metadata.find(key);
    require(it != c.metadata.end(), Status::format, "checkpoint metadata missing " + key);
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        fail(Status::format, "checkpoint metadata " + key + " is not an integer");
    }
}

void load_param(const Container& c, const std::string& name, nn::Param<float>& p,
                std::vector<int64_t> shape) {
    const TensorF& t = c.get(name);
    require(t.shape == shape, Status::integrity,
            "checkpoint array " + name + " has shape " + t.shape_str());
    p.resize(std::move(shape));
    p.value = t;
}

}  // namespace

EncoderF load_encoder(const fs::path& dir) {
    const Container c = load_container(dir.string());
    const auto kind = c.metadata.find("kind");
    require(kind != c.metadata.end() && kind->second == "encoder", Status::format,
            "not an encoder checkpoint: " + dir.string());
    EncoderF m;
    m.channels = meta_int(c, "channels");
    m.timesteps = meta_int(c, "timesteps");
    m.hidden = meta_int(c, "hidden");
    m.out_dim = meta_int(c, "out_dim");
    m.normalize = meta_int(c, "normalize") != 0;
    m.head_classes = meta_int(c, "head_classes");
    m.lstm.input = m.channels;
    m.lstm.hidden = m.hidden;
    load_param(c, "lstm_wx", m.lstm.wx, {4 * m.hidden, m.channels});
    load_param(c, "lstm_wh", m.lstm.wh, {4 * m.hidden, m.hidden});
    load_param(c, "lstm_b", m.lstm.b, {4 * m.hidden});
    load_param(c, "proj_w", m.proj_w, {m.out_dim, m.hidden});
    load_param(c, "proj_b", m.proj_b, {m.out_dim});
    if (m.head_classes > 0) {
        load_param(c, "head_w", m.head_w, {m.head_classes, m.out_dim});
        load_param(c, "head_b", m.head_b, {m.head_classes});
    }
    return m;
}

}  // namespace e2i
