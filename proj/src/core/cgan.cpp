#include "cgan.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "../../vendor/json.hpp"

namespace e2i {

namespace fs = std::filesystem;
using dataio::PairedDataset;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

TensorF draw_normal(Rng& rng, int64_t n, int64_t d) {
    TensorF z({n, d});
    for (auto& v : z.data) v = static_cast<float>(rng.normal());
    return z;
}

TensorF gather_rows(const TensorF& src, const std::vector<int>& rows) {
    const int64_t d = src.dim(1);
    TensorF out({static_cast<int64_t>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i) {
        std::copy(src.ptr() + rows[i] * d, src.ptr() + (rows[i] + 1) * d,
                  out.ptr() + static_cast<int64_t>(i) * d);
    }
    return out;
}

void check_finite(double v, int step, const char* term) {
    require(std::isfinite(v), Status::training,
            "gan: step " + std::to_string(step) + ": " + term + " is not finite");
}

void save_bn(Container& c, const std::string& prefix, const nn::BatchNorm<float>& bn) {
    c.add(prefix + "_gamma", bn.gamma.value);
    c.add(prefix + "_beta", bn.beta.value);
    c.add(prefix + "_rm", bn.running_mean);
    c.add(prefix + "_rv", bn.running_var);
}

void load_bn(const Container& c, const std::string& prefix, nn::BatchNorm<float>& bn,
             int64_t channels) {
    bn.init(channels);
    const std::string names[4] = {prefix + "_gamma", prefix + "_beta", prefix + "_rm",
                                  prefix + "_rv"};
    TensorF* dst[4] = {&bn.gamma.value, &bn.beta.value, &bn.running_mean, &bn.running_var};
    for (int i = 0; i < 4; ++i) {
        const TensorF& t = c.get(names[i]);
        require(t.numel() == channels, Status::integrity,
                "checkpoint: " + names[i] + " has " + std::to_string(t.numel()) +
                    " values, expected " + std::to_string(channels));
        *dst[i] = t;
        dst[i]->reshape({channels});
    }
}

void load_param(const Container& c, const std::string& name, nn::Param<float>& p) {
    const TensorF& t = c.get(name);
    require(t.numel() == p.value.numel(), Status::integrity,
            "checkpoint: " + name + " has " + std::to_string(t.numel()) +
                " values, expected " + std::to_string(p.value.numel()));
    std::copy(t.ptr(), t.ptr() + t.numel(), p.value.ptr());
}

int64_t meta_int(const Container& c, const std::string& key) {
    auto it = c.metadata.find(key);
    require(it != c.metadata.end(), Status::format, "checkpoint: missing metadata " + key);
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        fail(Status::format, "checkpoint: metadata " + key + " is not an integer");
    }
}

}  // namespace

TensorF generate(GeneratorF& gen, const TensorF& z, const TensorF& psi) {
    GeneratorF::Cache c;
    return gen.forward(z, psi, false, c);
}

void save_class_grid(const TensorF& images, const std::vector<int>& labels, int num_classes,
                     const fs::path& path) {
    require(images.ndim() == 4 && images.dim(1) == 3, Status::shape,
            "grid: images must be [N,3,H,W]");
    const int64_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
    require(static_cast<int64_t>(labels.size()) == n, Status::shape,
            "grid: label count mismatch");
    std::vector<TensorF> hwc;
    hwc.reserve(static_cast<size_t>(n));
    std::vector<const TensorF*> ordered;
    int64_t cols = -1;
    for (int k = 0; k < num_classes; ++k) {
        int64_t count = 0;
        for (int64_t i = 0; i < n; ++i) {
            if (labels[static_cast<size_t>(i)] != k) continue;
            TensorF img({h, w, 3});
            for (int64_t c = 0; c < 3; ++c)
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < w; ++x)
                        img.data[static_cast<size_t>((y * w + x) * 3 + c)] =
                            images.data[static_cast<size_t>(((i * 3 + c) * h + y) * w + x)];
            hwc.push_back(std::move(img));
            ++count;
        }
        require(count > 0, Status::internal, "grid: class " + std::to_string(k) + " is empty");
        require(cols < 0 || count == cols, Status::internal, "grid: ragged class counts");
        cols = count;
    }
    ordered.reserve(hwc.size());
    for (const auto& t : hwc) ordered.push_back(&t);
    dataio::save_image_grid(path.string(), ordered, num_classes, static_cast<int>(cols));
}

GanEval evaluate_gan(GeneratorF& gen, ClassifierF& clf, const TensorF& psi_pool,
                     const std::vector<int>& psi_labels, int num_classes, int per_class,
                     int is_splits, uint64_t seed, TensorF* images_out,
                     std::vector<int>* labels_out, std::vector<double>* per_class_is_mean,
                     std::vector<double>* per_class_is_std) {
    require(num_classes >= 1 && per_class >= 1, Status::config, "evaluate: bad grid size");
    require(psi_pool.ndim() == 2 &&
                psi_pool.dim(0) == static_cast<int64_t>(psi_labels.size()),
            Status::shape, "evaluate: pool/label mismatch");
    std::vector<std::vector<int>> by_class(static_cast<size_t>(num_classes));
    for (size_t i = 0; i < psi_labels.size(); ++i) {
        require(psi_labels[i] >= 0 && psi_labels[i] < num_classes, Status::invalid_data,
                "evaluate: label out of range");
        by_class[static_cast<size_t>(psi_labels[i])].push_back(static_cast<int>(i));
    }
    for (int k = 0; k < num_classes; ++k) {
        require(!by_class[static_cast<size_t>(k)].empty(), Status::config,
                "evaluate: no conditioning embeddings for class " + std::to_string(k));
    }
    Rng rng(derive_seed(seed, "eval-z"));
    const int64_t n = static_cast<int64_t>(num_classes) * per_class;
    std::vector<int> rows(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    for (int k = 0; k < num_classes; ++k) {
        const auto& pool = by_class[static_cast<size_t>(k)];
        for (int j = 0; j < per_class; ++j) {
            rows[static_cast<size_t>(k * per_class + j)] = pool[j % pool.size()];
            labels[static_cast<size_t>(k * per_class + j)] = k;
        }
    }
    const TensorF psi = gather_rows(psi_pool, rows);
    const TensorF z = draw_normal(rng, n, gen.z_dim);
    TensorF images = generate(gen, z, psi);

    GanEval ev;
    const TensorF probs = classify_probs(clf, images);
    ev.consistency = class_consistency(probs, labels);
    const int eff = effective_is_splits(n, num_classes, is_splits, nullptr);
    const InceptionScore is = inception_score(probs, eff, nullptr);
    ev.is_mean = is.mean;
    ev.is_std = is.stddev;
    if (per_class_is_mean || per_class_is_std) {
        if (per_class_is_mean) per_class_is_mean->assign(static_cast<size_t>(num_classes), 0.0);
        if (per_class_is_std) per_class_is_std->assign(static_cast<size_t>(num_classes), 0.0);
        for (int k = 0; k < num_classes; ++k) {
            TensorF sub({per_class, probs.dim(1)});
            std::copy(probs.ptr() + static_cast<int64_t>(k) * per_class * probs.dim(1),
                      probs.ptr() + static_cast<int64_t>(k + 1) * per_class * probs.dim(1),
                      sub.ptr());
            const int keff = effective_is_splits(per_class, num_classes, is_splits, nullptr);
            const InceptionScore kis = inception_score(sub, keff, nullptr);
            if (per_class_is_mean) (*per_class_is_mean)[static_cast<size_t>(k)] = kis.mean;
            if (per_class_is_std) (*per_class_is_std)[static_cast<size_t>(k)] = kis.stddev;
        }
    }

    // Diversity isolates latent variation: per class, one fixed condition and
    // fresh draws of z.
    if (per_class >= 2) {
        double acc = 0.0;
        for (int k = 0; k < num_classes; ++k) {
            const int row = by_class[static_cast<size_t>(k)].front();
            TensorF psi_k({per_class, psi_pool.dim(1)});
            for (int j = 0; j < per_class; ++j)
                std::copy(psi_pool.ptr() + row * psi_pool.dim(1),
                          psi_pool.ptr() + (row + 1) * psi_pool.dim(1),
                          psi_k.ptr() + static_cast<int64_t>(j) * psi_pool.dim(1));
            const TensorF zk = draw_normal(rng, per_class, gen.z_dim);
            const TensorF imgs_k = generate(gen, zk, psi_k);
            acc += pairwise_diversity(imgs_k);
        }
        ev.diversity = acc / num_classes;
    }

    if (images_out) *images_out = std::move(images);
    if (labels_out) *labels_out = std::move(labels);
    return ev;
}

std::string gan_config_json(const GanConfig& cfg) {
    nlohmann::json j;
    j["steps"] = cfg.steps;
    j["batch"] = cfg.batch;
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["alpha"] = cfg.alpha;
    j["use_ms"] = cfg.use_ms;
    j["use_aug"] = cfg.use_aug;
    j["ms_eps"] = cfg.ms_eps;
    j["d_steps_per_g_step"] = cfg.d_steps_per_g_step;
    j["image_size"] = cfg.image_size;
    j["z_dim"] = cfg.z_dim;
    j["g_base_channels"] = cfg.g_base_channels;
    j["d_base_channels"] = cfg.d_base_channels;
    j["seed"] = cfg.seed;
    j["log_every"] = cfg.log_every;
    j["sample_every"] = cfg.sample_every;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["eval_per_class"] = cfg.eval_per_class;
    j["is_splits"] = cfg.is_splits;
    j["policy"] = {{"brightness", cfg.policy.brightness},
                   {"saturation", cfg.policy.saturation},
                   {"contrast", cfg.policy.contrast},
                   {"translation", cfg.policy.translation},
                   {"brightness_range", cfg.policy.brightness_range},
                   {"saturation_min", cfg.policy.saturation_min},
                   {"saturation_max", cfg.policy.saturation_max},
                   {"contrast_min", cfg.policy.contrast_min},
                   {"contrast_max", cfg.policy.contrast_max},
                   {"translation_ratio", cfg.policy.translation_ratio}};
    j["surrogate"] = {{"epochs", cfg.surrogate.epochs},
                      {"batch", cfg.surrogate.batch},
                      {"lr", cfg.surrogate.lr}};
    return j.dump();
}

void save_gan(const GeneratorF& gen, const DiscriminatorF& disc, const fs::path& dir,
              const std::string& config_json) {
    {
        Container c;
        c.metadata["kind"] = "generator";
        c.metadata["z_dim"] = std::to_string(gen.z_dim);
        c.metadata["cond_dim"] = std::to_string(gen.cond_dim);
        c.metadata["img_size"] = std::to_string(gen.img_size);
        c.metadata["f0"] = std::to_string(gen.f0);
        if (!config_json.empty()) c.metadata["config"] = config_json;
        c.add("fc_w", gen.fc_w.value);
        c.add("fc_b", gen.fc_b.value);
        save_bn(c, "bn0", gen.bn0);
        for (size_t i = 0; i < gen.stages.size(); ++i) {
            const std::string p = "stage" + std::to_string(i);
            c.add(p + "_w", gen.stages[i].w.value);
            c.add(p + "_b", gen.stages[i].b.value);
            save_bn(c, p + "_bn", gen.stages[i].bn);
        }
        c.add("head_w", gen.head_w.value);
        c.add("head_b", gen.head_b.value);
        save_container_atomic(c, (dir / "generator").string());
    }
    {
        Container c;
        c.metadata["kind"] = "discriminator";
        c.metadata["img_size"] = std::to_string(disc.img_size);
        c.metadata["cond_dim"] = std::to_string(disc.cond_dim);
        c.metadata["c1"] = std::to_string(disc.c1);
        if (!config_json.empty()) c.metadata["config"] = config_json;
        for (size_t i = 0; i < disc.pre.size(); ++i) {
            const std::string p = "pre" + std::to_string(i);
            c.add(p + "_w", disc.pre[i].w.value);
            c.add(p + "_b", disc.pre[i].b.value);
            if (disc.pre[i].has_bn) save_bn(c, p + "_bn", disc.pre[i].bn);
        }
        c.add("cond_w", disc.cond_w.value);
        c.add("cond_b", disc.cond_b.value);
        for (size_t i = 0; i < disc.post.size(); ++i) {
            const std::string p = "post" + std::to_string(i);
            c.add(p + "_w", disc.post[i].w.value);
            c.add(p + "_b", disc.post[i].b.value);
            if (disc.post[i].has_bn) save_bn(c, p + "_bn", disc.post[i].bn);
        }
        c.add("head_w", disc.head_w.value);
        c.add("head_b", disc.head_b.value);
        save_container_atomic(c, (dir / "discriminator").string());
    }
}

std::pair<GeneratorF, DiscriminatorF> load_gan(const fs::path& dir) {
    GeneratorF gen;
    {
        const Container c = load_container((dir / "generator").string());
        auto kind = c.metadata.find("kind");
        require(kind != c.metadata.end() && kind->second == "generator", Status::format,
                "checkpoint: not a generator container");
        Rng dummy(0);
        gen.init(dummy, meta_int(c, "z_dim"), meta_int(c, "cond_dim"), meta_int(c, "img_size"),
                 meta_int(c, "f0"));
        load_param(c, "fc_w", gen.fc_w);
        load_param(c, "fc_b", gen.fc_b);
        load_bn(c, "bn0", gen.bn0, gen.f0);
        for (size_t i = 0; i < gen.stages.size(); ++i) {
            const std::string p = "stage" + std::to_string(i);
            load_param(c, p + "_w", gen.stages[i].w);
            load_param(c, p + "_b", gen.stages[i].b);
            load_bn(c, p + "_bn", gen.stages[i].bn, gen.stages[i].cout);
        }
        load_param(c, "head_w", gen.head_w);
        load_param(c, "head_b", gen.head_b);
    }
    DiscriminatorF disc;
    {
        const Container c = load_container((dir / "discriminator").string());
        auto kind = c.metadata.find("kind");
        require(kind != c.metadata.end() && kind->second == "discriminator", Status::format,
                "checkpoint: not a discriminator container");
        Rng dummy(0);
        disc.init(dummy, meta_int(c, "img_size"), meta_int(c, "cond_dim"),
                  meta_int(c, "c1"));
        for (size_t i = 0; i < disc.pre.size(); ++i) {
            const std::string p = "pre" + std::to_string(i);
            load_param(c, p + "_w", disc.pre[i].w);
            load_param(c, p + "_b", disc.pre[i].b);
            if (disc.pre[i].has_bn) load_bn(c, p + "_bn", disc.pre[i].bn, disc.pre[i].cout);
        }
        load_param(c, "cond_w", disc.cond_w);
        load_param(c, "cond_b", disc.cond_b);
        for (size_t i = 0; i < disc.post.size(); ++i) {
            const std::string p = "post" + std::to_string(i);
            load_param(c, p + "_w", disc.post[i].w);
            load_param(c, p + "_b", disc.post[i].b);
            if (disc.post[i].has_bn) load_bn(c, p + "_bn", disc.post[i].bn, disc.post[i].cout);
        }
        load_param(c, "head_w", disc.head_w);
        load_param(c, "head_b", disc.head_b);
    }
    return {std::move(gen), std::move(disc)};
}

namespace {

// Held-out conditioning pool; falls back to the train split when the dataset
// has no test EEG.
void eval_pool(const PairedDataset& ds, const EncoderF& encoder, TensorF& psi,
               std::vector<int>& labels) {
    const std::vector<int>& split = ds.eeg_test.empty() ? ds.eeg_train : ds.eeg_test;
    require(!split.empty(), Status::config, "evaluate: dataset has no EEG samples");
    std::vector<int64_t> idx(split.begin(), split.end());
    psi = embed_all(encoder, stack_eeg(ds, idx));
    labels.clear();
    for (int i : split) labels.push_back(ds.eeg[static_cast<size_t>(i)].label);
}

}  // namespace

std::string eval_report_json(const EvalReport& r) {
    nlohmann::json j;
    j["is_mean"] = r.gan.is_mean;
    j["is_std"] = r.gan.is_std;
    j["kmeans_acc"] = r.kmeans_acc;
    j["class_consistency"] = r.gan.consistency;
    j["diversity"] = r.gan.diversity;
    j["classifier_acc"] = r.classifier_acc;
    return j.dump(2) + "\n";
}

EvalReport evaluate_full(const PairedDataset& ds, const EncoderF& encoder, GeneratorF& gen,
                         const GanConfig& cfg, uint64_t seed, const fs::path* out_dir) {
    TensorF psi;
    std::vector<int> labels;
    eval_pool(ds, encoder, psi, labels);

    ClassifierTrainConfig scfg = cfg.surrogate;
    scfg.seed = derive_seed(seed, "eval-clf");
    ClassifierF clf = train_surrogate_classifier(ds, scfg);

    EvalReport rep;
    TensorF images;
    std::vector<int> img_labels;
    rep.gan = evaluate_gan(gen, clf, psi, labels, ds.num_classes, cfg.eval_per_class,
                           cfg.is_splits, derive_seed(seed, "eval-gan"), &images, &img_labels,
                           &rep.per_class_is_mean, &rep.per_class_is_std);
    rep.kmeans_acc = kmeans_accuracy(psi, labels, ds.num_classes, 10,
                                     derive_seed(seed, "eval-km"));
    const std::vector<int>& img_split = ds.image_test.empty() ? ds.image_train : ds.image_test;
    std::vector<int64_t> img_idx(img_split.begin(), img_split.end());
    std::vector<int> real_labels;
    for (int i : img_split) real_labels.push_back(ds.images[static_cast<size_t>(i)].label);
    rep.classifier_acc =
        classifier_accuracy(clf, images_to_nchw(ds, img_idx), real_labels);

    if (out_dir) {
        fs::create_directories(*out_dir);
        {
            std::ofstream out(*out_dir / "report.json");
            require(out.good(), Status::io, "evaluate: cannot write report.json");
            out << eval_report_json(rep);
        }
        export_embedding_2d(psi, labels, *out_dir / "embeddings_2d.csv");
        {
            std::ofstream out(*out_dir / "per_class_is.csv");
            require(out.good(), Status::io, "evaluate: cannot write per_class_is.csv");
            out << "class,is_mean,is_std\n";
            for (size_t k = 0; k < rep.per_class_is_mean.size(); ++k)
                out << k << ',' << fmt(rep.per_class_is_mean[k]) << ','
                    << fmt(rep.per_class_is_std[k]) << '\n';
        }
        save_class_grid(images, img_labels, ds.num_classes, *out_dir / "samples.png");
    }
    return rep;
}

void generate_sheet(const PairedDataset& ds, const EncoderF& encoder, GeneratorF& gen,
                    int per_class, uint64_t seed, const fs::path& png_path) {
    require(per_class >= 1, Status::config, "generate: per_class must be >= 1");
    TensorF psi;
    std::vector<int> labels;
    eval_pool(ds, encoder, psi, labels);
    std::vector<std::vector<int>> by_class(static_cast<size_t>(ds.num_classes));
    for (size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));
    for (int k = 0; k < ds.num_classes; ++k)
        require(!by_class[static_cast<size_t>(k)].empty(), Status::config,
                "generate: no EEG of class " + std::to_string(k) + " to condition on");
    const int64_t n = static_cast<int64_t>(ds.num_classes) * per_class;
    std::vector<int> rows(static_cast<size_t>(n));
    std::vector<int> out_labels(static_cast<size_t>(n));
    for (int k = 0; k < ds.num_classes; ++k) {
        const auto& pool = by_class[static_cast<size_t>(k)];
        for (int j = 0; j < per_class; ++j) {
            rows[static_cast<size_t>(k * per_class + j)] = pool[j % pool.size()];
            out_labels[static_cast<size_t>(k * per_class + j)] = k;
        }
    }
    Rng rng(derive_seed(seed, "generate-z"));
    const TensorF z = draw_normal(rng, n, gen.z_dim);
    const TensorF images = generate(gen, z, gather_rows(psi, rows));
    if (png_path.has_parent_path()) fs::create_directories(png_path.parent_path());
    save_class_grid(images, out_labels, ds.num_classes, png_path);
}

GanTrainResult train_gan(const PairedDataset& ds, const EncoderF& encoder,
                         const GanConfig& cfg, const fs::path& out_dir, GeneratorF& gen,
                         DiscriminatorF& disc, StepTrace* trace) {
    require(cfg.steps >= 0, Status::config, "gan: steps must be >= 0");
    require(cfg.batch >= 2, Status::config, "gan: batch must be >= 2");
    require(cfg.lr > 0.0, Status::config, "gan: lr must be positive");
    require(cfg.alpha >= 0.0, Status::config, "gan: alpha must be >= 0");
    require(cfg.ms_eps > 0.0, Status::config, "gan: ms_eps must be positive");
    require(cfg.d_steps_per_g_step >= 1, Status::config,
            "gan: d_steps_per_g_step must be >= 1");
    require(cfg.log_every >= 1, Status::config, "gan: log_every must be >= 1");
    require(cfg.z_dim >= 1, Status::config, "gan: z_dim must be >= 1");
    require(cfg.image_size == ds.image_size, Status::config,
            "gan: image size " + std::to_string(cfg.image_size) +
                " does not match dataset image size " + std::to_string(ds.image_size));
    require(!ds.eeg_train.empty() && !ds.image_train.empty(), Status::config,
            "gan: empty train split");
    if (trace) {
        require(cfg.d_steps_per_g_step == 1, Status::config,
                "gan: step trace requires d_steps_per_g_step == 1");
        trace->filled = false;
    }

    Rng ginit(derive_seed(cfg.seed, "gan-g-init"));
    gen.init(ginit, cfg.z_dim, encoder.out_dim, cfg.image_size, cfg.g_base_channels);
    Rng dinit(derive_seed(cfg.seed, "gan-d-init"));
    disc.init(dinit, cfg.image_size, encoder.out_dim, cfg.d_base_channels);

    // Conditioning embeddings are frozen for the whole run.
    std::vector<int64_t> tr_eeg(ds.eeg_train.begin(), ds.eeg_train.end());
    const TensorF psi_train = embed_all(encoder, stack_eeg(ds, tr_eeg));
    const int64_t n_tr = psi_train.dim(0);
    std::vector<std::vector<int>> eeg_rows_by_class(static_cast<size_t>(ds.num_classes));
    for (int64_t r = 0; r < n_tr; ++r) {
        const int lab = ds.eeg[static_cast<size_t>(ds.eeg_train[static_cast<size_t>(r)])].label;
        eeg_rows_by_class[static_cast<size_t>(lab)].push_back(static_cast<int>(r));
    }
    for (int idx : ds.image_train) {
        const int lab = ds.images[static_cast<size_t>(idx)].label;
        require(!eeg_rows_by_class[static_cast<size_t>(lab)].empty(), Status::invalid_data,
                "gan: no train EEG of class " + std::to_string(lab) +
                    " to condition images on");
    }

    // Held-out embeddings drive the periodic evaluation; fall back to the
    // train pool when the dataset has no test split.
    std::vector<int64_t> te_eeg(ds.eeg_test.begin(), ds.eeg_test.end());
    const bool have_test = !te_eeg.empty();
    const TensorF psi_eval = have_test ? embed_all(encoder, stack_eeg(ds, te_eeg)) : psi_train;
    std::vector<int> eval_labels;
    for (int idx : have_test ? ds.eeg_test : ds.eeg_train)
        eval_labels.push_back(ds.eeg[static_cast<size_t>(idx)].label);

    ClassifierTrainConfig scfg = cfg.surrogate;
    scfg.seed = derive_seed(cfg.seed, "gan-clf");
    ClassifierF clf = train_surrogate_classifier(ds, scfg);

    nn::Adam<float> opt_g, opt_d;
    opt_g.lr = opt_d.lr = cfg.lr;
    opt_g.beta1 = opt_d.beta1 = cfg.beta1;
    opt_g.beta2 = opt_d.beta2 = cfg.beta2;
    const AugmentPolicy* pol = cfg.use_aug ? &cfg.policy : nullptr;

    fs::create_directories(out_dir);
    std::ofstream log(out_dir / "gan_log.csv");
    require(log.good(), Status::io, "gan: cannot write log in " + out_dir.string());
    log << "step,d_loss,g_loss,ms_loss,is_mean,is_std,class_consistency,diversity\n";

    GanTrainResult result;
    const int64_t b = cfg.batch;
    for (int s = 0; s < cfg.steps; ++s) {
        Rng rng(derive_seed(cfg.seed, "gan-step", static_cast<uint64_t>(s)));
        if (trace && s == 0) {
            trace->g0 = gen;
            trace->d0 = disc;
        }

        double d_loss = 0.0;
        TensorF real, psi_real, psi_fake, z_d;
        DLossResult dres;
        for (int di = 0; di < cfg.d_steps_per_g_step; ++di) {
            std::vector<int64_t> img_idx(static_cast<size_t>(b));
            for (auto& v : img_idx)
                v = ds.image_train[static_cast<size_t>(
                    rng.uniform_int(static_cast<int64_t>(ds.image_train.size())))];
            real = images_to_nchw(ds, img_idx);
            std::vector<int> real_rows(static_cast<size_t>(b));
            for (int64_t i = 0; i < b; ++i) {
                const auto& pool = eeg_rows_by_class[static_cast<size_t>(
                    ds.images[static_cast<size_t>(img_idx[static_cast<size_t>(i)])].label)];
                real_rows[static_cast<size_t>(i)] =
                    pool[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(pool.size())))];
            }
            psi_real = gather_rows(psi_train, real_rows);
            std::vector<int> fake_rows(static_cast<size_t>(b));
            for (auto& v : fake_rows) v = static_cast<int>(rng.uniform_int(n_tr));
            psi_fake = gather_rows(psi_train, fake_rows);
            z_d = draw_normal(rng, b, cfg.z_dim);

            GeneratorF::Cache gc;
            const TensorF fake = gen.forward(z_d, psi_fake, true, gc);
            nn::zero_grads(disc.params());
            dres = d_loss_hinge(disc, real, fake, psi_real, psi_fake, pol, &rng);
            d_loss = dres.loss;
            check_finite(d_loss, s, "discriminator loss");
            opt_d.step(disc.params());
        }
        if (trace && s == 0) trace->d1 = disc;

        std::vector<int> g_rows(static_cast<size_t>(b));
        for (auto& v : g_rows) v = static_cast<int>(rng.uniform_int(n_tr));
        const TensorF psi_g = gather_rows(psi_train, g_rows);
        const TensorF z1 = draw_normal(rng, b, cfg.z_dim);
        TensorF z2 = draw_normal(rng, b, cfg.z_dim);
        for (int64_t i = 0; i < b; ++i) {
            bool same = true;
            for (int64_t j = 0; j < cfg.z_dim && same; ++j)
                same = z1.data[static_cast<size_t>(i * cfg.z_dim + j)] ==
                       z2.data[static_cast<size_t>(i * cfg.z_dim + j)];
            while (same) {
                same = true;
                for (int64_t j = 0; j < cfg.z_dim; ++j) {
                    const float v = static_cast<float>(rng.normal());
                    z2.data[static_cast<size_t>(i * cfg.z_dim + j)] = v;
                    same = same && v == z1.data[static_cast<size_t>(i * cfg.z_dim + j)];
                }
            }
        }

        nn::zero_grads(gen.params());
        GeneratorF::Cache c1;
        const TensorF fake1 = gen.forward(z1, psi_g, true, c1);
        TensorF gfake1;
        AugParams aug_g;
        const double g_adv = g_loss_hinge(disc, fake1, psi_g, pol, &rng, &gfake1, &aug_g);
        check_finite(g_adv, s, "generator adversarial loss");
        double ms = 0.0;
        if (cfg.use_ms) {
            GeneratorF::Cache c2;
            const TensorF fake2 = gen.forward(z2, psi_g, true, c2);
            TensorF gm1, gm2;
            ms = mode_seeking_from_images(fake1, fake2, z1, z2, cfg.ms_eps, &gm1, &gm2);
            check_finite(ms, s, "mode-seeking term");
            for (size_t i = 0; i < gfake1.data.size(); ++i)
                gfake1.data[i] += static_cast<float>(cfg.alpha) * gm1.data[i];
            for (auto& v : gm2.data) v *= static_cast<float>(cfg.alpha);
            gen.backward(c1, gfake1);
            gen.backward(c2, gm2);
        } else {
            gen.backward(c1, gfake1);
        }
        opt_g.step(gen.params());

        if (trace && s == 0) {
            trace->real = real;
            trace->psi_real = psi_real;
            trace->psi_fake = psi_fake;
            trace->psi_g = psi_g;
            trace->z_d = z_d;
            trace->z_g1 = z1;
            trace->z_g2 = z2;
            trace->aug_real = dres.real_params;
            trace->aug_fake = dres.fake_params;
            trace->aug_g = aug_g;
            trace->d_loss = d_loss;
            trace->g_adv = g_adv;
            trace->ms = ms;
            trace->filled = true;
        }

        result.d_loss = d_loss;
        result.g_loss = g_adv;
        result.ms_loss = ms;
        result.steps_run = s + 1;

        const bool last = s + 1 == cfg.steps;
        const bool want_log = (s + 1) % cfg.log_every == 0 || last;
        const bool want_sample = cfg.sample_every > 0 && ((s + 1) % cfg.sample_every == 0 || last);
        if (want_log || want_sample) {
            TensorF imgs;
            std::vector<int> labs;
            const GanEval ev = evaluate_gan(
                gen, clf, psi_eval, eval_labels, ds.num_classes, cfg.eval_per_class,
                cfg.is_splits, derive_seed(cfg.seed, "gan-eval", static_cast<uint64_t>(s)),
                want_sample ? &imgs : nullptr, want_sample ? &labs : nullptr);
            if (want_log) {
                result.last_eval = ev;
                log << s + 1 << ',' << fmt(d_loss) << ',' << fmt(g_adv) << ',' << fmt(ms)
                    << ',' << fmt(ev.is_mean) << ',' << fmt(ev.is_std) << ','
                    << fmt(ev.consistency) << ',' << fmt(ev.diversity) << '\n';
                log.flush();
            }
            if (want_sample) {
                char name[32];
                std::snprintf(name, sizeof(name), "samples_%06d.png", s + 1);
                fs::create_directories(out_dir / "samples");
                save_class_grid(imgs, labs, ds.num_classes, out_dir / "samples" / name);
            }
        }
        if (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0 && !last) {
            save_gan(gen, disc, out_dir / "gan_ckpt", gan_config_json(cfg));
        }
    }

    save_gan(gen, disc, out_dir / "gan_ckpt", gan_config_json(cfg));
    return result;
}

}  // namespace e2i
