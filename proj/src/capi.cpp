#include "eeg2image.h"

#include <cstring>
#include <string>

#include "core/cgan.hpp"
#include "core/config.hpp"
#include "core/dataio.hpp"
#include "core/encoder.hpp"

using namespace e2i;

struct e2i_dataset {
    dataio::PairedDataset ds;
};
struct e2i_encoder {
    EncoderF model;
};
struct e2i_gan {
    GeneratorF gen;
    DiscriminatorF disc;
    GanConfig cfg;  // echo from training; defaults after load
};

namespace {

thread_local std::string g_last_error;

e2i_status to_status(Status s) {
    switch (s) {
        case Status::ok: return E2I_OK;
        case Status::usage: return E2I_E_USAGE;
        case Status::format: return E2I_E_FORMAT;
        case Status::integrity: return E2I_E_INTEGRITY;
        case Status::unsupported: return E2I_E_UNSUPPORTED;
        case Status::invalid_data: return E2I_E_INVALID_DATA;
        case Status::config: return E2I_E_CONFIG;
        case Status::training: return E2I_E_TRAINING;
        case Status::io: return E2I_E_IO;
        case Status::shape: return E2I_E_SHAPE;
        case Status::mining: return E2I_E_MINING;
        case Status::degenerate: return E2I_E_DEGENERATE;
        case Status::internal: return E2I_E_INTERNAL;
    }
    return E2I_E_INTERNAL;
}

// Runs the body, translating exceptions into status codes + the thread-local
// message. All public entry points go through here.
template <class F>
e2i_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return E2I_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.status());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return E2I_E_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return E2I_E_INTERNAL;
    }
}

void need(bool cond, const char* what) { require(cond, Status::usage, what); }

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* e2i_last_error(void) { return g_last_error.c_str(); }

const char* e2i_version(void) { return "1.0.0"; }

void e2i_string_free(char* s) { delete[] s; }

uint64_t e2i_derive_seed(uint64_t master, const char* name) {
    return derive_seed(master, name ? name : "");
}

e2i_status e2i_run_config_normalize(const char* json_text, uint64_t seed_override,
                                    int has_seed_override, const char* out_override,
                                    char** resolved_json) {
    return guarded([&] {
        need(json_text && resolved_json, "e2i_run_config_normalize: NULL argument");
        RunConfig cfg = parse_run_config(json_text);
        if (has_seed_override) cfg.seed = seed_override;
        if (out_override) cfg.out_dir = out_override;
        resolve_seeds(cfg);
        *resolved_json = dup_string(run_config_json(cfg));
    });
}

/* ------------------------------------------------------------------ data */

e2i_status e2i_dataset_synth(int classes, int per_class, int channels, int timesteps,
                             int image_size, uint64_t seed, e2i_dataset** out) {
    return guarded([&] {
        need(out != nullptr, "e2i_dataset_synth: NULL output");
        dataio::SynthSpec spec;
        spec.classes = classes;
        spec.per_class = per_class;
        spec.channels = channels;
        spec.timesteps = timesteps;
        spec.image_size = image_size;
        spec.seed = seed;
        auto* h = new e2i_dataset{dataio::synthesize_dataset(spec)};
        *out = h;
    });
}

e2i_status e2i_dataset_load(const char* dir, e2i_dataset** out) {
    return guarded([&] {
        need(dir && out, "e2i_dataset_load: NULL argument");
        *out = new e2i_dataset{dataio::load_dataset(dir)};
    });
}

e2i_status e2i_dataset_save(const e2i_dataset* ds, const char* dir) {
    return guarded([&] {
        need(ds && dir, "e2i_dataset_save: NULL argument");
        dataio::save_dataset(ds->ds, dir);
    });
}

e2i_status e2i_dataset_info(const e2i_dataset* ds, int* classes, int* eeg_count,
                            int* image_count, int* channels, int* timesteps,
                            int* image_size) {
    return guarded([&] {
        need(ds != nullptr, "e2i_dataset_info: NULL dataset");
        if (classes) *classes = ds->ds.num_classes;
        if (eeg_count) *eeg_count = static_cast<int>(ds->ds.eeg.size());
        if (image_count) *image_count = static_cast<int>(ds->ds.images.size());
        if (channels) *channels = ds->ds.channels;
        if (timesteps) *timesteps = ds->ds.timesteps;
        if (image_size) *image_size = ds->ds.image_size;
    });
}

void e2i_dataset_free(e2i_dataset* ds) { delete ds; }

/* --------------------------------------------------------------- encoder */

e2i_status e2i_encoder_train(const e2i_dataset* ds, const char* config_json,
                             const char* out_dir, e2i_encoder** out) {
    return guarded([&] {
        need(ds && out_dir && out, "e2i_encoder_train: NULL argument");
        const EncoderTrainConfig cfg = parse_encoder_config(config_json ? config_json : "{}");
        auto h = std::make_unique<e2i_encoder>();
        train_encoder(ds->ds, cfg, out_dir, h->model);
        *out = h.release();
    });
}

e2i_status e2i_encoder_load(const char* ckpt_dir, e2i_encoder** out) {
    return guarded([&] {
        need(ckpt_dir && out, "e2i_encoder_load: NULL argument");
        *out = new e2i_encoder{load_encoder(ckpt_dir)};
    });
}

e2i_status e2i_encoder_save(const e2i_encoder* enc, const char* ckpt_dir) {
    return guarded([&] {
        need(enc && ckpt_dir, "e2i_encoder_save: NULL argument");
        save_encoder(enc->model, ckpt_dir);
    });
}

e2i_status e2i_encoder_embed(const e2i_encoder* enc, const float* eeg, int count,
                             int channels, int timesteps, float* out) {
    return guarded([&] {
        need(enc && eeg && out, "e2i_encoder_embed: NULL argument");
        need(count > 0, "e2i_encoder_embed: count must be positive");
        TensorF x({count, channels, timesteps});
        std::memcpy(x.ptr(), eeg, sizeof(float) * static_cast<size_t>(x.numel()));
        const TensorF emb = embed_all(enc->model, x);
        std::memcpy(out, emb.ptr(), sizeof(float) * static_cast<size_t>(emb.numel()));
    });
}

e2i_status e2i_encoder_out_dim(const e2i_encoder* enc, int* out_dim) {
    return guarded([&] {
        need(enc && out_dim, "e2i_encoder_out_dim: NULL argument");
        *out_dim = static_cast<int>(enc->model.out_dim);
    });
}

void e2i_encoder_free(e2i_encoder* enc) { delete enc; }

/* ------------------------------------------------------------------- gan */

e2i_status e2i_gan_train(const e2i_dataset* ds, const e2i_encoder* enc,
                         const char* config_json, const char* out_dir, e2i_gan** out) {
    return guarded([&] {
        need(ds && enc && out_dir && out, "e2i_gan_train: NULL argument");
        const GanConfig cfg = parse_gan_config(config_json ? config_json : "{}");
        auto h = std::make_unique<e2i_gan>();
        h->cfg = cfg;
        train_gan(ds->ds, enc->model, cfg, out_dir, h->gen, h->disc);
        *out = h.release();
    });
}

e2i_status e2i_gan_load(const char* ckpt_dir, e2i_gan** out) {
    return guarded([&] {
        need(ckpt_dir && out, "e2i_gan_load: NULL argument");
        auto h = std::make_unique<e2i_gan>();
        auto pair = load_gan(ckpt_dir);
        h->gen = std::move(pair.first);
        h->disc = std::move(pair.second);
        *out = h.release();
    });
}

e2i_status e2i_gan_save(const e2i_gan* gan, const char* ckpt_dir) {
    return guarded([&] {
        need(gan && ckpt_dir, "e2i_gan_save: NULL argument");
        save_gan(gan->gen, gan->disc, ckpt_dir);
    });
}

e2i_status e2i_gan_generate(const e2i_gan* gan, const float* cond, int count, int cond_dim,
                            uint64_t seed, float* out) {
    return guarded([&] {
        need(gan && cond && out, "e2i_gan_generate: NULL argument");
        need(count > 0, "e2i_gan_generate: count must be positive");
        auto& g = const_cast<e2i_gan*>(gan)->gen;  // eval forward only reads params
        require(cond_dim == g.cond_dim, Status::shape,
                "e2i_gan_generate: cond_dim " + std::to_string(cond_dim) + " != " +
                    std::to_string(g.cond_dim));
        TensorF psi({count, cond_dim});
        std::memcpy(psi.ptr(), cond, sizeof(float) * static_cast<size_t>(psi.numel()));
        Rng rng(derive_seed(seed, "generate-z"));
        TensorF z({count, g.z_dim});
        for (auto& v : z.data) v = static_cast<float>(rng.normal());
        const TensorF images = generate(g, z, psi);
        std::memcpy(out, images.ptr(), sizeof(float) * static_cast<size_t>(images.numel()));
    });
}

e2i_status e2i_gan_image_size(const e2i_gan* gan, int* size) {
    return guarded([&] {
        need(gan && size, "e2i_gan_image_size: NULL argument");
        *size = static_cast<int>(gan->gen.img_size);
    });
}

e2i_status e2i_gan_cond_dim(const e2i_gan* gan, int* dim) {
    return guarded([&] {
        need(gan && dim, "e2i_gan_cond_dim: NULL argument");
        *dim = static_cast<int>(gan->gen.cond_dim);
    });
}

void e2i_gan_free(e2i_gan* gan) { delete gan; }

/* ------------------------------------------------------------ evaluation */

e2i_status e2i_evaluate(const e2i_dataset* ds, const e2i_encoder* enc, const e2i_gan* gan,
                        const char* config_json, const char* out_dir, uint64_t seed,
                        char** report_json) {
    return guarded([&] {
        need(ds && enc && gan, "e2i_evaluate: NULL argument");
        const GanConfig cfg = parse_gan_config(config_json ? config_json : "{}");
        std::filesystem::path dir;
        const std::filesystem::path* dirp = nullptr;
        if (out_dir) {
            dir = out_dir;
            dirp = &dir;
        }
        const EvalReport rep = evaluate_full(ds->ds, enc->model,
                                             const_cast<e2i_gan*>(gan)->gen, cfg, seed, dirp);
        if (report_json) *report_json = dup_string(eval_report_json(rep));
    });
}

e2i_status e2i_write_image_grid(const char* path, const float* images, int count, int size,
                                int rows, int cols) {
    return guarded([&] {
        need(path && images, "e2i_write_image_grid: NULL argument");
        need(count > 0 && size > 0 && rows > 0 && cols > 0,
             "e2i_write_image_grid: non-positive dimension");
        need(count <= rows * cols, "e2i_write_image_grid: grid too small");
        std::vector<TensorF> hwc;
        hwc.reserve(static_cast<size_t>(count));
        const int64_t hw = static_cast<int64_t>(size) * size;
        for (int i = 0; i < count; ++i) {
            TensorF img({size, size, 3});
            for (int64_t c = 0; c < 3; ++c)
                for (int64_t p = 0; p < hw; ++p)
                    img.data[static_cast<size_t>(p * 3 + c)] =
                        images[static_cast<size_t>((i * 3 + c) * hw + p)];
            hwc.push_back(std::move(img));
        }
        std::vector<const TensorF*> ptrs;
        ptrs.reserve(hwc.size());
        for (const auto& t : hwc) ptrs.push_back(&t);
        dataio::save_image_grid(path, ptrs, rows, cols);
    });
}

e2i_status e2i_generate_sheet(const e2i_dataset* ds, const e2i_encoder* enc,
                              const e2i_gan* gan, int per_class, uint64_t seed,
                              const char* png_path) {
    return guarded([&] {
        need(ds && enc && gan && png_path, "e2i_generate_sheet: NULL argument");
        generate_sheet(ds->ds, enc->model, const_cast<e2i_gan*>(gan)->gen, per_class, seed,
                       png_path);
    });
}

}  // extern "C"
