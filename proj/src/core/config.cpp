#include "config.hpp"

#include <fstream>
#include <set>

#include "../../vendor/json.hpp"

namespace e2i {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    fail(Status::config, "config: " + path + ": " + what);
}

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
}

// Strict field extraction: every getter marks its key as consumed and the
// section check rejects whatever is left over.
struct Section {
    const json& j;
    std::string path;
    std::set<std::string> seen;

    Section(const json& j_, std::string path_) : j(j_), path(std::move(path_)) {
        expect_object(j, path);
    }

    const json* peek(const std::string& key) {
        seen.insert(key);
        auto it = j.find(key);
        return it == j.end() ? nullptr : &*it;
    }

    template <class T>
    void get(const std::string& key, T& out) {
        const json* v = peek(key);
        if (!v) return;
        try {
            out = v->get<T>();
        } catch (const json::exception&) {
            bad(path + "." + key, "wrong type");
        }
    }

    void get_uint64(const std::string& key, uint64_t& out) {
        const json* v = peek(key);
        if (!v) return;
        // is_number_integer() is also true for unsigned values, so test
        // unsigned first: seeds routinely exceed int64 range.
        if (v->is_number_unsigned()) {
            out = v->get<uint64_t>();
            return;
        }
        if (!v->is_number_integer() || v->get<int64_t>() < 0)
            bad(path + "." + key, "expected a non-negative integer");
        out = v->get<uint64_t>();
    }

    void finish() const {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!seen.count(it.key())) bad(path + "." + it.key(), "unknown key");
        }
    }
};

void parse_synth(const json& j, dataio::SynthSpec& s) {
    Section sec(j, "synth");
    sec.get("classes", s.classes);
    sec.get("per_class", s.per_class);
    sec.get("channels", s.channels);
    sec.get("timesteps", s.timesteps);
    sec.get("image_size", s.image_size);
    sec.get_uint64("seed", s.seed);
    sec.finish();
}

void parse_encoder(const json& j, EncoderTrainConfig& e) {
    Section sec(j, "encoder");
    sec.get("regime", e.regime);
    sec.get("epochs", e.epochs);
    sec.get("batch_classes", e.batch_classes);
    sec.get("batch_per_class", e.batch_per_class);
    sec.get("lr", e.lr);
    sec.get("beta1", e.beta1);
    sec.get("beta2", e.beta2);
    sec.get("margin", e.margin);
    if (const json* v = sec.peek("mining")) {
        if (!v->is_string()) bad("encoder.mining", "expected a string");
        e.mining = parse_mining(v->get<std::string>());
    }
    sec.get("hidden", e.hidden);
    sec.get("out_dim", e.out_dim);
    sec.get("normalize", e.normalize);
    sec.get("grad_clip", e.grad_clip);
    sec.get("kmeans_restarts", e.kmeans_restarts);
    sec.get_uint64("seed", e.seed);
    sec.finish();
}

void parse_policy(const json& j, AugmentPolicy& p) {
    Section sec(j, "gan.augment");
    sec.get("brightness", p.brightness);
    sec.get("saturation", p.saturation);
    sec.get("contrast", p.contrast);
    sec.get("translation", p.translation);
    sec.get("brightness_range", p.brightness_range);
    sec.get("saturation_min", p.saturation_min);
    sec.get("saturation_max", p.saturation_max);
    sec.get("contrast_min", p.contrast_min);
    sec.get("contrast_max", p.contrast_max);
    sec.get("translation_ratio", p.translation_ratio);
    sec.finish();
}

void parse_gan(const json& j, GanConfig& g) {
    Section sec(j, "gan");
    sec.get("steps", g.steps);
    sec.get("batch", g.batch);
    sec.get("lr", g.lr);
    sec.get("beta1", g.beta1);
    sec.get("beta2", g.beta2);
    sec.get("alpha", g.alpha);
    sec.get("use_ms", g.use_ms);
    sec.get("use_aug", g.use_aug);
    sec.get("ms_eps", g.ms_eps);
    sec.get("d_steps_per_g_step", g.d_steps_per_g_step);
    sec.get("image_size", g.image_size);
    sec.get("z_dim", g.z_dim);
    sec.get("g_base_channels", g.g_base_channels);
    sec.get("d_base_channels", g.d_base_channels);
    sec.get("log_every", g.log_every);
    sec.get("sample_every", g.sample_every);
    sec.get("checkpoint_every", g.checkpoint_every);
    sec.get("eval_per_class", g.eval_per_class);
    sec.get("is_splits", g.is_splits);
    sec.get_uint64("seed", g.seed);
    if (const json* v = sec.peek("augment")) parse_policy(*v, g.policy);
    if (const json* v = sec.peek("surrogate")) {
        Section ssec(*v, "gan.surrogate");
        ssec.get("epochs", g.surrogate.epochs);
        ssec.get("batch", g.surrogate.batch);
        ssec.get("lr", g.surrogate.lr);
        ssec.finish();
    }
    sec.finish();
}

json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(Status::config, std::string("config: invalid JSON: ") + e.what());
    }
}

}  // namespace

dataio::SynthSpec parse_synth_config(const std::string& json_text) {
    dataio::SynthSpec s;
    parse_synth(parse_text(json_text), s);
    return s;
}

EncoderTrainConfig parse_encoder_config(const std::string& json_text) {
    EncoderTrainConfig e;
    parse_encoder(parse_text(json_text), e);
    return e;
}

GanConfig parse_gan_config(const std::string& json_text) {
    GanConfig g;
    parse_gan(parse_text(json_text), g);
    return g;
}

RunConfig parse_run_config(const std::string& json_text) {
    const json j = parse_text(json_text);
    RunConfig cfg;
    Section sec(j, "(root)");
    if (const json* v = sec.peek("dataset")) {
        if (!v->is_string()) bad("dataset", "expected a path string");
        cfg.dataset_path = v->get<std::string>();
    }
    if (const json* v = sec.peek("synth")) parse_synth(*v, cfg.synth);
    if (const json* v = sec.peek("encoder")) parse_encoder(*v, cfg.encoder);
    if (const json* v = sec.peek("gan")) parse_gan(*v, cfg.gan);
    sec.get_uint64("seed", cfg.seed);
    sec.get("out", cfg.out_dir);
    sec.finish();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), Status::io, "config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string run_config_json(const RunConfig& cfg) {
    json j;
    if (cfg.dataset_path) j["dataset"] = *cfg.dataset_path;
    j["synth"] = {{"classes", cfg.synth.classes},       {"per_class", cfg.synth.per_class},
                  {"channels", cfg.synth.channels},     {"timesteps", cfg.synth.timesteps},
                  {"image_size", cfg.synth.image_size}, {"seed", cfg.synth.seed}};
    j["encoder"] = json::parse(encoder_config_json(cfg.encoder));
    j["gan"] = json::parse(gan_config_json(cfg.gan));
    // gan_config_json flattens the augment policy under "policy"
    json& g = j["gan"];
    g["augment"] = g["policy"];
    g.erase("policy");
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    return j.dump(2) + "\n";
}

void resolve_seeds(RunConfig& cfg) {
    if (cfg.synth.seed == 0) cfg.synth.seed = derive_seed(cfg.seed, "data");
    if (cfg.encoder.seed == 0) cfg.encoder.seed = derive_seed(cfg.seed, "encoder");
    if (cfg.gan.seed == 0) cfg.gan.seed = derive_seed(cfg.seed, "gan");
}

void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / "config_resolved.json";
    std::ofstream out(path);
    require(out.good(), Status::io, "config: cannot write " + path.string());
    out << run_config_json(cfg);
    require(out.good(), Status::io, "config: write failed for " + path.string());
}

}  // namespace e2i
