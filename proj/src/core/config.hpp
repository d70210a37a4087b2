#ifndef E2I_CORE_CONFIG_HPP
#define E2I_CORE_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "cgan.hpp"
#include "dataio.hpp"
#include "encoder.hpp"

namespace e2i {

// One JSON document that drives every command. Unknown keys are rejected so a
// typo never silently falls back to a default.
struct RunConfig {
    std::optional<std::string> dataset_path;  // load from disk when set ...
    dataio::SynthSpec synth{};                // ... otherwise synthesize
    EncoderTrainConfig encoder{};
    GanConfig gan{};
    uint64_t seed = 0;
    std::string out_dir = "out";
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_json(const RunConfig& cfg);

// Strict single-section parsers ("{}" keeps every default). These back the
// section-JSON arguments of the shared-library interface.
dataio::SynthSpec parse_synth_config(const std::string& json_text);
EncoderTrainConfig parse_encoder_config(const std::string& json_text);
GanConfig parse_gan_config(const std::string& json_text);

// Applies the shared seed to the per-stage configs (each stage then derives
// its own substreams) and echoes the resolved file next to the outputs.
void resolve_seeds(RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace e2i

#endif
