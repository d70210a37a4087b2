#ifndef E2I_CORE_DATAIO_HPP
#define E2I_CORE_DATAIO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace e2i::dataio {

// One EEG window: channels x timesteps, volts after normalization.
struct EEGSample {
    TensorF signal;  // [C, T]
    int label = 0;
    int subject = 0;
};

// H x W x 3, values in [-1, 1] (tanh range; converted to 8-bit only at PNG export).
struct ImageSample {
    TensorF image;  // [H, W, 3]
    int label = 0;
};

struct PairedDataset {
    int num_classes = 0;
    int channels = 0;
    int timesteps = 0;
    int image_size = 0;
    std::vector<EEGSample> eeg;
    std::vector<ImageSample> images;
    std::vector<int> eeg_train, eeg_test;      // disjoint index sets into eeg
    std::vector<int> image_train, image_test;  // disjoint index sets into images
    std::map<std::string, std::string> metadata;

    std::vector<int> eeg_of_class(const std::vector<int>& split, int label) const;
    std::vector<int> images_of_class(const std::vector<int>& split, int label) const;
};

struct SynthSpec {
    int classes = 10;
    int per_class = 23;
    int channels = 14;
    int timesteps = 32;
    int image_size = 32;
    uint64_t seed = 0;
};

// Per-channel z-score with population sigma; constant channels map to zeros.
EEGSample normalize_eeg(const EEGSample& sample);
PairedDataset normalize_all(const PairedDataset& ds);

// Deterministic class-conditional sinusoid EEG paired with solid-color shape
// images; pure function of the spec (identical spec -> bit-identical dataset).
PairedDataset synthesize_dataset(const SynthSpec& spec);

void save_dataset(const PairedDataset& ds, const std::string& root);
PairedDataset load_dataset(const std::string& root);

// Enforces the shared invariants (label ranges, finiteness, image range,
// split coverage); load_dataset calls this before returning.
void validate_dataset(const PairedDataset& ds);

// Maps [-1,1] to 8-bit via round((v+1)*127.5), clamped.
uint8_t pixel_to_u8(float v);

// PNG grid, row-major placement, 2px gutter. Images are HWC in [-1,1].
void save_image_grid(const std::string& path, const std::vector<const TensorF*>& images,
                     int rows, int cols);

}  // namespace e2i::dataio

namespace e2i {
// The paired dataset is the currency of every training entry point; export it
// (and its row types) so the rest of the library can name them without the
// sub-namespace.
using dataio::EEGSample;
using dataio::ImageSample;
using dataio::PairedDataset;
}  // namespace e2i

#endif
