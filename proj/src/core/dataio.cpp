#include "dataio.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "common.hpp"
#include "container.hpp"
#include "png.hpp"
#include "rng.hpp"

namespace e2i::dataio {

std::vector<int> PairedDataset::eeg_of_class(const std::vector<int>& split, int label) const {
    std::vector<int> out;
    for (int i : split) {
        if (eeg[static_cast<size_t>(i)].label == label) out.push_back(i);
    }
    return out;
}

std::vector<int> PairedDataset::images_of_class(const std::vector<int>& split, int label) const {
    std::vector<int> out;
    for (int i : split) {
        if (images[static_cast<size_t>(i)].label == label) out.push_back(i);
    }
    return out;
}

EEGSample normalize_eeg(const EEGSample& sample) {
    const int64_t channels = sample.signal.dim(0);
    const int64_t steps = sample.signal.dim(1);
    EEGSample out;
    out.label = sample.label;
    out.subject = sample.subject;
    out.signal = TensorF({channels, steps});

    for (int64_t c = 0; c < channels; ++c) {
        const float* row = sample.signal.ptr() + c * steps;
        double mean = 0.0;
        for (int64_t t = 0; t < steps; ++t) {
            require(std::isfinite(row[t]), Status::invalid_data,
                    "EEG sample contains a non-finite value");
            mean += row[t];
        }
        mean /= static_cast<double>(steps);
        double var = 0.0;
        for (int64_t t = 0; t < steps; ++t) {
            const double d = row[t] - mean;
            var += d * d;
        }
        var /= static_cast<double>(steps);
        const double sigma = std::sqrt(var);
        float* dst = out.signal.ptr() + c * steps;
        if (sigma < 1e-12) {
            for (int64_t t = 0; t < steps; ++t) dst[t] = 0.0f;
        } else {
            for (int64_t t = 0; t < steps; ++t) {
                dst[t] = static_cast<float>((row[t] - mean) / sigma);
            }
        }
    }
    return out;
}

PairedDataset normalize_all(const PairedDataset& ds) {
    PairedDataset out = ds;
    for (auto& s : out.eeg) s = normalize_eeg(s);
    return out;
}

namespace {

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
    h = h - std::floor(h);
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c, g = x;
    } else if (hp < 2) {
        r = x, g = c;
    } else if (hp < 3) {
        g = c, b = x;
    } else if (hp < 4) {
        g = x, b = c;
    } else if (hp < 5) {
        r = x, b = c;
    } else {
        r = c, b = x;
    }
    const double m = v - c;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

ImageSample make_synth_image(int label, int index, int count, int size, int num_classes) {
    ImageSample img;
    img.label = label;
    img.image = TensorF({size, size, 3});

    // Background hues evenly spread on the circle, shape in the complementary hue.
    double bg[3], fg[3];
    hsv_to_rgb(static_cast<double>(label) / num_classes, 1.0, 1.0, bg);
    hsv_to_rgb(static_cast<double>(label) / num_classes + 0.5, 1.0, 1.0, fg);

    const double center = (size - 1) * 0.5;
    const double t = count > 1 ? static_cast<double>(index) / (count - 1) : 0.0;
    const double half = size * (0.18 + 0.12 * t);
    const bool disc = (label % 2 == 0);

    float* p = img.image.ptr();
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - center;
            const double dy = y - center;
            const bool inside = disc ? (dx * dx + dy * dy <= half * half)
                                     : (std::fabs(dx) <= half && std::fabs(dy) <= half);
            const double* src = inside ? fg : bg;
            for (int ch = 0; ch < 3; ++ch) {
                *p++ = static_cast<float>(src[ch] * 2.0 - 1.0);
            }
        }
    }
    return img;
}

}  // namespace

PairedDataset synthesize_dataset(const SynthSpec& spec) {
    require(spec.classes >= 2, Status::config, "synthesize: classes must be >= 2");
    require(spec.per_class >= 2, Status::config, "synthesize: per_class must be >= 2");
    require(spec.channels >= 1 && spec.timesteps >= 1, Status::config,
            "synthesize: channels and timesteps must be >= 1");
    require(is_power_of_two(spec.image_size), Status::config,
            "synthesize: image_size must be a power of two");

    PairedDataset ds;
    ds.num_classes = spec.classes;
    ds.channels = spec.channels;
    ds.timesteps = spec.timesteps;
    ds.image_size = spec.image_size;

    Rng noise(derive_seed(spec.seed, "synth-eeg-noise"));
    const double sigma = std::sqrt(0.1);

    for (int k = 0; k < spec.classes; ++k) {
        const double freq = 2.0 + 3.0 * k;
        for (int s = 0; s < spec.per_class; ++s) {
            EEGSample e;
            e.label = k;
            e.subject = s;
            e.signal = TensorF({spec.channels, spec.timesteps});
            float* p = e.signal.ptr();
            for (int c = 0; c < spec.channels; ++c) {
                const double phase = M_PI * c / spec.channels;
                for (int t = 0; t < spec.timesteps; ++t) {
                    const double clean =
                        std::sin(2.0 * M_PI * freq * t / spec.timesteps + phase);
                    *p++ = static_cast<float>(clean + noise.normal(0.0, sigma));
                }
            }
            const int idx = static_cast<int>(ds.eeg.size());
            ds.eeg.push_back(std::move(e));
            // One held-out sample per subject, class rotating with the subject
            // index; every class keeps at least one sample in each split.
            if (s % spec.classes == k) {
                ds.eeg_test.push_back(idx);
            } else {
                ds.eeg_train.push_back(idx);
            }
        }
    }

    for (int k = 0; k < spec.classes; ++k) {
        for (int i = 0; i < spec.per_class; ++i) {
            const int idx = static_cast<int>(ds.images.size());
            ds.images.push_back(
                make_synth_image(k, i, spec.per_class, spec.image_size, spec.classes));
            if (i % spec.classes == k) {
                ds.image_test.push_back(idx);
            } else {
                ds.image_train.push_back(idx);
            }
        }
    }

    ds.metadata["num_classes"] = std::to_string(spec.classes);
    ds.metadata["channels"] = std::to_string(spec.channels);
    ds.metadata["timesteps"] = std::to_string(spec.timesteps);
    ds.metadata["image_size"] = std::to_string(spec.image_size);
    ds.metadata["sample_rate_hz"] = "128";
    std::ostringstream names;
    for (int k = 0; k < spec.classes; ++k) names << (k ? "," : "") << "class_" << k;
    ds.metadata["class_names"] = names.str();

    validate_dataset(ds);
    return ds;
}

namespace {

TensorF labels_to_tensor(const std::vector<int>& idx, const std::vector<EEGSample>& eeg,
                         bool subjects) {
    TensorF t({static_cast<int64_t>(idx.size())});
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& s = eeg[static_cast<size_t>(idx[i])];
        t.data[i] = static_cast<float>(subjects ? s.subject : s.label);
    }
    return t;
}

TensorF pack_eeg(const std::vector<int>& idx, const PairedDataset& ds) {
    TensorF t({static_cast<int64_t>(idx.size()), ds.channels, ds.timesteps});
    float* p = t.ptr();
    const int64_t stride = static_cast<int64_t>(ds.channels) * ds.timesteps;
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& s = ds.eeg[static_cast<size_t>(idx[i])];
        require(s.signal.dim(0) == ds.channels && s.signal.dim(1) == ds.timesteps,
                Status::shape, "EEG sample shape differs from dataset shape");
        std::copy(s.signal.data.begin(), s.signal.data.end(), p + i * stride);
    }
    return t;
}

TensorF pack_images(const std::vector<int>& idx, const PairedDataset& ds) {
    const int64_t hw = ds.image_size;
    TensorF t({static_cast<int64_t>(idx.size()), hw, hw, 3});
    float* p = t.ptr();
    const int64_t stride = hw * hw * 3;
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& s = ds.images[static_cast<size_t>(idx[i])];
        require(s.image.dim(0) == hw && s.image.dim(1) == hw, Status::shape,
                "image shape differs from dataset shape");
        std::copy(s.image.data.begin(), s.image.data.end(), p + i * stride);
    }
    return t;
}

TensorF image_labels_to_tensor(const std::vector<int>& idx,
                               const std::vector<ImageSample>& images) {
    TensorF t({static_cast<int64_t>(idx.size())});
    for (size_t i = 0; i < idx.size(); ++i) {
        t.data[i] = static_cast<float>(images[static_cast<size_t>(idx[i])].label);
    }
    return t;
}

int as_label(float v, const char* what) {
    const float r = std::round(v);
    require(std::isfinite(v) && std::fabs(v - r) < 1e-3f && r >= 0.0f, Status::integrity,
            std::string(what) + " array holds a non-integer value");
    return static_cast<int>(r);
}

}  // namespace

void save_dataset(const PairedDataset& ds, const std::string& root) {
    Container c;
    c.add("eeg_train", pack_eeg(ds.eeg_train, ds));
    c.add("labels_train", labels_to_tensor(ds.eeg_train, ds.eeg, false));
    c.add("subjects_train", labels_to_tensor(ds.eeg_train, ds.eeg, true));
    c.add("eeg_test", pack_eeg(ds.eeg_test, ds));
    c.add("labels_test", labels_to_tensor(ds.eeg_test, ds.eeg, false));
    c.add("subjects_test", labels_to_tensor(ds.eeg_test, ds.eeg, true));
    c.add("images_train", pack_images(ds.image_train, ds));
    c.add("image_labels_train", image_labels_to_tensor(ds.image_train, ds.images));
    c.add("images_test", pack_images(ds.image_test, ds));
    c.add("image_labels_test", image_labels_to_tensor(ds.image_test, ds.images));
    c.metadata = ds.metadata;
    c.metadata["num_classes"] = std::to_string(ds.num_classes);
    save_container(c, root);
}

PairedDataset load_dataset(const std::string& root) {
    const Container c = load_container(root);
    PairedDataset ds;
    ds.metadata = c.metadata;

    const auto meta_int = [&](const std::string& key, int fallback) {
        auto it = c.metadata.find(key);
        if (it == c.metadata.end()) return fallback;
        try {
            return std::stoi(it->second);
        } catch (...) {
            fail(Status::format, "metadata key '" + key + "' is not an integer");
        }
    };

    const TensorF& eeg_train = c.get("eeg_train");
    const TensorF& eeg_test = c.get("eeg_test");
    require(eeg_train.ndim() == 3 && eeg_test.ndim() == 3, Status::format,
            "eeg arrays must be rank 3 (samples x channels x timesteps)");
    ds.channels = static_cast<int>(eeg_train.dim(1));
    ds.timesteps = static_cast<int>(eeg_train.dim(2));

    const auto unpack_eeg = [&](const TensorF& block, const TensorF& labels,
                                const TensorF* subjects, std::vector<int>& split) {
        const int64_t n = block.dim(0);
        require(labels.numel() == n, Status::integrity,
                "label count does not match EEG sample count");
        require(block.dim(1) == ds.channels && block.dim(2) == ds.timesteps, Status::integrity,
                "EEG split shapes disagree on channels/timesteps");
        const int64_t stride = static_cast<int64_t>(ds.channels) * ds.timesteps;
        for (int64_t i = 0; i < n; ++i) {
            EEGSample s;
            s.label = as_label(labels.data[static_cast<size_t>(i)], "labels");
            s.subject =
                subjects ? as_label(subjects->data[static_cast<size_t>(i)], "subjects") : 0;
            s.signal = TensorF({ds.channels, ds.timesteps});
            std::copy(block.data.begin() + i * stride, block.data.begin() + (i + 1) * stride,
                      s.signal.data.begin());
            split.push_back(static_cast<int>(ds.eeg.size()));
            ds.eeg.push_back(std::move(s));
        }
    };
    unpack_eeg(eeg_train, c.get("labels_train"), c.find("subjects_train"), ds.eeg_train);
    unpack_eeg(eeg_test, c.get("labels_test"), c.find("subjects_test"), ds.eeg_test);

    const TensorF& images_train = c.get("images_train");
    require(images_train.ndim() == 4 && images_train.dim(3) == 3, Status::format,
            "image arrays must be rank 4 (samples x H x W x 3)");
    ds.image_size = static_cast<int>(images_train.dim(1));

    const auto unpack_images = [&](const TensorF& block, const TensorF& labels,
                                   std::vector<int>& split) {
        const int64_t n = block.dim(0);
        require(labels.numel() == n, Status::integrity,
                "image label count does not match image count");
        require(block.dim(1) == ds.image_size && block.dim(2) == ds.image_size,
                Status::integrity, "image split shapes disagree on size");
        const int64_t stride = static_cast<int64_t>(ds.image_size) * ds.image_size * 3;
        for (int64_t i = 0; i < n; ++i) {
            ImageSample s;
            s.label = as_label(labels.data[static_cast<size_t>(i)], "image_labels");
            s.image = TensorF({ds.image_size, ds.image_size, 3});
            std::copy(block.data.begin() + i * stride, block.data.begin() + (i + 1) * stride,
                      s.image.data.begin());
            split.push_back(static_cast<int>(ds.images.size()));
            ds.images.push_back(std::move(s));
        }
    };
    unpack_images(images_train, c.get("image_labels_train"), ds.image_train);
    unpack_images(c.get("images_test"), c.get("image_labels_test"), ds.image_test);

    int max_label = 0;
    for (const auto& s : ds.eeg) max_label = std::max(max_label, s.label);
    for (const auto& s : ds.images) max_label = std::max(max_label, s.label);
    ds.num_classes = meta_int("num_classes", max_label + 1);

    validate_dataset(ds);
    return ds;
}

void validate_dataset(const PairedDataset& ds) {
    require(ds.num_classes >= 1, Status::integrity, "dataset has no classes");
    require(!ds.eeg.empty(), Status::integrity, "dataset has no EEG samples");
    require(ds.channels >= 1 && ds.timesteps >= 1, Status::integrity,
            "dataset has degenerate EEG shape");
    require(ds.image_size >= 1 && is_power_of_two(ds.image_size), Status::integrity,
            "image size must be a power of two");

    for (const auto& s : ds.eeg) {
        require(s.label >= 0 && s.label < ds.num_classes, Status::integrity,
                "EEG label out of range");
        for (float v : s.signal.data) {
            require(std::isfinite(v), Status::invalid_data, "EEG sample is not finite");
        }
    }
    for (const auto& s : ds.images) {
        require(s.label >= 0 && s.label < ds.num_classes, Status::integrity,
                "image label out of range");
        require(s.image.dim(0) == ds.image_size && s.image.dim(1) == ds.image_size &&
                    s.image.dim(2) == 3,
                Status::integrity, "image shape mismatch");
        for (float v : s.image.data) {
            require(std::isfinite(v) && v >= -1.0f && v <= 1.0f, Status::invalid_data,
                    "image value outside [-1, 1]");
        }
    }

    // Splits must be disjoint and any class present in a split's EEG needs a
    // same-split image pool to pair against.
    std::set<int> seen;
    for (int i : ds.eeg_train) seen.insert(i);
    for (int i : ds.eeg_test) {
        require(seen.count(i) == 0, Status::integrity, "train/test EEG splits overlap");
    }
    const auto check_split = [&](const std::vector<int>& eeg_split,
                                 const std::vector<int>& image_split, const char* name) {
        std::set<int> eeg_classes, image_classes;
        for (int i : eeg_split) eeg_classes.insert(ds.eeg[static_cast<size_t>(i)].label);
        for (int i : image_split) image_classes.insert(ds.images[static_cast<size_t>(i)].label);
        for (int k : eeg_classes) {
            require(image_classes.count(k) == 1, Status::integrity,
                    std::string("class ") + std::to_string(k) + " has EEG but no image in the " +
                        name + " split");
        }
    };
    check_split(ds.eeg_train, ds.image_train, "train");
    check_split(ds.eeg_test, ds.image_test, "test");
}

uint8_t pixel_to_u8(float v) {
    const long x = std::lround((static_cast<double>(v) + 1.0) * 127.5);
    return static_cast<uint8_t>(std::clamp(x, 0L, 255L));
}

void save_image_grid(const std::string& path, const std::vector<const TensorF*>& images,
                     int rows, int cols) {
    require(rows > 0 && cols > 0, Status::shape, "grid: empty layout");
    require(static_cast<int>(images.size()) <= rows * cols, Status::shape,
            "grid: more images than cells");
    require(!images.empty(), Status::shape, "grid: no images");
    const int h = static_cast<int>(images[0]->dim(0));
    const int w = static_cast<int>(images[0]->dim(1));
    const int pad = 2;
    const int canvas_w = cols * w + (cols + 1) * pad;
    const int canvas_h = rows * h + (rows + 1) * pad;
    std::vector<uint8_t> rgb(static_cast<size_t>(canvas_w) * canvas_h * 3, 24);

    for (size_t i = 0; i < images.size(); ++i) {
        const TensorF& img = *images[i];
        require(img.dim(0) == h && img.dim(1) == w && img.dim(2) == 3, Status::shape,
                "grid: images differ in shape");
        const int r = static_cast<int>(i) / cols;
        const int c = static_cast<int>(i) % cols;
        const int y0 = pad + r * (h + pad);
        const int x0 = pad + c * (w + pad);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float* src = img.ptr() + (static_cast<int64_t>(y) * w + x) * 3;
                uint8_t* dst =
                    rgb.data() + (static_cast<size_t>(y0 + y) * canvas_w + (x0 + x)) * 3;
                dst[0] = pixel_to_u8(src[0]);
                dst[1] = pixel_to_u8(src[1]);
                dst[2] = pixel_to_u8(src[2]);
            }
        }
    }
    write_png_rgb8(path, canvas_w, canvas_h, rgb);
}

}  // namespace e2i::dataio
