#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/common.hpp"
#include "core/dataio.hpp"
#include "doctest.h"

using namespace e2i;
using namespace e2i::dataio;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec() {
    SynthSpec s;
    s.classes = 4;
    s.per_class = 6;
    s.channels = 3;
    s.timesteps = 16;
    s.image_size = 8;
    s.seed = 42;
    return s;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("e2i_dataio_" + tag);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("synthesis is deterministic and respects the spec") {
    const PairedDataset a = synthesize_dataset(small_spec());
    const PairedDataset b = synthesize_dataset(small_spec());
    CHECK(a.eeg.size() == 24);
    CHECK(a.images.size() == 24);
    CHECK(a.num_classes == 4);
    REQUIRE(a.eeg.size() == b.eeg.size());
    for (size_t i = 0; i < a.eeg.size(); ++i) {
        CHECK(a.eeg[i].label == b.eeg[i].label);
        CHECK(a.eeg[i].signal.data == b.eeg[i].signal.data);
    }
    for (size_t i = 0; i < a.images.size(); ++i)
        CHECK(a.images[i].image.data == b.images[i].image.data);

    // different seed differs somewhere
    SynthSpec other = small_spec();
    other.seed = 43;
    const PairedDataset c = synthesize_dataset(other);
    bool any_diff = false;
    for (size_t i = 0; i < a.eeg.size() && !any_diff; ++i)
        any_diff = a.eeg[i].signal.data != c.eeg[i].signal.data;
    CHECK(any_diff);

    validate_dataset(a);
}

TEST_CASE("every class appears in both splits") {
    const PairedDataset ds = synthesize_dataset(small_spec());
    for (int k = 0; k < ds.num_classes; ++k) {
        CHECK(!ds.eeg_of_class(ds.eeg_train, k).empty());
        CHECK(!ds.eeg_of_class(ds.eeg_test, k).empty());
        CHECK(!ds.images_of_class(ds.image_train, k).empty());
    }
    // splits are disjoint and cover everything
    CHECK(ds.eeg_train.size() + ds.eeg_test.size() == ds.eeg.size());
}

TEST_CASE("synthesis rejects bad specs") {
    SynthSpec s = small_spec();
    s.image_size = 33;
    CHECK_THROWS_AS(synthesize_dataset(s), Error);
    try {
        synthesize_dataset(s);
    } catch (const Error& e) {
        CHECK(e.status() == Status::config);
    }
    s = small_spec();
    s.classes = 1;
    CHECK_THROWS_AS(synthesize_dataset(s), Error);
}

TEST_CASE("normalization zero-centers channels and zeroes constant ones") {
    EEGSample s;
    s.signal = TensorF({2, 4});
    s.signal.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 5.0f, 5.0f, 5.0f};
    const EEGSample n = normalize_eeg(s);
    double mean = 0.0;
    for (int t = 0; t < 4; ++t) mean += n.signal.data[static_cast<size_t>(t)];
    CHECK(std::abs(mean / 4.0) < 1e-6);
    for (int t = 0; t < 4; ++t) CHECK(n.signal.data[static_cast<size_t>(4 + t)] == 0.0f);
}

TEST_CASE("save and load round-trip bit-exactly per split") {
    // Loading canonicalizes storage order (train block, then test block);
    // every consumer reads through the splits, so compare split-wise.
    const PairedDataset a = synthesize_dataset(small_spec());
    const fs::path dir = temp_dir("roundtrip");
    save_dataset(a, dir.string());
    const PairedDataset b = load_dataset(dir.string());
    CHECK(b.num_classes == a.num_classes);
    CHECK(b.channels == a.channels);
    CHECK(b.timesteps == a.timesteps);
    CHECK(b.image_size == a.image_size);
    REQUIRE(b.eeg.size() == a.eeg.size());
    REQUIRE(b.images.size() == a.images.size());
    const auto check_eeg_split = [&](const std::vector<int>& bs, const std::vector<int>& as) {
        REQUIRE(bs.size() == as.size());
        for (size_t i = 0; i < as.size(); ++i) {
            const EEGSample& sb = b.eeg[static_cast<size_t>(bs[i])];
            const EEGSample& sa = a.eeg[static_cast<size_t>(as[i])];
            CHECK(sb.label == sa.label);
            CHECK(sb.subject == sa.subject);
            CHECK(sb.signal.data == sa.signal.data);
        }
    };
    check_eeg_split(b.eeg_train, a.eeg_train);
    check_eeg_split(b.eeg_test, a.eeg_test);
    const auto check_img_split = [&](const std::vector<int>& bs, const std::vector<int>& as) {
        REQUIRE(bs.size() == as.size());
        for (size_t i = 0; i < as.size(); ++i) {
            const ImageSample& sb = b.images[static_cast<size_t>(bs[i])];
            const ImageSample& sa = a.images[static_cast<size_t>(as[i])];
            CHECK(sb.label == sa.label);
            CHECK(sb.image.data == sa.image.data);
        }
    };
    check_img_split(b.image_train, a.image_train);
    check_img_split(b.image_test, a.image_test);
    fs::remove_all(dir);
}

TEST_CASE("loading a tampered container fails with a format/integrity error") {
    const PairedDataset a = synthesize_dataset(small_spec());
    const fs::path dir = temp_dir("tamper");
    save_dataset(a, dir.string());
    // truncate one binary payload
    bool truncated = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".f32") {
            fs::resize_file(entry.path(), fs::file_size(entry.path()) / 2);
            truncated = true;
            break;
        }
    }
    REQUIRE(truncated);
    CHECK_THROWS_AS(load_dataset(dir.string()), Error);
    fs::remove_all(dir);
}

TEST_CASE("validate rejects out-of-range labels and pixels") {
    PairedDataset ds = synthesize_dataset(small_spec());
    ds.eeg[0].label = 99;
    CHECK_THROWS_AS(validate_dataset(ds), Error);

    PairedDataset ds2 = synthesize_dataset(small_spec());
    ds2.images[0].image.data[0] = 2.0f;
    try {
        validate_dataset(ds2);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.status() == Status::invalid_data);
    }
}

TEST_CASE("pixel mapping clamps and rounds") {
    CHECK(pixel_to_u8(-1.0f) == 0);
    CHECK(pixel_to_u8(1.0f) == 255);
    CHECK(pixel_to_u8(0.0f) == 128);  // round(127.5) away from zero
    CHECK(pixel_to_u8(-2.0f) == 0);
    CHECK(pixel_to_u8(2.0f) == 255);
}

TEST_CASE("image grid writes a valid PNG with the expected size") {
    TensorF img({4, 4, 3});
    img.fill(0.5f);
    const fs::path dir = temp_dir("grid");
    fs::create_directories(dir);
    const fs::path png = dir / "grid.png";
    dataio::save_image_grid(png.string(), {&img, &img, &img}, 2, 2);
    REQUIRE(fs::exists(png));
    std::ifstream in(png, std::ios::binary);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    CHECK(sig[0] == 0x89);
    CHECK(sig[1] == 'P');
    CHECK(sig[2] == 'N');
    CHECK(sig[3] == 'G');
    fs::remove_all(dir);
}
