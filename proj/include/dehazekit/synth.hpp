#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dehazekit/haze.hpp"

namespace dhz {

enum class DepthKind { LinearRamp, Radial, RandomSmooth, Mixed };

std::string depth_kind_name(DepthKind k);
DepthKind depth_kind_from_name(const std::string& name);

struct SynthConfig {
    int count = 16;
    int image_size = 64;            // square side, >= 8
    double beta_min = 0.5;
    double beta_max = 2.0;
    double a_min = 0.7;             // atmospheric light range, equal across channels
    double a_max = 1.0;
    DepthKind depth_kind = DepthKind::Mixed; // Mixed cycles the three families
    double depth_scale = 0.65;      // max depth; keeps t >= exp(-beta_max*scale)
    uint64_t seed = 0;

    void validate() const;
};

// One (hazy, clean) pair in a generated dataset. Depth maps are not stored;
// they regenerate deterministically from (kind, item_seed).
struct DatasetPair {
    int index = 0;
    std::string clean_rel;
    std::string hazy_rel;
    double beta = 0.0;
    std::array<double, 3> atmospheric_light{};
    DepthKind depth_kind = DepthKind::LinearRamp;
    uint64_t item_seed = 0;
};

struct DatasetManifest {
    SynthConfig config;
    std::vector<DatasetPair> pairs;

    std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);
};

// Procedural haze-free scene: smooth low-frequency color field plus a few
// geometric shapes. Deterministic in seed.
Image synth_clean_image(int size, uint64_t seed);

// Depth field in [0, scale]; kind Mixed is resolved by the caller.
DepthMap synth_depth(DepthKind kind, int height, int width, uint64_t seed, double scale);

// Writes out_dir/clean/NNNN.png, out_dir/hazy/NNNN.png and
// out_dir/manifest.json. Bit-reproducible for a fixed config.
DatasetManifest generate_dataset(const SynthConfig& cfg, const std::string& out_dir);

// A dataset loaded back into memory for training / evaluation.
struct Dataset {
    DatasetManifest manifest;
    std::vector<Image> hazy;
    std::vector<Image> clean;

    size_t size() const { return hazy.size(); }
};

Dataset load_dataset(const std::string& dir);

// FNV-1a over the manifest text; identifies a dataset in reports.
std::string manifest_hash(const std::string& manifest_text);

} // namespace dhz
