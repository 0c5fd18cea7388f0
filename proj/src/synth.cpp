#include "dehazekit/synth.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dehazekit/parallel.hpp"
#include "dehazekit/png_io.hpp"
#include "dehazekit/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dhz {

std::string depth_kind_name(DepthKind k) {
    switch (k) {
        case DepthKind::LinearRamp: return "linear-ramp";
        case DepthKind::Radial: return "radial";
        case DepthKind::RandomSmooth: return "random-smooth";
        case DepthKind::Mixed: return "mixed";
    }
    throw std::logic_error("depth_kind_name: bad enum");
}

DepthKind depth_kind_from_name(const std::string& name) {
    if (name == "linear-ramp") return DepthKind::LinearRamp;
    if (name == "radial") return DepthKind::Radial;
    if (name == "random-smooth") return DepthKind::RandomSmooth;
    if (name == "mixed") return DepthKind::Mixed;
    throw std::invalid_argument("unknown depth kind: " + name);
}

void SynthConfig::validate() const {
    if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
    if (image_size < 8) throw std::invalid_argument("synth: image_size must be >= 8");
    if (beta_min < 0.0 || beta_max < beta_min)
        throw std::invalid_argument("synth: invalid beta range");
    if (a_min < 0.0 || a_max > 1.0 || a_max < a_min)
        throw std::invalid_argument("synth: atmospheric light range must lie in [0,1]");
    if (depth_scale <= 0.0) throw std::invalid_argument("synth: depth_scale must be positive");
}

Image synth_clean_image(int size, uint64_t seed) {
    Rng rng(seed);
    Image img = make_image(size, size);

    // Smooth base field: per channel, a low-frequency cosine mixture mapped
    // into [0.1, 0.9].
    for (int ch = 0; ch < 3; ++ch) {
        double fx1 = rng.uniform(0.5, 2.0), fy1 = rng.uniform(0.5, 2.0), p1 = rng.uniform(0.0, 2.0 * M_PI);
        double fx2 = rng.uniform(1.0, 3.0), fy2 = rng.uniform(1.0, 3.0), p2 = rng.uniform(0.0, 2.0 * M_PI);
        double w2 = rng.uniform(0.2, 0.6);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                double u = static_cast<double>(c) / size, v = static_cast<double>(r) / size;
                double s = std::cos(2.0 * M_PI * (fx1 * u + fy1 * v) + p1) +
                           w2 * std::cos(2.0 * M_PI * (fx2 * u - fy2 * v) + p2);
                image_at(img, r, c, ch) = 0.5 + 0.4 * s / (1.0 + w2);
            }
    }

    // Geometric shapes with solid colors.
    int shapes = 4 + rng.uniform_int(4);
    for (int s = 0; s < shapes; ++s) {
        bool circle = rng.uniform() < 0.5;
        double col[3] = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
        if (circle) {
            double cy = rng.uniform(0.0, size), cx = rng.uniform(0.0, size);
            double rad = rng.uniform(0.06, 0.22) * size;
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c)
                    if ((r - cy) * (r - cy) + (c - cx) * (c - cx) <= rad * rad)
                        for (int ch = 0; ch < 3; ++ch) image_at(img, r, c, ch) = col[ch];
        } else {
            int r0 = rng.uniform_int(size), c0 = rng.uniform_int(size);
            int rh = 2 + rng.uniform_int(size / 3), rw = 2 + rng.uniform_int(size / 3);
            for (int r = r0; r < std::min(size, r0 + rh); ++r)
                for (int c = c0; c < std::min(size, c0 + rw); ++c)
                    for (int ch = 0; ch < 3; ++ch) image_at(img, r, c, ch) = col[ch];
        }
    }

    clip01(img);
    return img;
}

DepthMap synth_depth(DepthKind kind, int height, int width, uint64_t seed, double scale) {
    if (kind == DepthKind::Mixed)
        throw std::invalid_argument("synth_depth: Mixed must be resolved to a concrete kind");
    Rng rng(seed);
    DepthMap d = make_depth(height, width);
    auto at = [&](int r, int c) -> double& { return d[static_cast<int64_t>(r) * width + c]; };

    switch (kind) {
        case DepthKind::LinearRamp: {
            double ang = rng.uniform(0.0, 2.0 * M_PI);
            double dx = std::cos(ang), dy = std::sin(ang);
            double lo = 1e18, hi = -1e18;
            for (int r = 0; r < height; ++r)
                for (int c = 0; c < width; ++c) {
                    double v = dx * c / width + dy * r / height;
                    at(r, c) = v;
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            double span = std::max(hi - lo, 1e-12);
            for (double& v : d.data) v = (v - lo) / span * scale;
            break;
        }
        case DepthKind::Radial: {
            // Bowl: far at a random center, near at the rim (or inverted).
            double cy = rng.uniform(0.25, 0.75) * height, cx = rng.uniform(0.25, 0.75) * width;
            bool invert = rng.uniform() < 0.5;
            double maxd = 0.0;
            for (int r = 0; r < height; ++r)
                for (int c = 0; c < width; ++c) {
                    double v = std::hypot((r - cy) / height, (c - cx) / width);
                    at(r, c) = v;
                    maxd = std::max(maxd, v);
                }
            for (double& v : d.data) {
                v /= std::max(maxd, 1e-12);
                if (invert) v = 1.0 - v;
                v *= scale;
            }
            break;
        }
        case DepthKind::RandomSmooth: {
            double fx1 = rng.uniform(0.5, 1.5), fy1 = rng.uniform(0.5, 1.5), p1 = rng.uniform(0.0, 2.0 * M_PI);
            double fx2 = rng.uniform(1.0, 2.5), fy2 = rng.uniform(1.0, 2.5), p2 = rng.uniform(0.0, 2.0 * M_PI);
            double lo = 1e18, hi = -1e18;
            for (int r = 0; r < height; ++r)
                for (int c = 0; c < width; ++c) {
                    double u = static_cast<double>(c) / width, w = static_cast<double>(r) / height;
                    double v = std::cos(2.0 * M_PI * (fx1 * u + fy1 * w) + p1) +
                               0.5 * std::cos(2.0 * M_PI * (fx2 * u - fy2 * w) + p2);
                    at(r, c) = v;
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            double span = std::max(hi - lo, 1e-12);
            for (double& v : d.data) v = (v - lo) / span * scale;
            break;
        }
        case DepthKind::Mixed: break; // unreachable
    }
    return d;
}

namespace {

std::string pair_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d.png", index);
    return buf;
}

DepthKind resolve_kind(DepthKind cfg_kind, int index) {
    if (cfg_kind != DepthKind::Mixed) return cfg_kind;
    switch (index % 3) {
        case 0: return DepthKind::LinearRamp;
        case 1: return DepthKind::Radial;
        default: return DepthKind::RandomSmooth;
    }
}

json manifest_to_json_obj(const DatasetManifest& m) {
    json j;
    j["format"] = "dehazekit-dataset-v1";
    j["count"] = m.config.count;
    j["image_size"] = m.config.image_size;
    j["seed"] = m.config.seed;
    j["beta_range"] = {m.config.beta_min, m.config.beta_max};
    j["a_range"] = {m.config.a_min, m.config.a_max};
    j["depth_kind"] = depth_kind_name(m.config.depth_kind);
    j["depth_scale"] = m.config.depth_scale;
    json pairs = json::array();
    for (const auto& p : m.pairs) {
        json e;
        e["index"] = p.index;
        e["clean"] = p.clean_rel;
        e["hazy"] = p.hazy_rel;
        e["beta"] = p.beta;
        e["atmospheric_light"] = {p.atmospheric_light[0], p.atmospheric_light[1],
                                  p.atmospheric_light[2]};
        e["depth_kind"] = depth_kind_name(p.depth_kind);
        e["item_seed"] = p.item_seed;
        pairs.push_back(e);
    }
    j["pairs"] = pairs;
    return j;
}

} // namespace

std::string DatasetManifest::to_json() const { return manifest_to_json_obj(*this).dump(2); }

DatasetManifest DatasetManifest::from_json(const std::string& text) {
    json j = json::parse(text);
    if (!j.contains("format") || j["format"] != "dehazekit-dataset-v1")
        throw std::runtime_error("manifest: unknown format tag");
    DatasetManifest m;
    m.config.count = j.at("count").get<int>();
    m.config.image_size = j.at("image_size").get<int>();
    m.config.seed = j.at("seed").get<uint64_t>();
    m.config.beta_min = j.at("beta_range")[0].get<double>();
    m.config.beta_max = j.at("beta_range")[1].get<double>();
    m.config.a_min = j.at("a_range")[0].get<double>();
    m.config.a_max = j.at("a_range")[1].get<double>();
    m.config.depth_kind = depth_kind_from_name(j.at("depth_kind").get<std::string>());
    m.config.depth_scale = j.at("depth_scale").get<double>();
    for (const auto& e : j.at("pairs")) {
        DatasetPair p;
        p.index = e.at("index").get<int>();
        p.clean_rel = e.at("clean").get<std::string>();
        p.hazy_rel = e.at("hazy").get<std::string>();
        p.beta = e.at("beta").get<double>();
        auto a = e.at("atmospheric_light");
        p.atmospheric_light = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
        p.depth_kind = depth_kind_from_name(e.at("depth_kind").get<std::string>());
        p.item_seed = e.at("item_seed").get<uint64_t>();
        m.pairs.push_back(p);
    }
    return m;
}

DatasetManifest generate_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root / "clean", ec);
    fs::create_directories(root / "hazy", ec);
    if (!fs::is_directory(root / "clean") || !fs::is_directory(root / "hazy"))
        throw std::runtime_error("generate_dataset: cannot create output directory " + out_dir);

    DatasetManifest m;
    m.config = cfg;
    m.pairs.resize(static_cast<size_t>(cfg.count));

    parallel_for(cfg.count, [&](int64_t i) {
        const int index = static_cast<int>(i);
        uint64_t item_seed = derive_seed(cfg.seed, static_cast<uint64_t>(index));
        Rng rng(item_seed);
        double beta = rng.uniform(cfg.beta_min, cfg.beta_max);
        double a = rng.uniform(cfg.a_min, cfg.a_max);
        DepthKind kind = resolve_kind(cfg.depth_kind, index);

        // Haze is applied to the quantized clean image so the stored pair is
        // exactly consistent with the stored parameters.
        Image clean = quantized(synth_clean_image(cfg.image_size, derive_seed(item_seed, 1)));
        DepthMap depth = synth_depth(kind, cfg.image_size, cfg.image_size,
                                     derive_seed(item_seed, 2), cfg.depth_scale);
        ScatterParams params;
        params.beta = beta;
        params.atmospheric_light = {a, a, a};
        Image hazy = apply_haze(clean, depth, params);

        DatasetPair p;
        p.index = index;
        p.clean_rel = "clean/" + pair_name(index);
        p.hazy_rel = "hazy/" + pair_name(index);
        p.beta = beta;
        p.atmospheric_light = params.atmospheric_light;
        p.depth_kind = kind;
        p.item_seed = item_seed;
        save_image(clean, (root / p.clean_rel).string());
        save_image(hazy, (root / p.hazy_rel).string());
        m.pairs[static_cast<size_t>(index)] = p;
    });

    std::ofstream out(root / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("generate_dataset: cannot write manifest");
    out << m.to_json() << "\n";
    return m;
}

Dataset load_dataset(const std::string& dir) {
    fs::path root(dir);
    std::ifstream in(root / "manifest.json", std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: missing manifest.json in " + dir);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Dataset ds;
    ds.manifest = DatasetManifest::from_json(text);
    ds.hazy.resize(ds.manifest.pairs.size());
    ds.clean.resize(ds.manifest.pairs.size());
    parallel_for(static_cast<int64_t>(ds.manifest.pairs.size()), [&](int64_t i) {
        const auto& p = ds.manifest.pairs[static_cast<size_t>(i)];
        Image hazy = load_image((root / p.hazy_rel).string());
        Image clean = load_image((root / p.clean_rel).string());
        validate_image(hazy);
        validate_image(clean);
        ds.hazy[static_cast<size_t>(i)] = std::move(hazy);
        ds.clean[static_cast<size_t>(i)] = std::move(clean);
    });
    return ds;
}

std::string manifest_hash(const std::string& manifest_text) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : manifest_text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace dhz
