#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekit/errors.hpp"
#include "posekit/mask.hpp"
#include "posekit/mesh.hpp"
#include "posekit/rng.hpp"
#include "posekit/silhouette.hpp"
#include "posekit/tensor.hpp"
#include "posekit/tensor_io.hpp"

namespace posekit {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Annotations: JSON lines, one object per line. Paths are relative to the
// annotation file's directory. The pose-label exporter emits records without
// file paths; when a path is present the file must exist.
// ---------------------------------------------------------------------------
struct Annotation {
    std::string sample_id;
    std::string category;
    std::string mesh_id;
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    std::string normal_path;         // feature map, surface-normal proxy
    std::string reshading_path;      // feature map, re-shading proxy
    std::string predicted_mask_path; // detector-style object mask
    std::string gt_mask_path;        // optional
};

namespace detail {

inline nlohmann::json annotation_to_json(const Annotation& a) {
    nlohmann::json j;
    j["sample_id"] = a.sample_id;
    j["category"] = a.category;
    j["mesh_id"] = a.mesh_id;
    j["azimuth_deg"] = a.azimuth_deg;
    j["elevation_deg"] = a.elevation_deg;
    if (!a.normal_path.empty()) j["normal_path"] = a.normal_path;
    if (!a.reshading_path.empty()) j["reshading_path"] = a.reshading_path;
    if (!a.predicted_mask_path.empty()) j["predicted_mask_path"] = a.predicted_mask_path;
    if (!a.gt_mask_path.empty()) j["gt_mask_path"] = a.gt_mask_path;
    return j;
}

} // namespace detail

inline void save_annotations(const std::string& path, const std::vector<Annotation>& anns) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    for (const auto& a : anns) f << detail::annotation_to_json(a).dump() << "\n";
    if (!f) throw IoError("write failed: " + path);
}

inline std::vector<Annotation> load_annotations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open annotations: " + path);
    const fs::path base = fs::path(path).parent_path();
    std::vector<Annotation> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        Annotation a;
        try {
            a.sample_id = j.at("sample_id").get<std::string>();
            a.category = j.at("category").get<std::string>();
            a.mesh_id = j.at("mesh_id").get<std::string>();
            a.azimuth_deg = j.at("azimuth_deg").get<double>();
            a.elevation_deg = j.at("elevation_deg").get<double>();
            a.normal_path = j.value("normal_path", "");
            a.reshading_path = j.value("reshading_path", "");
            a.predicted_mask_path = j.value("predicted_mask_path", "");
            a.gt_mask_path = j.value("gt_mask_path", "");
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (a.azimuth_deg < 0 || a.azimuth_deg >= 360.0)
            throw ParseError(path + ":" + std::to_string(lineno) + ": azimuth out of [0,360)");
        if (a.elevation_deg < -90.0 || a.elevation_deg > 90.0)
            throw ParseError(path + ":" + std::to_string(lineno) + ": elevation out of [-90,90]");
        for (const std::string* p :
             {&a.normal_path, &a.reshading_path, &a.predicted_mask_path, &a.gt_mask_path}) {
            if (!p->empty() && !fs::exists(base / *p))
                throw IoError(path + ":" + std::to_string(lineno) + ": missing file " +
                              (base / *p).string());
        }
        out.push_back(std::move(a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic splits. The shuffle depends only on the id set and the seed,
// not on input order.
// ---------------------------------------------------------------------------
struct Split {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    uint64_t seed = 0;
};

inline Split make_split(std::vector<std::string> ids, double train_fraction, uint64_t seed) {
    if (ids.size() < 2) throw ConfigError("make_split: need at least 2 ids");
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
        throw ConfigError("make_split: fraction must be in (0,1)");
    std::sort(ids.begin(), ids.end());
    Rng rng(seed);
    rng.shuffle(ids);
    const size_t n_train =
        static_cast<size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
    Split s;
    s.seed = seed;
    s.train_ids.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
    s.test_ids.assign(ids.begin() + static_cast<long>(n_train), ids.end());
    return s;
}

// Stratified low-data subsampling. Keeps floor(fraction * |train|) training
// ids; the selection order interleaves categories proportionally, so the
// kept set for a smaller fraction is always a subset of the kept set for a
// larger one under the same seed. Test ids are untouched. Categories that
// end up empty are reported, not fatal.
inline Split subsample_fraction(const Split& split,
                                const std::map<std::string, std::string>& id_to_category,
                                double fraction, uint64_t seed,
                                std::vector<std::string>* emptied_categories = nullptr) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("subsample_fraction: fraction must be in (0,1]");
    if (emptied_categories) emptied_categories->clear();
    if (fraction == 1.0) return split;

    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& id : split.train_ids) {
        const auto it = id_to_category.find(id);
        const std::string cat = it == id_to_category.end() ? "" : it->second;
        groups[cat].push_back(id);
    }
    Rng rng(seed);
    std::vector<std::string> order;
    struct Cursor {
        const std::vector<std::string>* ids;
        size_t taken = 0;
    };
    std::map<std::string, Cursor> cursors;
    for (auto& [cat, ids] : groups) {
        std::sort(ids.begin(), ids.end());
        Rng sub = rng.fork(std::hash<std::string>{}(cat));
        sub.shuffle(ids);
        cursors[cat] = {&ids, 0};
    }
    // largest-remaining-quota interleave: always take from the category with
    // the smallest (taken+1)/size ratio
    const size_t total = split.train_ids.size();
    while (order.size() < total) {
        const std::string* best_cat = nullptr;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (const auto& [cat, cur] : cursors) {
            if (cur.taken >= cur.ids->size()) continue;
            const double ratio = static_cast<double>(cur.taken + 1) /
                                 static_cast<double>(cur.ids->size());
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best_cat = &cat;
            }
        }
        Cursor& cur = cursors[*best_cat];
        order.push_back((*cur.ids)[cur.taken++]);
    }
    const size_t keep =
        static_cast<size_t>(std::floor(fraction * static_cast<double>(total)));
    Split out;
    out.seed = seed;
    out.test_ids = split.test_ids;
    out.train_ids.assign(order.begin(), order.begin() + static_cast<long>(keep));
    std::sort(out.train_ids.begin(), out.train_ids.end());

    if (emptied_categories) {
        std::map<std::string, int> kept_per_cat;
        for (const auto& id : out.train_ids) {
            const auto it = id_to_category.find(id);
            kept_per_cat[it == id_to_category.end() ? "" : it->second]++;
        }
        for (const auto& [cat, cur] : cursors) {
            if (!cur.ids->empty() && kept_per_cat[cat] == 0) emptied_categories->push_back(cat);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset generation. Stands in for the real photo datasets at
// desk scale: parametric cuboid-composition meshes, uniformly random
// viewpoints, rendered silhouettes as predicted-masks, and proxy feature
// maps derived from rendered normals/shading (pooled to 16x16, expanded to 8
// channels by fixed projections, standardized per channel). The proxies keep
// the features' information structure; they are not claimed to match any
// real backbone.
// ---------------------------------------------------------------------------
struct SynthConfig {
    int n_samples = 200;
    std::vector<std::string> categories = {"box", "chair", "table"};
    int meshes_per_category = 3;
    uint64_t seed = 0;

    void validate() const {
        if (n_samples < 1) throw ConfigError("synth: n_samples must be >= 1");
        if (categories.empty()) throw ConfigError("synth: need at least one category");
        if (meshes_per_category < 1) throw ConfigError("synth: meshes_per_category >= 1");
        for (const auto& c : categories)
            if (c != "box" && c != "chair" && c != "table")
                throw ConfigError("synth: unknown category " + c);
    }
};

namespace synth {

inline MeshModel make_box(Rng& rng) {
    MeshModel m;
    add_cuboid(m, {0, 0, 0},
               {rng.uniform(0.5, 1.4), rng.uniform(0.4, 1.0), rng.uniform(0.3, 0.9)});
    return m;
}

inline MeshModel make_chair(Rng& rng) {
    MeshModel m;
    const double seat_w = rng.uniform(0.4, 0.6);
    const double seat_d = rng.uniform(0.4, 0.6);
    const double seat_h = rng.uniform(0.35, 0.5);
    const double back_h = rng.uniform(0.4, 0.7);
    const double leg = rng.uniform(0.04, 0.08);
    add_cuboid(m, {0, 0, seat_h}, {seat_d, seat_w, 0.08});
    // back panel on the -x side so the chair has a distinct front
    add_cuboid(m, {-seat_d / 2 + 0.03, 0, seat_h + back_h / 2}, {0.06, seat_w, back_h});
    for (int sx = -1; sx <= 1; sx += 2)
        for (int sy = -1; sy <= 1; sy += 2)
            add_cuboid(m,
                       {sx * (seat_d / 2 - leg), sy * (seat_w / 2 - leg), seat_h / 2 - 0.04},
                       {leg, leg, seat_h - 0.08});
    return m;
}

inline MeshModel make_table(Rng& rng) {
    MeshModel m;
    const double top_w = rng.uniform(0.8, 1.4);
    const double top_d = rng.uniform(0.5, 0.9);
    const double h = rng.uniform(0.6, 0.8);
    const double leg = rng.uniform(0.05, 0.09);
    add_cuboid(m, {0, 0, h}, {top_d, top_w, 0.06});
    for (int sx = -1; sx <= 1; sx += 2)
        for (int sy = -1; sy <= 1; sy += 2)
            add_cuboid(m, {sx * (top_d / 2 - leg), sy * (top_w / 2 - leg), h / 2},
                       {leg, leg, h});
    return m;
}

inline MeshModel make_category_mesh(const std::string& category, Rng& rng) {
    if (category == "box") return make_box(rng);
    if (category == "chair") return make_chair(rng);
    if (category == "table") return make_table(rng);
    throw ConfigError("unknown synth category: " + category);
}

// fixed projections used to expand pooled channels to 8 feature channels
constexpr double kNormalProj[8][3] = {
    {1.0, 0.0, 0.0},  {0.0, 1.0, 0.0},   {0.0, 0.0, 1.0},  {0.7, 0.7, 0.0},
    {0.0, 0.7, -0.7}, {-0.7, 0.0, 0.7},  {0.58, 0.58, 0.58}, {0.7, -0.7, 0.0}};
constexpr double kShadeProj[8] = {1.0, -1.0, 0.8, -0.8, 0.6, -0.6, 0.4, 1.2};
// light direction in camera space for the shading proxy
constexpr double kLightDir[3] = {0.3, -0.5, -0.81};

inline void standardize_channels(Tensor& t) {
    const int hw = t.dim(0) * t.dim(1);
    const int c = t.dim(2);
    for (int ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (int i = 0; i < hw; ++i) mean += t.data[static_cast<size_t>(i) * c + ch];
        mean /= hw;
        double var = 0.0;
        for (int i = 0; i < hw; ++i) {
            const double d = t.data[static_cast<size_t>(i) * c + ch] - mean;
            var += d * d;
        }
        var /= hw;
        const double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
        for (int i = 0; i < hw; ++i) {
            auto& v = t.data[static_cast<size_t>(i) * c + ch];
            v = static_cast<float>((v - mean) * inv);
        }
    }
}

// average-pool a dense per-pixel image (render size x render size, ch
// channels) down to pool x pool
inline std::vector<double> avg_pool(const std::vector<float>& img, int size, int ch, int pool) {
    std::vector<double> out(static_cast<size_t>(pool) * pool * ch, 0.0);
    const int block = size / pool;
    for (int py = 0; py < pool; ++py)
        for (int px = 0; px < pool; ++px)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int y = py * block; y < (py + 1) * block; ++y)
                    for (int x = px * block; x < (px + 1) * block; ++x)
                        acc += img[(static_cast<size_t>(y) * size + x) * ch + c];
                out[(static_cast<size_t>(py) * pool + px) * ch + c] =
                    acc / (static_cast<double>(block) * block);
            }
    return out;
}

struct ProxyFeatures {
    Tensor normal;    // 16x16x8
    Tensor reshading; // 16x16x8
};

inline ProxyFeatures make_proxy_features(const RenderedView& rv, int render_size) {
    constexpr int kPool = 16;
    const auto pooled_n = avg_pool(rv.normal_cam, render_size, 3, kPool);
    std::vector<float> shade(static_cast<size_t>(render_size) * render_size, 0.0f);
    for (size_t i = 0; i < shade.size(); ++i) {
        if (!rv.mask.bits[i]) continue;
        const double d = rv.normal_cam[3 * i + 0] * kLightDir[0] +
                         rv.normal_cam[3 * i + 1] * kLightDir[1] +
                         rv.normal_cam[3 * i + 2] * kLightDir[2];
        shade[i] = static_cast<float>(std::max(0.0, d));
    }
    const auto pooled_s = avg_pool(shade, render_size, 1, kPool);

    ProxyFeatures f{Tensor({kPool, kPool, 8}), Tensor({kPool, kPool, 8})};
    for (int i = 0; i < kPool * kPool; ++i) {
        for (int ch = 0; ch < 8; ++ch) {
            double n = 0.0;
            for (int c = 0; c < 3; ++c)
                n += kNormalProj[ch][c] * pooled_n[static_cast<size_t>(i) * 3 + c];
            f.normal.data[static_cast<size_t>(i) * 8 + ch] = static_cast<float>(n);
            f.reshading.data[static_cast<size_t>(i) * 8 + ch] =
                static_cast<float>(kShadeProj[ch] * pooled_s[static_cast<size_t>(i)]);
        }
    }
    standardize_channels(f.normal);
    standardize_channels(f.reshading);
    return f;
}

} // namespace synth

// Generates the dataset into out_dir (which must not exist yet); writes into
// a temporary sibling first and renames, so a crash never leaves a partial
// dataset behind.
inline void synth_generate(const SynthConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const fs::path out(out_dir);
    if (fs::exists(out)) throw IoError("synth: output directory already exists: " + out_dir);
    const fs::path tmp = out.string() + ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp / "meshes");
    fs::create_directories(tmp / "masks");
    fs::create_directories(tmp / "features");

    Rng rng(cfg.seed);

    // mesh pool
    struct PoolEntry {
        std::string id;
        std::string category;
        MeshModel mesh;
    };
    std::vector<PoolEntry> pool;
    for (const auto& cat : cfg.categories) {
        for (int i = 0; i < cfg.meshes_per_category; ++i) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "%02d", i);
            PoolEntry e;
            e.id = cat + "_" + buf;
            e.category = cat;
            Rng mesh_rng = rng.fork(std::hash<std::string>{}(e.id));
            e.mesh = synth::make_category_mesh(cat, mesh_rng);
            e.mesh.id = e.id;
            save_mesh_obj((tmp / "meshes" / (e.id + ".obj")).string(), e.mesh);
            pool.push_back(std::move(e));
        }
    }

    const CameraIntrinsics k = dmask_intrinsics();
    std::vector<Annotation> anns;
    anns.reserve(static_cast<size_t>(cfg.n_samples));
    for (int s = 0; s < cfg.n_samples; ++s) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%05d", s);
        const std::string sid = buf;
        const size_t mesh_idx = static_cast<size_t>(rng.uniform_int(pool.size()));
        const PoolEntry& entry = pool[mesh_idx];
        const ViewAngles view{rng.uniform(0.0, 360.0), rng.uniform(0.0, 90.0)};

        const RenderedView rv = render_geometry(entry.mesh, view, k, kDmaskSize);
        const auto feats = synth::make_proxy_features(rv, kDmaskSize);

        Annotation a;
        a.sample_id = sid;
        a.category = entry.category;
        a.mesh_id = entry.id;
        a.azimuth_deg = view.azimuth_deg;
        a.elevation_deg = view.elevation_deg;
        a.predicted_mask_path = "masks/" + sid + ".pgm";
        a.normal_path = "features/" + sid + "_normal.mlt";
        a.reshading_path = "features/" + sid + "_reshading.mlt";

        save_mask_pgm((tmp / a.predicted_mask_path).string(), rv.mask);
        save_tensor((tmp / a.normal_path).string(), feats.normal);
        save_tensor((tmp / a.reshading_path).string(), feats.reshading);
        anns.push_back(std::move(a));
    }
    save_annotations((tmp / "annotations.jsonl").string(), anns);

    nlohmann::json meta;
    meta["n_samples"] = cfg.n_samples;
    meta["categories"] = cfg.categories;
    meta["meshes_per_category"] = cfg.meshes_per_category;
    meta["seed"] = cfg.seed;
    meta["mask_size"] = kDmaskSize;
    {
        std::ofstream f(tmp / "meta.json", std::ios::trunc);
        f << meta.dump(2) << "\n";
        if (!f) throw IoError("synth: cannot write meta.json");
    }
    fs::rename(tmp, out);
}

} // namespace posekit
