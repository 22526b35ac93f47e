#include "dde/synth.hpp"

#include <fstream>
#include <random>

#include <fmt/format.h>

#include "dde/error.hpp"
#include "dde/indices.hpp"
#include "dde/masking.hpp"
#include "dde/predictor.hpp"
#include "dde/raster.hpp"

namespace dde {

namespace fs = std::filesystem;

namespace {

struct Reflectance {
    float red, re2, nir, swir1;
};

constexpr Reflectance kWater{0.030f, 0.020f, 0.015f, 0.005f};
constexpr Reflectance kDebris{0.060f, 0.050f, 0.090f, 0.020f};
constexpr Reflectance kVegetation{0.030f, 0.150f, 0.350f, 0.200f};
constexpr Reflectance kCloud{0.300f, 0.300f, 0.300f, 0.300f};
constexpr Reflectance kGlint{0.060f, 0.050f, 0.095f, 0.020f};

constexpr std::size_t kTargetRows = 4;
constexpr std::size_t kTargetCols = 5;

// Bit-reproducible uniform draws.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : engine_(seed) {}
    double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>((*this)() * static_cast<double>(n)) % n; }

private:
    std::mt19937_64 engine_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw WriteError("failed writing '" + path.string() + "'");
}

std::string toml_path(const fs::path& p) { return p.generic_string(); }

}  // namespace

SynthScenario generate_scenario(const fs::path& root, const SynthOptions& o) {
    if (o.dates == 0 || o.width < 16 || o.height < 16 || !(o.pixel_deg > 0.0) || o.land_cols >= o.width / 2) {
        throw ArgumentError("synthetic scenario options out of range");
    }
    SynthScenario sc;
    sc.root = fs::absolute(root).lexically_normal();
    sc.scene_dir = sc.root / "scenes";
    sc.land_polygons = sc.root / "land.geojson";
    sc.weights = sc.root / "weights.json";
    sc.config = sc.root / "config.toml";
    fs::create_directories(sc.scene_dir);
    if (o.write_probabilities) {
        sc.probability_dir = sc.root / "probabilities";
        fs::create_directories(sc.probability_dir);
    }

    GeoGrid grid{o.width, o.height, o.origin_lon, o.origin_lat, o.pixel_deg, -o.pixel_deg, "EPSG:4326"};
    const Extent ext = grid.extent();
    const Date first{std::chrono::year{2024}, std::chrono::month{3}, std::chrono::day{1}};
    const auto day = [&](std::size_t k) {
        return Date{std::chrono::sys_days{first} + std::chrono::days{static_cast<int>(5 * k)}};
    };
    sc.roi = RoiSpec{{ext.max_y, ext.min_x}, {ext.min_y, ext.max_x}, first, day(o.dates - 1)};

    const std::size_t r0 = o.height / 2 - kTargetRows / 2, c0 = o.width / 2 - kTargetCols / 2;
    MaskPlane target(o.width, o.height, 0);
    for (std::size_t r = r0; r < r0 + kTargetRows; ++r) {
        for (std::size_t c = c0; c < c0 + kTargetCols; ++c) {
            target(r, c) = 1;
            sc.target_pixels.emplace_back(r, c);
        }
    }

    const BaselineWeights weights = BaselineWeights::synthetic_default();
    weights.save(sc.weights);

    Uniform rng(o.seed);
    for (std::size_t k = 0; k < o.dates; ++k) {
        const Date d = day(k);
        const std::string id = fmt::format("S2_SYN_{:03d}", k + 1);
        sc.scene_ids.push_back(id);

        // Cloud: a disc over a quarter of the scene on the first cloudy_dates dates,
        // covering the debris patch on the first of them.
        const bool cloudy = k < o.cloudy_dates;
        const double cy = k == 0 ? o.height / 2.0 : o.height * 0.25, cx = k == 0 ? o.width / 2.0 : o.width * 0.7;
        const double radius = o.width * 0.15;

        MaskPlane glint(o.width, o.height, 0);
        for (std::size_t n = 0; n < o.sporadic_per_date; ++n) {
            glint(rng.index(o.height), o.land_cols + rng.index(o.width - o.land_cols)) = 1;
        }

        BandQuad q{grid, FloatPlane(o.width, o.height), FloatPlane(o.width, o.height), FloatPlane(o.width, o.height),
                   FloatPlane(o.width, o.height)};
        FloatPlane classes(o.width, o.height, SceneClass::water);
        for (std::size_t r = 0; r < o.height; ++r) {
            for (std::size_t c = 0; c < o.width; ++c) {
                Reflectance px = kWater;
                float cls = SceneClass::water;
                const double dy = r + 0.5 - cy, dx = c + 0.5 - cx;
                if (c < o.land_cols) {
                    px = kVegetation;
                    cls = SceneClass::clear_land;
                } else if (cloudy && dx * dx + dy * dy < radius * radius) {
                    px = kCloud;
                    cls = SceneClass::cloud;
                } else if (target(r, c)) {
                    px = kDebris;
                } else if (glint(r, c)) {
                    px = kGlint;
                }
                const auto noise = [&] { return static_cast<float>((rng() - 0.5) * 0.002); };
                q.red(r, c) = px.red + noise();
                q.re2(r, c) = px.re2 + noise();
                q.nir(r, c) = px.nir + noise();
                q.swir1(r, c) = px.swir1 + noise();
                classes(r, c) = cls;
            }
        }

        const fs::path folder = sc.scene_dir / id;
        fs::create_directories(folder);
        write_raster(q.to_scene(d), folder / "scene.tif");
        write_raster(SceneRaster{grid, {{"class", classes, std::nullopt}}, d, 255.0f}, folder / "class.tif");
        if (o.write_probabilities) {
            write_raster(predict_baseline(q, weights, d).to_scene(),
                         sc.probability_dir / probability_file_name(id, d));
        }
    }

    // Land strip polygon, padded outward so only its east edge crosses the grid.
    const double east = o.origin_lon + static_cast<double>(o.land_cols) * o.pixel_deg;
    const double pad = 10 * o.pixel_deg;
    write_text(sc.land_polygons,
               fmt::format(R"({{"type": "FeatureCollection", "features": [{{"type": "Feature", "properties": {{}},
  "geometry": {{"type": "Polygon", "coordinates": [[[{0:.8f}, {2:.8f}], [{1:.8f}, {2:.8f}], [{1:.8f}, {3:.8f}], [{0:.8f}, {3:.8f}], [{0:.8f}, {2:.8f}]]]}}}}]}}
)",
                           ext.min_x - pad, east, ext.min_y - pad, ext.max_y + pad));

    write_text(sc.config, fmt::format(R"([roi]
corner_a = [{:.8f}, {:.8f}]
corner_b = [{:.8f}, {:.8f}]
date_start = {}
date_end = {}

[scenes]
local_dir = "{}"

[predictor]
weights = "{}"
threshold = "opt"

[mdm]
min_obs = {}

[masks]
land_polygons = "{}"

[run]
output_dir = "{}"
)",
                                      sc.roi.corner_a.lat, sc.roi.corner_a.lon, sc.roi.corner_b.lat,
                                      sc.roi.corner_b.lon, format_date(sc.roi.date_start),
                                      format_date(sc.roi.date_end), toml_path(sc.scene_dir), toml_path(sc.weights),
                                      o.min_obs, toml_path(sc.land_polygons), toml_path(sc.root / "runs")));
    return sc;
}

}  // namespace dde
