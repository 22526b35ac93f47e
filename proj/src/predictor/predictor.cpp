#include "dde/predictor.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "dde/error.hpp"

namespace dde {

namespace fs = std::filesystem;
using nlohmann::json;

SceneRaster ProbabilityRaster::to_scene() const {
    SceneRaster s;
    s.grid = grid;
    s.acquisition_date = date;
    s.nodata = kNoDataF;
    s.bands.push_back({"prob", probs, std::nullopt});
    return s;
}

ThresholdPreset ThresholdPreset::custom(double value) {
    if (!(value > 0.0 && value < 1.0)) {
        throw ArgumentError("threshold must lie in (0, 1), got " + std::to_string(value));
    }
    return ThresholdPreset(Name::custom, value);
}

ThresholdPreset ThresholdPreset::parse(std::string_view text) {
    if (text == "opt") return opt();
    if (text == "hp") return hp();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ArgumentError("threshold must be 'opt', 'hp' or a number, got '" + std::string(text) + "'");
    }
    return custom(v);
}

std::string ThresholdPreset::label() const {
    switch (name_) {
        case Name::opt: return "opt";
        case Name::hp: return "hp";
        case Name::custom: break;
    }
    return "custom";
}

const std::array<std::string_view, 6>& BaselineWeights::feature_names() {
    static const std::array<std::string_view, 6> names{"red", "re2", "nir", "swir1", "ndvi", "fdi"};
    return names;
}

void BaselineWeights::validate() const {
    if (!std::isfinite(bias)) throw ConfigError("baseline weights: bias is not finite");
    for (auto name : feature_names()) {
        auto it = coefficients.find(std::string(name));
        if (it == coefficients.end()) {
            throw ConfigError("baseline weights: missing coefficient '" + std::string(name) + "'");
        }
        if (!std::isfinite(it->second)) {
            throw ConfigError("baseline weights: coefficient '" + std::string(name) + "' is not finite");
        }
    }
}

BaselineWeights BaselineWeights::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open weights file '" + path.string() + "'");
    BaselineWeights w;
    try {
        json j = json::parse(in);
        w.bias = j.at("bias").get<double>();
        for (auto& [k, v] : j.at("coefficients").items()) w.coefficients[k] = v.get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("weights file '" + path.string() + "': " + e.what());
    }
    w.validate();
    return w;
}

void BaselineWeights::save(const fs::path& path) const {
    json j;
    j["bias"] = bias;
    j["coefficients"] = coefficients;
    std::ofstream out(path);
    if (!out) throw WriteError("cannot write weights file '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

BaselineWeights BaselineWeights::synthetic_default() {
    return {-6.0, {{"red", 0.0}, {"re2", 0.0}, {"nir", 0.0}, {"swir1", 0.0}, {"ndvi", -4.0}, {"fdi", 120.0}}};
}

ProbabilityRaster predict_baseline(const BandQuad& q, const BaselineWeights& w, Date date) {
    w.validate();
    q.validate();
    const auto& c = w.coefficients;
    const double c_red = c.at("red"), c_re2 = c.at("re2"), c_nir = c.at("nir"), c_swir1 = c.at("swir1"),
                 c_ndvi = c.at("ndvi"), c_fdi = c.at("fdi");

    ProbabilityRaster out{q.grid, FloatPlane(q.grid.width, q.grid.height, kNoDataF), date,
                          ProbabilitySource::baseline};
    for (std::size_t i = 0; i < out.probs.size(); ++i) {
        const double red = q.red[i], re2 = q.re2[i], nir = q.nir[i], swir1 = q.swir1[i];
        const double nd = ndvi_value(red, nir);
        const double fd = fdi_value(red, re2, nir, swir1, q.wavelengths);
        if (std::isnan(nd) || std::isnan(fd)) continue;
        const double z = w.bias + c_red * red + c_re2 * re2 + c_nir * nir + c_swir1 * swir1 + c_ndvi * nd + c_fdi * fd;
        out.probs[i] = static_cast<float>(1.0 / (1.0 + std::exp(-z)));
    }
    return out;
}

ProbabilityRaster ingest_probability(const fs::path& path, Date date) {
    SceneRaster r = read_raster(path);
    if (r.bands.size() != 1) {
        throw FormatError("probability raster '" + path.string() + "' must have exactly one band");
    }
    ProbabilityRaster out{r.grid, std::move(r.bands.front().values), date, ProbabilitySource::external};
    for (auto& v : out.probs.values()) {
        if (r.is_nodata(v)) {
            v = kNoDataF;
            continue;
        }
        if (v < -kProbabilityTolerance || v > 1.0 + kProbabilityTolerance) {
            throw IntegrityError("probability raster '" + path.string() + "' holds out-of-range value " +
                                 std::to_string(v));
        }
        v = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

DetectionRaster threshold(const ProbabilityRaster& p, const ThresholdPreset& t) {
    DetectionRaster d{p.grid, MaskPlane(p.grid.width, p.grid.height, 0), MaskPlane(p.grid.width, p.grid.height, 0),
                      t.value()};
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        float v = p.probs[i];
        if (std::isnan(v)) continue;
        d.valid[i] = 1;
        d.detected[i] = meets_threshold(v, t.value()) ? 1 : 0;
    }
    return d;
}

std::string probability_file_name(std::string_view scene_id, Date date, std::string_view ext) {
    return "probs_" + std::string(scene_id) + "_" + format_date(date) + std::string(ext);
}

std::optional<fs::path> find_probability_file(const fs::path& dir, std::string_view scene_id, Date date) {
    for (auto ext : {".tif", ".tiff", ".json"}) {
        auto p = dir / probability_file_name(scene_id, date, ext);
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

}  // namespace dde
