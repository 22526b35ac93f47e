#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "dde/date.hpp"
#include "dde/geo.hpp"
#include "dde/indices.hpp"
#include "dde/plane.hpp"
#include "dde/raster.hpp"

namespace dde {

enum class ProbabilitySource { baseline, external };

// Per-pixel MD&SP probability for one date. NaN marks invalid pixels.
struct ProbabilityRaster {
    GeoGrid grid;
    FloatPlane probs;
    Date date;
    ProbabilitySource source = ProbabilitySource::external;

    // Single-band raster ("prob") with NaN nodata, for writing or stacking.
    SceneRaster to_scene() const;
};

// Detection threshold. "opt" maximises F1 on the validation PR curve,
// "hp" is the high-precision operating point.
class ThresholdPreset {
public:
    enum class Name { opt, hp, custom };

    static constexpr double kOptValue = 0.815;
    static constexpr double kHpValue = 0.99;

    static ThresholdPreset opt() { return ThresholdPreset(Name::opt, kOptValue); }
    static ThresholdPreset hp() { return ThresholdPreset(Name::hp, kHpValue); }
    // Throws ArgumentError unless 0 < value < 1.
    static ThresholdPreset custom(double value);
    // "opt", "hp", or a decimal in (0, 1).
    static ThresholdPreset parse(std::string_view text);

    Name name() const noexcept { return name_; }
    double value() const noexcept { return value_; }
    std::string label() const;

    friend bool operator==(const ThresholdPreset&, const ThresholdPreset&) = default;

private:
    ThresholdPreset(Name n, double v) : name_(n), value_(v) {}
    Name name_;
    double value_;
};

// Logistic model over {red, re2, nir, swir1, ndvi, fdi}.
struct BaselineWeights {
    double bias = 0.0;
    std::map<std::string, double> coefficients;

    static const std::array<std::string_view, 6>& feature_names();

    // Throws ConfigError when a feature coefficient is missing or non-finite.
    void validate() const;

    static BaselineWeights load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    // Hand-set synthetic-test weights: positive FDI, negative NDVI.
    static BaselineWeights synthetic_default();
};

struct DetectionRaster {
    GeoGrid grid;
    MaskPlane detected;
    MaskPlane valid;
    double threshold_used = 0.0;
};

ProbabilityRaster predict_baseline(const BandQuad& q, const BaselineWeights& w, Date date);

// Reads a single-band probability raster. Values more than 1e-6 outside
// [0, 1] raise IntegrityError; smaller excursions are clamped.
ProbabilityRaster ingest_probability(const std::filesystem::path& path, Date date);

inline constexpr double kProbabilityTolerance = 1e-6;

// Detection test shared by thresholding, MDM and PR curves. Probabilities are
// float32, so the threshold is compared at float32 precision: a stored 0.815
// meets the 0.815 threshold.
inline bool meets_threshold(float p, double t) noexcept { return p >= static_cast<float>(t); }

// detected = prob >= threshold on valid pixels.
DetectionRaster threshold(const ProbabilityRaster& p, const ThresholdPreset& t);

// probs_<scene_id>_<YYYY-MM-DD>.<ext>
std::string probability_file_name(std::string_view scene_id, Date date, std::string_view ext = ".tif");
// Looks for the .tif or .json probability file of a scene in `dir`.
std::optional<std::filesystem::path> find_probability_file(const std::filesystem::path& dir,
                                                           std::string_view scene_id, Date date);

}  // namespace dde
