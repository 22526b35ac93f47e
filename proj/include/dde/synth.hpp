#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dde/acquisition.hpp"

namespace dde {

// Demo scenario: a time series of small EPSG:4326 water scenes with a
// persistent floating-debris patch at the ROI centre, a vegetated land strip
// on the west edge, clouds on some dates and one-off bright pixels.
struct SynthOptions {
    std::size_t dates = 5;
    std::size_t width = 256;
    std::size_t height = 256;
    double pixel_deg = 0.0005;
    double origin_lat = 40.064;  // north edge
    double origin_lon = 19.936;  // west edge
    std::size_t land_cols = 40;
    std::size_t cloudy_dates = 2;
    std::size_t sporadic_per_date = 30;
    std::size_t min_obs = 3;
    std::uint64_t seed = 20240301;
    // Also write probs_<id>_<date>.tif files for the external-probability path.
    bool write_probabilities = false;
};

struct SynthScenario {
    std::filesystem::path root;
    std::filesystem::path scene_dir;
    std::filesystem::path probability_dir;  // empty unless requested
    std::filesystem::path land_polygons;
    std::filesystem::path weights;
    std::filesystem::path config;  // baseline-predictor config, output under root/runs
    RoiSpec roi;
    std::vector<std::string> scene_ids;
    std::vector<std::pair<std::size_t, std::size_t>> target_pixels;  // (row, col) on the scene grid
};

// Writes the scenario below `root` (created if missing). Deterministic in the options.
SynthScenario generate_scenario(const std::filesystem::path& root, const SynthOptions& options = {});

}  // namespace dde
