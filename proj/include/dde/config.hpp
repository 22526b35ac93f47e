#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dde/acquisition.hpp"
#include "dde/hexbin.hpp"
#include "dde/mdm.hpp"
#include "dde/predictor.hpp"

namespace dde {

struct CatalogSource {
    std::string endpoint;  // empty: taken from DDE_CATALOG_ENDPOINT at run time
    std::string product_type = "S2MSI2A";
    std::filesystem::path download_dir;
    // Scenes after external atmospheric correction, in the local scene layout.
    std::filesystem::path corrected_dir;
};

// Fully resolved run configuration; relative paths are resolved against the
// directory of the config file.
struct PipelineConfig {
    RoiSpec roi;

    std::optional<std::filesystem::path> scene_dir;
    std::optional<CatalogSource> catalog;

    std::optional<std::filesystem::path> weights_path;
    std::optional<std::filesystem::path> probability_dir;
    ThresholdPreset threshold = ThresholdPreset::opt();

    std::size_t min_obs = kDefaultMinObs;
    ObservationCount count_mode = ObservationCount::per_pixel;

    double hex_width_m = kDefaultHexWidthM;
    double trim_fraction = kDefaultTrimFraction;
    std::size_t top_k = kDefaultTopK;

    std::optional<std::filesystem::path> scene_class_dir;
    std::optional<std::filesystem::path> land_polygons;

    unsigned workers = 1;
    std::filesystem::path output_dir = "runs";
    std::optional<std::string> run_id;

    // Throws ValidationError for contradictory or missing sources, bad
    // values, and referenced paths that do not exist.
    void validate() const;
};

// Parses the TOML config text. Unknown sections or keys raise ConfigError.
// Does not check that paths exist; call validate() for that.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
// parse_config + validate.
PipelineConfig load_config(const std::filesystem::path& path);

// Key-sorted JSON of every setting; stable across re-serialisation.
std::string canonical_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);

}  // namespace dde
