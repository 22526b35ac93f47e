#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dde/geo.hpp"
#include "dde/plane.hpp"
#include "dde/predictor.hpp"
#include "dde/raster.hpp"

namespace dde {

// Fmask 4 scene-class codes.
struct SceneClass {
    static constexpr std::uint8_t clear_land = 0;
    static constexpr std::uint8_t water = 1;
    static constexpr std::uint8_t cloud_shadow = 2;
    static constexpr std::uint8_t snow = 3;
    static constexpr std::uint8_t cloud = 4;
    static constexpr std::uint8_t nodata = 255;

    static bool known(std::uint8_t code) noexcept { return code <= cloud || code == nodata; }
};

struct SceneClassMask {
    GeoGrid grid;
    MaskPlane classes;

    void validate() const;
    // Reads the first band; the raster's nodata sentinel becomes SceneClass::nodata.
    static SceneClassMask from_raster(const SceneRaster& raster);
    static SceneClassMask load(const std::filesystem::path& path);
};

using Ring = std::vector<LatLon>;

// rings[0] is the outer boundary, any further rings are holes.
struct Polygon {
    std::vector<Ring> rings;
    Extent bounds() const;  // x = lon, y = lat
};

struct LandPolygons {
    std::vector<Polygon> polygons;
    std::string source_name;

    // Throws GeometryError for unclosed rings or rings with fewer than 3 distinct vertices.
    void validate() const;
    // Keeps polygons whose bounding box meets the lat/lon box.
    LandPolygons crop(const Extent& lon_lat_box) const;

    // Polygon / MultiPolygon geometries, bare or inside Feature / FeatureCollection.
    static LandPolygons parse_geojson(std::string_view text, std::string source_name = "geojson");
    static LandPolygons load_geojson(const std::filesystem::path& path);
};

enum MaskSource : std::uint8_t {
    kMaskSceneClass = 1u << 0,
    kMaskLand = 1u << 1,
    kMaskNoData = 1u << 2,
};

struct ValidityMask {
    GeoGrid grid;
    MaskPlane valid;
    std::uint8_t provenance = 0;  // MaskSource bits

    static ValidityMask all_valid(const GeoGrid& grid);
    std::size_t valid_count() const;
};

// Keeps water pixels; every other class becomes NaN.
ProbabilityRaster apply_scene_mask(const ProbabilityRaster& p, const SceneClassMask& m);

// Pixel valid iff its centre lies outside every polygon (even-odd rule over
// each polygon's rings, so holes are valid again).
ValidityMask rasterize_land(const LandPolygons& polys, const GeoGrid& grid, unsigned workers = 1);

ValidityMask combine_masks(const ValidityMask& a, const ValidityMask& b);

ValidityMask validity_from_probabilities(const ProbabilityRaster& p);
ProbabilityRaster apply_validity(const ProbabilityRaster& p, const ValidityMask& m);

}  // namespace dde
