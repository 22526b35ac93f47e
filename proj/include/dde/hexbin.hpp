#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dde/geo.hpp"
#include "dde/mdm.hpp"

namespace dde {

inline constexpr double kEarthRadiusM = 6378137.0;
inline constexpr double kDefaultHexWidthM = 5000.0;
inline constexpr double kDefaultTrimFraction = 0.5;
inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr double kMaxProjectionLat = 89.0;

// Equirectangular projection about an origin; adequate for ROIs a few
// hexagons across.
struct LocalProjection {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double earth_radius = kEarthRadiusM;

    void validate() const;
};

struct XY {
    double x = 0.0;
    double y = 0.0;
};

XY project_local(double lat, double lon, const LocalProjection& proj);
LatLon unproject_local(const XY& xy, const LocalProjection& proj);

// Axial coordinates of a pointy-top hexagon. "Width" is the flat-to-flat
// diameter, so the circumradius is width / sqrt(3).
struct HexCoord {
    std::int64_t q = 0;
    std::int64_t r = 0;

    friend auto operator<=>(const HexCoord&, const HexCoord&) = default;
};

HexCoord assign_hex(const XY& xy, double width_m);
XY hex_center(const HexCoord& h, double width_m);
std::array<XY, 6> hex_vertices(const HexCoord& h, double width_m);
double hex_area(double width_m);

struct HexCell {
    HexCoord coord;
    XY centre_xy;
    LatLon centre;
    double trimmed_mean_mdm = 0.0;
    std::size_t pixel_count = 0;
    std::size_t kept_count = 0;
};

struct TopPixel {
    std::size_t row = 0;
    std::size_t col = 0;
    LatLon position;
    double mdm = 0.0;
};

struct TopKResult {
    std::vector<TopPixel> pixels;
    bool short_list = false;  // fewer valid pixels than requested
};

struct HexBinMap {
    double width_m = kDefaultHexWidthM;
    double trim_fraction = kDefaultTrimFraction;
    LocalProjection projection;
    std::vector<HexCell> cells;  // sorted by (q, r)
    std::vector<TopPixel> top_pixels;
    bool top_short_list = false;

    const HexCell* find(const HexCoord& h) const noexcept;
};

struct TrimmedMean {
    double mean = 0.0;
    std::size_t kept = 0;
};

// Sorts ascending, drops floor(n * trim_fraction) smallest values, averages the rest.
TrimmedMean left_trimmed_mean(std::span<const double> values, double trim_fraction);

struct AggregateOptions {
    double width_m = kDefaultHexWidthM;
    double trim_fraction = kDefaultTrimFraction;
    std::size_t top_k = kDefaultTopK;
    unsigned workers = 1;
};

HexBinMap aggregate(const MdmRaster& m, const LocalProjection& proj, const AggregateOptions& options = {});

// Highest-MDM valid pixels, descending; ties by (row, col) ascending.
TopKResult top_k(const MdmRaster& m, std::size_t k);

// q,r,centre_lat,centre_lon,trimmed_mean,pixel_count,kept_count
void write_cells_csv(const HexBinMap& map, const std::filesystem::path& path);
// rank,row,col,lat,lon,mdm
void write_top_csv(const HexBinMap& map, const std::filesystem::path& path);
void write_hexbin_json(const HexBinMap& map, const std::filesystem::path& path);
HexBinMap read_hexbin_json(const std::filesystem::path& path);

}  // namespace dde
