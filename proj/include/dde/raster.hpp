#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dde/date.hpp"
#include "dde/geo.hpp"
#include "dde/plane.hpp"

namespace dde {

struct Band {
    std::string name;
    FloatPlane values;
    std::optional<double> wavelength_nm;
};

struct BandInfo {
    std::string name;
    std::optional<double> wavelength_nm;

    friend bool operator==(const BandInfo&, const BandInfo&) = default;
};

// One acquisition: georeferenced multi-band float32 reflectance grid.
struct SceneRaster {
    GeoGrid grid;
    std::vector<Band> bands;
    std::optional<Date> acquisition_date;
    float nodata = kNoDataF;

    // Throws ArgumentError (EmptyRasterError for zero bands) when an invariant is broken.
    void validate() const;

    bool is_nodata(float v) const noexcept { return std::isnan(v) || v == nodata; }

    const Band* find_band(const std::string& name) const noexcept;
    const Band& band(const std::string& name) const;
};

// Header-level description of a raster file, read without the payload.
struct RasterInfo {
    GeoGrid grid;
    std::vector<BandInfo> bands;
    std::optional<Date> acquisition_date;
    float nodata = kNoDataF;
};

enum class RasterFormat { sidecar, geotiff };

// .tif / .tiff select GeoTIFF; anything else is the JSON + raw sidecar pair.
RasterFormat format_for(const std::filesystem::path& path);

// The sidecar pair: `<stem>.json` header and `<stem>.raw` little-endian float32, band-major.
std::filesystem::path sidecar_header_path(const std::filesystem::path& path);
std::filesystem::path sidecar_data_path(const std::filesystem::path& path);

SceneRaster read_raster(const std::filesystem::path& path);
RasterInfo read_raster_info(const std::filesystem::path& path);
void write_raster(const SceneRaster& raster, const std::filesystem::path& path);

// Pixel window [row0, row0 + rows) x [col0, col0 + cols).
struct PixelWindow {
    std::size_t row0 = 0;
    std::size_t col0 = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

// Smallest window covering the part of a lon/lat box (x = lon, y = lat) that
// falls on the grid; nullopt when they do not overlap.
std::optional<PixelWindow> lat_lon_window(const GeoGrid& grid, const Extent& lon_lat_box);
GeoGrid crop_grid(const GeoGrid& grid, const PixelWindow& w);
SceneRaster crop(const SceneRaster& raster, const PixelWindow& w);

// Grid, band metadata, date, nodata bit pattern and payload bit patterns all equal.
bool bitwise_equal(const SceneRaster& a, const SceneRaster& b);

namespace detail {
SceneRaster read_sidecar(const std::filesystem::path& path, bool payload);
void write_sidecar(const SceneRaster& raster, const std::filesystem::path& path);
SceneRaster read_geotiff(const std::filesystem::path& path, bool payload);
void write_geotiff(const SceneRaster& raster, const std::filesystem::path& path);
}  // namespace detail

}  // namespace dde
