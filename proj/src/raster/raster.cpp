#include "dde/raster.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#include "dde/error.hpp"

namespace dde {

namespace fs = std::filesystem;

void SceneRaster::validate() const {
    grid.validate();
    if (bands.empty()) throw EmptyRasterError("raster has no bands");
    std::set<std::string> names;
    for (const auto& b : bands) {
        if (!names.insert(b.name).second) throw ArgumentError("duplicate band name '" + b.name + "'");
        if (b.values.width() != grid.width || b.values.height() != grid.height) {
            throw ArgumentError("band '" + b.name + "' does not match the grid dimensions");
        }
        for (float v : b.values.values()) {
            if (!std::isfinite(v) && !is_nodata(v)) {
                throw ArgumentError("band '" + b.name + "' holds a non-finite value that is not nodata");
            }
        }
    }
}

const Band* SceneRaster::find_band(const std::string& name) const noexcept {
    auto it = std::find_if(bands.begin(), bands.end(), [&](const Band& b) { return b.name == name; });
    return it == bands.end() ? nullptr : &*it;
}

const Band& SceneRaster::band(const std::string& name) const {
    if (const Band* b = find_band(name)) return *b;
    throw ArgumentError("raster has no band named '" + name + "'");
}

RasterFormat format_for(const fs::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return (ext == ".tif" || ext == ".tiff") ? RasterFormat::geotiff : RasterFormat::sidecar;
}

fs::path sidecar_header_path(const fs::path& path) {
    auto p = path;
    return p.replace_extension(".json");
}

fs::path sidecar_data_path(const fs::path& path) {
    auto p = path;
    return p.replace_extension(".raw");
}

SceneRaster read_raster(const fs::path& path) {
    SceneRaster r = format_for(path) == RasterFormat::geotiff ? detail::read_geotiff(path, true)
                                                              : detail::read_sidecar(path, true);
    if (r.bands.empty()) throw EmptyRasterError("raster '" + path.string() + "' has no bands");
    return r;
}

RasterInfo read_raster_info(const fs::path& path) {
    SceneRaster r = format_for(path) == RasterFormat::geotiff ? detail::read_geotiff(path, false)
                                                              : detail::read_sidecar(path, false);
    if (r.bands.empty()) throw EmptyRasterError("raster '" + path.string() + "' has no bands");
    RasterInfo info{r.grid, {}, r.acquisition_date, r.nodata};
    for (auto& b : r.bands) info.bands.push_back({b.name, b.wavelength_nm});
    return info;
}

void write_raster(const SceneRaster& raster, const fs::path& path) {
    raster.validate();
    auto dir = path.parent_path();
    if (!dir.empty() && !fs::is_directory(dir)) {
        throw WriteError("cannot write '" + path.string() + "': directory does not exist");
    }
    if (format_for(path) == RasterFormat::geotiff) {
        detail::write_geotiff(raster, path);
    } else {
        detail::write_sidecar(raster, path);
    }
}

bool bitwise_equal(const SceneRaster& a, const SceneRaster& b) {
    if (!(a.grid == b.grid) || a.acquisition_date != b.acquisition_date) return false;
    if (std::bit_cast<std::uint32_t>(a.nodata) != std::bit_cast<std::uint32_t>(b.nodata)) return false;
    if (a.bands.size() != b.bands.size()) return false;
    for (std::size_t i = 0; i < a.bands.size(); ++i) {
        const auto& x = a.bands[i];
        const auto& y = b.bands[i];
        if (x.name != y.name || x.wavelength_nm != y.wavelength_nm) return false;
        if (!x.values.same_shape(y.values)) return false;
        auto xv = x.values.values();
        auto yv = y.values.values();
        if (std::memcmp(xv.data(), yv.data(), xv.size_bytes()) != 0) return false;
    }
    return true;
}

}  // namespace dde

namespace dde {

std::optional<PixelWindow> lat_lon_window(const GeoGrid& grid, const Extent& box) {
    const Geolocator geo(grid.crs_id);
    // Sample the box edges so curved projected outlines are covered.
    constexpr int kSamples = 16;
    double c_lo = std::numeric_limits<double>::infinity(), c_hi = -c_lo;
    double r_lo = c_lo, r_hi = -c_lo;
    for (int i = 0; i <= kSamples; ++i) {
        const double t = static_cast<double>(i) / kSamples;
        const double lon = box.min_x + t * (box.max_x - box.min_x);
        const double lat = box.min_y + t * (box.max_y - box.min_y);
        for (const LatLon ll : {LatLon{box.min_y, lon}, LatLon{box.max_y, lon}, LatLon{lat, box.min_x},
                                LatLon{lat, box.max_x}}) {
            double x = 0.0, y = 0.0;
            geo.from_lat_lon(ll, x, y);
            const double c = grid.col_at(x), r = grid.row_at(y);
            c_lo = std::min(c_lo, c);
            c_hi = std::max(c_hi, c);
            r_lo = std::min(r_lo, r);
            r_hi = std::max(r_hi, r);
        }
    }
    const double w = static_cast<double>(grid.width), h = static_cast<double>(grid.height);
    const double c0 = std::clamp(std::floor(c_lo), 0.0, w), c1 = std::clamp(std::ceil(c_hi), 0.0, w);
    const double r0 = std::clamp(std::floor(r_lo), 0.0, h), r1 = std::clamp(std::ceil(r_hi), 0.0, h);
    if (!(c1 > c0 && r1 > r0)) return std::nullopt;
    return PixelWindow{static_cast<std::size_t>(r0), static_cast<std::size_t>(c0), static_cast<std::size_t>(r1 - r0),
                       static_cast<std::size_t>(c1 - c0)};
}

GeoGrid crop_grid(const GeoGrid& grid, const PixelWindow& w) {
    if (w.rows == 0 || w.cols == 0 || w.row0 + w.rows > grid.height || w.col0 + w.cols > grid.width) {
        throw ArgumentError("crop window outside the grid");
    }
    GeoGrid out = grid;
    out.width = w.cols;
    out.height = w.rows;
    out.origin_x = grid.x_at(static_cast<double>(w.col0));
    out.origin_y = grid.y_at(static_cast<double>(w.row0));
    return out;
}

SceneRaster crop(const SceneRaster& raster, const PixelWindow& w) {
    SceneRaster out;
    out.grid = crop_grid(raster.grid, w);
    out.acquisition_date = raster.acquisition_date;
    out.nodata = raster.nodata;
    for (const auto& b : raster.bands) {
        FloatPlane p(w.cols, w.rows);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const auto src = b.values.row(w.row0 + r).subspan(w.col0, w.cols);
            std::copy(src.begin(), src.end(), p.row(r).begin());
        }
        out.bands.push_back({b.name, std::move(p), b.wavelength_nm});
    }
    return out;
}

}  // namespace dde
