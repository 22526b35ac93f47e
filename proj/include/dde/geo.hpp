#pragma once

#include <cstddef>
#include <string>

namespace dde {

struct Extent {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    bool empty() const noexcept { return !(max_x > min_x && max_y > min_y); }
    Extent intersect(const Extent& o) const noexcept;
    bool intersects(const Extent& o) const noexcept { return !intersect(o).empty(); }
};

// Affine north-up pixel grid. pixel_size_y is negative for north-up rasters,
// so origin is the outer corner of pixel (0, 0).
struct GeoGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size_x = 1.0;
    double pixel_size_y = -1.0;
    std::string crs_id;

    void validate() const;

    // Continuous pixel coordinates (col, row) to CRS coordinates and back.
    double x_at(double col) const noexcept { return origin_x + col * pixel_size_x; }
    double y_at(double row) const noexcept { return origin_y + row * pixel_size_y; }
    double col_at(double x) const noexcept { return (x - origin_x) / pixel_size_x; }
    double row_at(double y) const noexcept { return (y - origin_y) / pixel_size_y; }

    double center_x(std::size_t col) const noexcept { return x_at(static_cast<double>(col) + 0.5); }
    double center_y(std::size_t row) const noexcept { return y_at(static_cast<double>(row) + 0.5); }

    Extent extent() const noexcept;
    std::size_t pixel_count() const noexcept { return width * height; }

    bool same_shape(const GeoGrid& o) const noexcept { return width == o.width && height == o.height; }
    friend bool operator==(const GeoGrid&, const GeoGrid&) = default;
};

// Throws ArgumentError unless both grids are identical.
void require_same_grid(const GeoGrid& a, const GeoGrid& b, const char* what);

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

// Converts CRS coordinates of a grid to WGS84 latitude/longitude. Supports
// geographic WGS84 (EPSG:4326) and the WGS84 UTM zones (EPSG:326zz / 327zz),
// which cover corrected Sentinel-2 products.
class Geolocator {
public:
    explicit Geolocator(const std::string& crs_id);

    bool geographic() const noexcept { return zone_ == 0; }
    LatLon to_lat_lon(double x, double y) const;
    void from_lat_lon(const LatLon& ll, double& x, double& y) const;

    LatLon pixel_center(const GeoGrid& grid, std::size_t row, std::size_t col) const {
        return to_lat_lon(grid.center_x(col), grid.center_y(row));
    }

private:
    int zone_ = 0;  // 0 = geographic
    bool south_ = false;
};

// Krüger-series transverse Mercator on the WGS84 ellipsoid.
void utm_forward(int zone, bool south, const LatLon& ll, double& easting, double& northing);
LatLon utm_inverse(int zone, bool south, double easting, double northing);

}  // namespace dde
