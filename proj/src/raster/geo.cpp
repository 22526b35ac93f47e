#include "dde/geo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "dde/error.hpp"

namespace dde {

Extent Extent::intersect(const Extent& o) const noexcept {
    return {std::max(min_x, o.min_x), std::max(min_y, o.min_y), std::min(max_x, o.max_x),
            std::min(max_y, o.max_y)};
}

void GeoGrid::validate() const {
    if (width == 0 || height == 0) throw ArgumentError("grid must have positive width and height");
    if (!(pixel_size_x > 0.0) || !std::isfinite(pixel_size_x)) {
        throw ArgumentError("grid pixel_size_x must be positive");
    }
    if (pixel_size_y == 0.0 || !std::isfinite(pixel_size_y)) {
        throw ArgumentError("grid pixel_size_y must be nonzero");
    }
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
        throw ArgumentError("grid origin must be finite");
    }
}

Extent GeoGrid::extent() const noexcept {
    double x0 = origin_x, x1 = x_at(static_cast<double>(width));
    double y0 = origin_y, y1 = y_at(static_cast<double>(height));
    return {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
}

void require_same_grid(const GeoGrid& a, const GeoGrid& b, const char* what) {
    if (!(a == b)) throw ArgumentError(std::string(what) + ": grids do not match");
}

namespace {

constexpr double kA = 6378137.0;
constexpr double kF = 1.0 / 298.257223563;
constexpr double kK0 = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;
constexpr double kDeg = std::numbers::pi / 180.0;

struct TmSeries {
    double n, big_a;
    double alpha[3], beta[3], delta[3];
};

const TmSeries& series() {
    static const TmSeries s = [] {
        TmSeries t{};
        double n = kF / (2.0 - kF);
        double n2 = n * n, n3 = n2 * n;
        t.n = n;
        t.big_a = kA / (1.0 + n) * (1.0 + n2 / 4.0 + n2 * n2 / 64.0);
        t.alpha[0] = n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3;
        t.alpha[1] = 13.0 / 48.0 * n2 - 3.0 / 5.0 * n3;
        t.alpha[2] = 61.0 / 240.0 * n3;
        t.beta[0] = n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3;
        t.beta[1] = 1.0 / 48.0 * n2 + 1.0 / 15.0 * n3;
        t.beta[2] = 17.0 / 480.0 * n3;
        t.delta[0] = 2.0 * n - 2.0 / 3.0 * n2 - 2.0 * n3;
        t.delta[1] = 7.0 / 3.0 * n2 - 8.0 / 5.0 * n3;
        t.delta[2] = 56.0 / 15.0 * n3;
        return t;
    }();
    return s;
}

double central_meridian(int zone) { return (-183.0 + 6.0 * zone) * kDeg; }

}  // namespace

void utm_forward(int zone, bool south, const LatLon& ll, double& easting, double& northing) {
    const auto& s = series();
    double phi = ll.lat * kDeg;
    double dlam = ll.lon * kDeg - central_meridian(zone);
    double c = 2.0 * std::sqrt(s.n) / (1.0 + s.n);
    double t = std::sinh(std::atanh(std::sin(phi)) - c * std::atanh(c * std::sin(phi)));
    double xi_p = std::atan2(t, std::cos(dlam));
    double eta_p = std::atanh(std::sin(dlam) / std::sqrt(1.0 + t * t));
    double xi = xi_p, eta = eta_p;
    for (int j = 1; j <= 3; ++j) {
        xi += s.alpha[j - 1] * std::sin(2 * j * xi_p) * std::cosh(2 * j * eta_p);
        eta += s.alpha[j - 1] * std::cos(2 * j * xi_p) * std::sinh(2 * j * eta_p);
    }
    easting = kFalseEasting + kK0 * s.big_a * eta;
    northing = (south ? kFalseNorthingSouth : 0.0) + kK0 * s.big_a * xi;
}

LatLon utm_inverse(int zone, bool south, double easting, double northing) {
    const auto& s = series();
    double xi = (northing - (south ? kFalseNorthingSouth : 0.0)) / (kK0 * s.big_a);
    double eta = (easting - kFalseEasting) / (kK0 * s.big_a);
    double xi_p = xi, eta_p = eta;
    for (int j = 1; j <= 3; ++j) {
        xi_p -= s.beta[j - 1] * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
        eta_p -= s.beta[j - 1] * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
    }
    double chi = std::asin(std::sin(xi_p) / std::cosh(eta_p));
    double phi = chi;
    for (int j = 1; j <= 3; ++j) phi += s.delta[j - 1] * std::sin(2 * j * chi);
    double lam = central_meridian(zone) + std::atan2(std::sinh(eta_p), std::cos(xi_p));
    return {phi / kDeg, lam / kDeg};
}

Geolocator::Geolocator(const std::string& crs_id) {
    if (crs_id == "EPSG:4326" || crs_id == "WGS84" || crs_id == "OGC:CRS84") return;
    int code = 0;
    if (crs_id.rfind("EPSG:", 0) == 0) {
        const char* first = crs_id.data() + 5;
        const char* last = crs_id.data() + crs_id.size();
        auto [ptr, ec] = std::from_chars(first, last, code);
        if (ec != std::errc{} || ptr != last) code = 0;
    }
    if (code > 32600 && code <= 32660) {
        zone_ = code - 32600;
    } else if (code > 32700 && code <= 32760) {
        zone_ = code - 32700;
        south_ = true;
    } else {
        throw ProjectionError("unsupported CRS for geolocation: '" + crs_id + "'");
    }
}

LatLon Geolocator::to_lat_lon(double x, double y) const {
    if (geographic()) return {y, x};
    return utm_inverse(zone_, south_, x, y);
}

void Geolocator::from_lat_lon(const LatLon& ll, double& x, double& y) const {
    if (geographic()) {
        x = ll.lon;
        y = ll.lat;
        return;
    }
    utm_forward(zone_, south_, ll, x, y);
}

}  // namespace dde
