#include "dde/hexbin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "json.hpp"

#include "dde/error.hpp"
#include "dde/parallel.hpp"

namespace dde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
const double kSqrt3 = std::sqrt(3.0);

struct Member {
    HexCoord cell;
    double value;

    friend bool operator<(const Member& a, const Member& b) {
        if (a.cell != b.cell) return a.cell < b.cell;
        return a.value < b.value;
    }
};
}  // namespace

void LocalProjection::validate() const {
    if (!(std::abs(origin_lat) < kMaxProjectionLat)) {
        throw ProjectionError("projection origin latitude must lie within +/-89 degrees");
    }
    if (!(earth_radius > 0.0)) throw ProjectionError("earth radius must be positive");
}

XY project_local(double lat, double lon, const LocalProjection& proj) {
    proj.validate();
    if (!(std::abs(lat) <= kMaxProjectionLat)) throw ProjectionError("latitude beyond +/-89 degrees");
    const double x = proj.earth_radius * (lon - proj.origin_lon) * kDeg * std::cos(proj.origin_lat * kDeg);
    const double y = proj.earth_radius * (lat - proj.origin_lat) * kDeg;
    return {x, y};
}

LatLon unproject_local(const XY& xy, const LocalProjection& proj) {
    proj.validate();
    return {proj.origin_lat + xy.y / proj.earth_radius / kDeg,
            proj.origin_lon + xy.x / (proj.earth_radius * std::cos(proj.origin_lat * kDeg)) / kDeg};
}

HexCoord assign_hex(const XY& xy, double width_m) {
    const double size = width_m / kSqrt3;
    const double fq = (kSqrt3 / 3.0 * xy.x - xy.y / 3.0) / size;
    const double fr = (2.0 / 3.0 * xy.y) / size;
    const double fs = -fq - fr;
    double q = std::round(fq), r = std::round(fr), s = std::round(fs);
    const double dq = std::abs(q - fq), dr = std::abs(r - fr), ds = std::abs(s - fs);
    // Re-derive the coordinate with the largest rounding error.
    if (dq > dr && dq > ds) {
        q = -r - s;
    } else if (dr > ds) {
        r = -q - s;
    }
    return {static_cast<std::int64_t>(q), static_cast<std::int64_t>(r)};
}

XY hex_center(const HexCoord& h, double width_m) {
    const double size = width_m / kSqrt3;
    const auto q = static_cast<double>(h.q), r = static_cast<double>(h.r);
    return {size * (kSqrt3 * q + kSqrt3 / 2.0 * r), size * 1.5 * r};
}

std::array<XY, 6> hex_vertices(const HexCoord& h, double width_m) {
    const XY c = hex_center(h, width_m);
    const double size = width_m / kSqrt3;
    std::array<XY, 6> v;
    for (int i = 0; i < 6; ++i) {
        const double a = (60.0 * i - 30.0) * kDeg;
        v[static_cast<std::size_t>(i)] = {c.x + size * std::cos(a), c.y + size * std::sin(a)};
    }
    return v;
}

double hex_area(double width_m) { return kSqrt3 / 2.0 * width_m * width_m; }

const HexCell* HexBinMap::find(const HexCoord& h) const noexcept {
    auto it = std::lower_bound(cells.begin(), cells.end(), h,
                               [](const HexCell& c, const HexCoord& k) { return c.coord < k; });
    return (it != cells.end() && it->coord == h) ? &*it : nullptr;
}

TrimmedMean left_trimmed_mean(std::span<const double> values, double trim_fraction) {
    if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) {
        throw ArgumentError("trim fraction must lie in [0, 1)");
    }
    if (values.empty()) return {0.0, 0};
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto drop = static_cast<std::size_t>(std::floor(static_cast<double>(sorted.size()) * trim_fraction));
    const std::span<const double> kept(sorted.data() + drop, sorted.size() - drop);
    return {pairwise_sum(kept) / static_cast<double>(kept.size()), kept.size()};
}

TopKResult top_k(const MdmRaster& m, std::size_t k) {
    if (k < 1) throw ArgumentError("top_k: k must be at least 1");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.mdm.size(); ++i) {
        if (m.valid(i)) idx.push_back(i);
    }
    const std::size_t n = std::min(k, idx.size());
    auto order = [&](std::size_t a, std::size_t b) {
        if (m.mdm[a] != m.mdm[b]) return m.mdm[a] > m.mdm[b];
        return a < b;  // row-major index == (row, col) order
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), order);

    TopKResult out;
    out.short_list = idx.size() < k;
    const Geolocator geo(m.grid.crs_id);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = idx[j];
        const std::size_t r = i / m.grid.width, c = i % m.grid.width;
        out.pixels.push_back({r, c, geo.pixel_center(m.grid, r, c), m.mdm[i]});
    }
    return out;
}

HexBinMap aggregate(const MdmRaster& m, const LocalProjection& proj, const AggregateOptions& options) {
    if (!(options.width_m > 0.0)) throw ArgumentError("hexagon width must be positive");
    if (!(options.trim_fraction >= 0.0 && options.trim_fraction < 1.0)) {
        throw ArgumentError("trim fraction must lie in [0, 1)");
    }
    proj.validate();

    const auto& g = m.grid;
    const Geolocator geo(g.crs_id);
    std::vector<Member> members(g.pixel_count(), Member{{}, kNoDataD});
    parallel_for(g.height, options.workers, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t c = 0; c < g.width; ++c) {
                const std::size_t i = r * g.width + c;
                if (!m.valid(i)) continue;
                const LatLon ll = geo.pixel_center(g, r, c);
                members[i] = {assign_hex(project_local(ll.lat, ll.lon, proj), options.width_m), m.mdm[i]};
            }
        }
    });
    std::erase_if(members, [](const Member& x) { return std::isnan(x.value); });
    // Sorting by (cell, value) makes the result independent of pixel order.
    std::sort(members.begin(), members.end());

    HexBinMap map;
    map.width_m = options.width_m;
    map.trim_fraction = options.trim_fraction;
    map.projection = proj;
    std::vector<double> values;
    for (std::size_t a = 0; a < members.size();) {
        std::size_t b = a;
        values.clear();
        while (b < members.size() && members[b].cell == members[a].cell) values.push_back(members[b++].value);
        HexCell cell;
        cell.coord = members[a].cell;
        cell.centre_xy = hex_center(cell.coord, options.width_m);
        cell.centre = unproject_local(cell.centre_xy, proj);
        const auto tm = left_trimmed_mean(values, options.trim_fraction);
        cell.trimmed_mean_mdm = tm.mean;
        cell.pixel_count = values.size();
        cell.kept_count = tm.kept;
        map.cells.push_back(cell);
        a = b;
    }
    if (options.top_k > 0) {
        auto top = top_k(m, options.top_k);
        map.top_pixels = std::move(top.pixels);
        map.top_short_list = top.short_list;
    }
    return map;
}

namespace {

void write_text(const fs::path& path, const fmt::memory_buffer& buf) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw WriteError("cannot write '" + path.string() + "'");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw WriteError("failed writing '" + path.string() + "'");
}

}  // namespace

void write_cells_csv(const HexBinMap& map, const fs::path& path) {
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "q,r,centre_lat,centre_lon,trimmed_mean,pixel_count,kept_count\n");
    for (const auto& c : map.cells) {
        fmt::format_to(std::back_inserter(buf), "{},{},{:.8f},{:.8f},{:.10g},{},{}\n", c.coord.q, c.coord.r,
                       c.centre.lat, c.centre.lon, c.trimmed_mean_mdm, c.pixel_count, c.kept_count);
    }
    write_text(path, buf);
}

void write_top_csv(const HexBinMap& map, const fs::path& path) {
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "rank,row,col,lat,lon,mdm\n");
    for (std::size_t i = 0; i < map.top_pixels.size(); ++i) {
        const auto& p = map.top_pixels[i];
        fmt::format_to(std::back_inserter(buf), "{},{},{},{:.8f},{:.8f},{:.10g}\n", i + 1, p.row, p.col,
                       p.position.lat, p.position.lon, p.mdm);
    }
    write_text(path, buf);
}

void write_hexbin_json(const HexBinMap& map, const fs::path& path) {
    json j;
    j["width_m"] = map.width_m;
    j["trim_fraction"] = map.trim_fraction;
    j["projection"] = {{"origin_lat", map.projection.origin_lat},
                       {"origin_lon", map.projection.origin_lon},
                       {"earth_radius", map.projection.earth_radius}};
    j["cells"] = json::array();
    for (const auto& c : map.cells) {
        j["cells"].push_back({{"q", c.coord.q},
                              {"r", c.coord.r},
                              {"trimmed_mean", c.trimmed_mean_mdm},
                              {"pixel_count", c.pixel_count},
                              {"kept_count", c.kept_count}});
    }
    j["top_pixels"] = json::array();
    for (const auto& p : map.top_pixels) {
        j["top_pixels"].push_back(
            {{"row", p.row}, {"col", p.col}, {"lat", p.position.lat}, {"lon", p.position.lon}, {"mdm", p.mdm}});
    }
    j["top_short_list"] = map.top_short_list;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("cannot write '" + path.string() + "'");
    out << j.dump(1) << '\n';
}

HexBinMap read_hexbin_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    HexBinMap map;
    try {
        json j = json::parse(in);
        map.width_m = j.at("width_m").get<double>();
        map.trim_fraction = j.at("trim_fraction").get<double>();
        const auto& p = j.at("projection");
        map.projection = {p.at("origin_lat").get<double>(), p.at("origin_lon").get<double>(),
                          p.at("earth_radius").get<double>()};
        for (const auto& c : j.at("cells")) {
            HexCell cell;
            cell.coord = {c.at("q").get<std::int64_t>(), c.at("r").get<std::int64_t>()};
            cell.centre_xy = hex_center(cell.coord, map.width_m);
            cell.centre = unproject_local(cell.centre_xy, map.projection);
            cell.trimmed_mean_mdm = c.at("trimmed_mean").get<double>();
            cell.pixel_count = c.at("pixel_count").get<std::size_t>();
            cell.kept_count = c.at("kept_count").get<std::size_t>();
            map.cells.push_back(cell);
        }
        for (const auto& t : j.at("top_pixels")) {
            map.top_pixels.push_back({t.at("row").get<std::size_t>(), t.at("col").get<std::size_t>(),
                                      {t.at("lat").get<double>(), t.at("lon").get<double>()},
                                      t.at("mdm").get<double>()});
        }
        map.top_short_list = j.value("top_short_list", false);
    } catch (const json::exception& e) {
        throw FormatError("hexbin file '" + path.string() + "': " + e.what());
    }
    std::sort(map.cells.begin(), map.cells.end(),
              [](const HexCell& a, const HexCell& b) { return a.coord < b.coord; });
    return map;
}

}  // namespace dde
