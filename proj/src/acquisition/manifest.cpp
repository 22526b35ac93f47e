#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <fstream>
#include <set>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "json.hpp"

#include "dde/acquisition.hpp"
#include "dde/error.hpp"
#include "dde/raster.hpp"

namespace dde {

namespace fs = std::filesystem;
using nlohmann::json;

void RoiSpec::validate() const {
    for (const auto& c : {corner_a, corner_b}) {
        if (!(c.lat >= -90.0 && c.lat <= 90.0)) throw ValidationError(fmt::format("ROI latitude {} out of range", c.lat));
        if (!(c.lon >= -180.0 && c.lon <= 180.0)) {
            throw ValidationError(fmt::format("ROI longitude {} out of range", c.lon));
        }
    }
    if (corner_a.lat == corner_b.lat || corner_a.lon == corner_b.lon) {
        throw ValidationError("ROI corners do not span a rectangle");
    }
    if (!date_start.ok() || !date_end.ok()) throw ValidationError("ROI dates are not valid calendar dates");
    if (date_end < date_start) throw ValidationError("ROI date_start is after date_end");
}

Extent RoiSpec::bounds() const {
    return {std::min(corner_a.lon, corner_b.lon), std::min(corner_a.lat, corner_b.lat),
            std::max(corner_a.lon, corner_b.lon), std::max(corner_a.lat, corner_b.lat)};
}

LatLon RoiSpec::centroid() const { return {(corner_a.lat + corner_b.lat) / 2, (corner_a.lon + corner_b.lon) / 2}; }

// --- WKT footprints ---------------------------------------------------------

Footprint parse_wkt_footprint(std::string_view wkt) {
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < wkt.size() && std::isspace(static_cast<unsigned char>(wkt[i]))) ++i;
    };
    skip_ws();
    std::string keyword;
    while (i < wkt.size() && std::isalpha(static_cast<unsigned char>(wkt[i]))) {
        keyword += static_cast<char>(std::toupper(static_cast<unsigned char>(wkt[i++])));
    }
    int ring_depth = 0;
    if (keyword == "POLYGON") {
        ring_depth = 2;
    } else if (keyword == "MULTIPOLYGON") {
        ring_depth = 3;
    } else {
        throw ParseError("unsupported footprint geometry '" + std::string(wkt.substr(0, 40)) + "'");
    }

    Footprint out;
    int depth = 0;
    bool first_ring_of_polygon = true;
    while (i < wkt.size()) {
        const char ch = wkt[i];
        if (ch == '(') {
            ++depth;
            ++i;
            if (depth == ring_depth - 1) first_ring_of_polygon = true;
            if (depth != ring_depth) continue;
            std::vector<LatLon> ring;
            while (true) {
                skip_ws();
                double lon = 0, lat = 0;
                for (double* v : {&lon, &lat}) {
                    skip_ws();
                    const auto [p, ec] = std::from_chars(wkt.data() + i, wkt.data() + wkt.size(), *v);
                    if (ec != std::errc()) throw ParseError("malformed footprint coordinates");
                    i = static_cast<std::size_t>(p - wkt.data());
                }
                ring.push_back({lat, lon});
                skip_ws();
                if (i < wkt.size() && wkt[i] == ',') {
                    ++i;
                    continue;
                }
                break;
            }
            if (first_ring_of_polygon) out.push_back(std::move(ring));
            first_ring_of_polygon = false;
        } else if (ch == ')') {
            --depth;
            ++i;
            if (depth < 0) throw ParseError("unbalanced parentheses in footprint");
        } else {
            ++i;
        }
    }
    if (depth != 0) throw ParseError("unbalanced parentheses in footprint");
    if (out.empty()) throw ParseError("footprint has no rings");
    return out;
}

namespace {

std::string footprint_wkt(const Footprint& fp) {
    std::string s = "MULTIPOLYGON (";
    for (std::size_t r = 0; r < fp.size(); ++r) {
        s += r ? ", ((" : "((";
        for (std::size_t k = 0; k < fp[r].size(); ++k) {
            s += fmt::format("{}{} {}", k ? ", " : "", fp[r][k].lon, fp[r][k].lat);
        }
        s += "))";
    }
    return s + ")";
}

bool point_in_ring(const std::vector<LatLon>& ring, double x, double y) {
    bool in = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const double xi = ring[i].lon, yi = ring[i].lat, xj = ring[j].lon, yj = ring[j].lat;
        if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
    }
    return in;
}

double cross(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

bool on_segment(double ax, double ay, double bx, double by, double px, double py) {
    return std::min(ax, bx) <= px && px <= std::max(ax, bx) && std::min(ay, by) <= py && py <= std::max(ay, by);
}

bool segments_intersect(double ax, double ay, double bx, double by, double cx, double cy, double dx, double dy) {
    const double d1 = cross(cx, cy, dx, dy, ax, ay), d2 = cross(cx, cy, dx, dy, bx, by);
    const double d3 = cross(ax, ay, bx, by, cx, cy), d4 = cross(ax, ay, bx, by, dx, dy);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    return (d1 == 0 && on_segment(cx, cy, dx, dy, ax, ay)) || (d2 == 0 && on_segment(cx, cy, dx, dy, bx, by)) ||
           (d3 == 0 && on_segment(ax, ay, bx, by, cx, cy)) || (d4 == 0 && on_segment(ax, ay, bx, by, dx, dy));
}

}  // namespace

std::string roi_wkt(const RoiSpec& roi) {
    const Extent b = roi.bounds();
    return fmt::format("POLYGON(({0} {1},{2} {1},{2} {3},{0} {3},{0} {1}))", b.min_x, b.min_y, b.max_x, b.max_y);
}

bool footprint_intersects(const Footprint& fp, const Extent& box) {
    const double bx[4] = {box.min_x, box.max_x, box.max_x, box.min_x};
    const double by[4] = {box.min_y, box.min_y, box.max_y, box.max_y};
    for (const auto& ring : fp) {
        if (ring.empty()) continue;
        for (const auto& p : ring) {
            if (p.lon >= box.min_x && p.lon <= box.max_x && p.lat >= box.min_y && p.lat <= box.max_y) return true;
        }
        for (int k = 0; k < 4; ++k) {
            if (point_in_ring(ring, bx[k], by[k])) return true;
        }
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
            for (int k = 0; k < 4; ++k) {
                const int l = (k + 1) % 4;
                if (segments_intersect(ring[j].lon, ring[j].lat, ring[i].lon, ring[i].lat, bx[k], by[k], bx[l],
                                       by[l])) {
                    return true;
                }
            }
        }
    }
    return false;
}

// --- manifest -----------------------------------------------------------------

void Manifest::normalise() {
    std::sort(scenes.begin(), scenes.end(), [](const SceneRecord& a, const SceneRecord& b) {
        if (a.sensing_date != b.sensing_date) return a.sensing_date < b.sensing_date;
        return a.scene_id < b.scene_id;
    });
    std::set<std::string> seen;
    for (const auto& s : scenes) {
        if (!seen.insert(s.scene_id).second) throw ValidationError("duplicate scene id '" + s.scene_id + "'");
    }
}

namespace {

json roi_to_json(const RoiSpec& r) {
    return {{"corner_a", {r.corner_a.lat, r.corner_a.lon}},
            {"corner_b", {r.corner_b.lat, r.corner_b.lon}},
            {"date_start", format_date(r.date_start)},
            {"date_end", format_date(r.date_end)}};
}

RoiSpec roi_from_json(const json& j) {
    RoiSpec r;
    r.corner_a = {j.at("corner_a").at(0).get<double>(), j.at("corner_a").at(1).get<double>()};
    r.corner_b = {j.at("corner_b").at(0).get<double>(), j.at("corner_b").at(1).get<double>()};
    r.date_start = parse_date(j.at("date_start").get<std::string>());
    r.date_end = parse_date(j.at("date_end").get<std::string>());
    return r;
}

}  // namespace

void Manifest::save(const fs::path& path) const {
    json j;
    j["roi"] = roi_to_json(roi);
    j["created_at"] = created_at;
    j["warnings"] = warnings;
    j["scenes"] = json::array();
    for (const auto& s : scenes) {
        json e{{"scene_id", s.scene_id},
               {"sensing_date", format_date(s.sensing_date)},
               {"footprint", s.footprint.empty() ? json(nullptr) : json(footprint_wkt(s.footprint))},
               {"cloud_cover_pct", s.cloud_cover_pct ? json(*s.cloud_cover_pct) : json(nullptr)},
               {"download_uri", s.download_uri},
               {"local_path", s.local_path ? json(s.local_path->generic_string()) : json(nullptr)},
               {"checksum", s.checksum ? json(*s.checksum) : json(nullptr)}};
        j["scenes"].push_back(std::move(e));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw WriteError("failed writing manifest '" + path.string() + "'");
}

Manifest Manifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    Manifest m;
    try {
        const json j = json::parse(in);
        m.roi = roi_from_json(j.at("roi"));
        m.created_at = j.value("created_at", "");
        m.warnings = j.value("warnings", std::size_t{0});
        for (const auto& e : j.at("scenes")) {
            SceneRecord s;
            s.scene_id = e.at("scene_id").get<std::string>();
            s.sensing_date = parse_date(e.at("sensing_date").get<std::string>());
            if (e.contains("footprint") && !e["footprint"].is_null()) {
                s.footprint = parse_wkt_footprint(e["footprint"].get<std::string>());
            }
            if (e.contains("cloud_cover_pct") && !e["cloud_cover_pct"].is_null()) {
                s.cloud_cover_pct = e["cloud_cover_pct"].get<double>();
            }
            s.download_uri = e.value("download_uri", "");
            if (e.contains("local_path") && !e["local_path"].is_null()) {
                s.local_path = fs::path(e["local_path"].get<std::string>());
            }
            if (e.contains("checksum") && !e["checksum"].is_null()) s.checksum = e["checksum"].get<std::string>();
            m.scenes.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ParseError("manifest '" + path.string() + "': " + e.what());
    }
    m.normalise();
    return m;
}

std::optional<fs::path> find_scene_raster(const fs::path& folder) {
    for (const char* name : {"scene.tif", "scene.tiff", "scene.json"}) {
        if (fs::is_regular_file(folder / name)) return folder / name;
    }
    return std::nullopt;
}

namespace {

Footprint raster_footprint(const RasterInfo& info) {
    try {
        const Geolocator geo(info.grid.crs_id);
        const Extent e = info.grid.extent();
        std::vector<LatLon> ring;
        for (auto [x, y] : {std::pair{e.min_x, e.min_y}, {e.max_x, e.min_y}, {e.max_x, e.max_y}, {e.min_x, e.max_y},
                            {e.min_x, e.min_y}}) {
            ring.push_back(geo.to_lat_lon(x, y));
        }
        return {ring};
    } catch (const ProjectionError&) {
        return {};
    }
}

}  // namespace

Manifest build_manifest(const RoiSpec& roi, const fs::path& scene_dir) {
    if (!fs::is_directory(scene_dir)) throw IoError("scene directory '" + scene_dir.string() + "' does not exist");
    Manifest m;
    m.roi = roi;
    m.created_at = utc_timestamp();
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(scene_dir)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const auto& entry : entries) {
        const auto raster = fs::is_directory(entry) ? find_scene_raster(entry) : std::nullopt;
        if (!raster) {
            ++m.warnings;
            continue;
        }
        try {
            const RasterInfo info = read_raster_info(*raster);
            auto date = info.acquisition_date;
            if (!date) date = find_date_in_name(entry.filename().string());
            if (!date) {
                ++m.warnings;
                continue;
            }
            SceneRecord s;
            s.scene_id = entry.filename().string();
            s.sensing_date = *date;
            s.footprint = raster_footprint(info);
            s.local_path = *raster;
            m.scenes.push_back(std::move(s));
        } catch (const Error&) {
            ++m.warnings;
        }
    }
    m.normalise();
    return m;
}

std::string utc_timestamp() { return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))); }

}  // namespace dde
