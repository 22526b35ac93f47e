#include "dde/masking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "dde/error.hpp"
#include "dde/parallel.hpp"

namespace dde {

namespace fs = std::filesystem;
using nlohmann::json;

void SceneClassMask::validate() const {
    grid.validate();
    if (classes.width() != grid.width || classes.height() != grid.height) {
        throw ArgumentError("scene-class plane does not match its grid");
    }
    for (auto c : classes.values()) {
        if (!SceneClass::known(c)) throw IntegrityError("unknown scene-class code " + std::to_string(c));
    }
}

SceneClassMask SceneClassMask::from_raster(const SceneRaster& raster) {
    if (raster.bands.empty()) throw EmptyRasterError("scene-class raster has no bands");
    SceneClassMask m{raster.grid, MaskPlane(raster.grid.width, raster.grid.height, SceneClass::nodata)};
    const auto& v = raster.bands.front().values;
    for (std::size_t i = 0; i < v.size(); ++i) {
        float x = v[i];
        if (raster.is_nodata(x)) continue;
        if (x < 0.0f || x > 255.0f || x != std::floor(x)) {
            throw IntegrityError("scene-class raster holds non-integer value " + std::to_string(x));
        }
        m.classes[i] = static_cast<std::uint8_t>(x);
    }
    m.validate();
    return m;
}

SceneClassMask SceneClassMask::load(const fs::path& path) { return from_raster(read_raster(path)); }

Extent Polygon::bounds() const {
    Extent e{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& ring : rings) {
        for (const auto& p : ring) {
            e.min_x = std::min(e.min_x, p.lon);
            e.max_x = std::max(e.max_x, p.lon);
            e.min_y = std::min(e.min_y, p.lat);
            e.max_y = std::max(e.max_y, p.lat);
        }
    }
    return e;
}

void LandPolygons::validate() const {
    for (const auto& poly : polygons) {
        if (poly.rings.empty()) throw GeometryError("polygon without rings");
        for (const auto& ring : poly.rings) {
            if (ring.size() < 2 || ring.front().lat != ring.back().lat || ring.front().lon != ring.back().lon) {
                throw GeometryError("polygon ring is not closed");
            }
            std::set<std::pair<double, double>> distinct;
            for (const auto& p : ring) distinct.emplace(p.lat, p.lon);
            if (distinct.size() < 3) throw GeometryError("polygon ring has fewer than 3 distinct vertices");
        }
    }
}

LandPolygons LandPolygons::crop(const Extent& box) const {
    LandPolygons out{{}, source_name};
    for (const auto& p : polygons) {
        Extent b = p.bounds();
        if (b.min_x <= box.max_x && b.max_x >= box.min_x && b.min_y <= box.max_y && b.max_y >= box.min_y) {
            out.polygons.push_back(p);
        }
    }
    return out;
}

namespace {

Ring parse_ring(const json& coords) {
    Ring ring;
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2) throw GeometryError("GeoJSON position needs [lon, lat]");
        ring.push_back({pt[1].get<double>(), pt[0].get<double>()});
    }
    return ring;
}

Polygon parse_polygon(const json& coords) {
    Polygon p;
    for (const auto& ring : coords) p.rings.push_back(parse_ring(ring));
    return p;
}

void collect(const json& node, std::vector<Polygon>& out) {
    const auto type = node.value("type", std::string{});
    if (type == "FeatureCollection") {
        for (const auto& f : node.at("features")) collect(f, out);
    } else if (type == "Feature") {
        if (node.contains("geometry") && !node["geometry"].is_null()) collect(node["geometry"], out);
    } else if (type == "GeometryCollection") {
        for (const auto& g : node.at("geometries")) collect(g, out);
    } else if (type == "Polygon") {
        out.push_back(parse_polygon(node.at("coordinates")));
    } else if (type == "MultiPolygon") {
        for (const auto& p : node.at("coordinates")) out.push_back(parse_polygon(p));
    }
    // Points and lines carry no area and are skipped.
}

}  // namespace

LandPolygons LandPolygons::parse_geojson(std::string_view text, std::string source_name) {
    LandPolygons lp{{}, std::move(source_name)};
    try {
        collect(json::parse(text), lp.polygons);
    } catch (const json::exception& e) {
        throw FormatError("invalid GeoJSON in '" + lp.source_name + "': " + e.what());
    }
    lp.validate();
    return lp;
}

LandPolygons LandPolygons::load_geojson(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open land polygons '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_geojson(ss.str(), path.filename().string());
}

ValidityMask ValidityMask::all_valid(const GeoGrid& grid) {
    return {grid, MaskPlane(grid.width, grid.height, 1), 0};
}

std::size_t ValidityMask::valid_count() const {
    return static_cast<std::size_t>(std::count(valid.values().begin(), valid.values().end(), 1));
}

ProbabilityRaster apply_scene_mask(const ProbabilityRaster& p, const SceneClassMask& m) {
    require_same_grid(p.grid, m.grid, "apply_scene_mask");
    ProbabilityRaster out = p;
    for (std::size_t i = 0; i < out.probs.size(); ++i) {
        if (m.classes[i] != SceneClass::water) out.probs[i] = kNoDataF;
    }
    return out;
}

namespace {

// x positions where the horizontal line at `lat` crosses the polygon's edges,
// using the half-open rule (yi > y) != (yj > y).
void crossings(const Polygon& poly, double lat, std::vector<double>& xs) {
    xs.clear();
    for (const auto& ring : poly.rings) {
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
            const auto& a = ring[i];
            const auto& b = ring[j];
            if ((a.lat > lat) != (b.lat > lat)) {
                xs.push_back((b.lon - a.lon) * (lat - a.lat) / (b.lat - a.lat) + a.lon);
            }
        }
    }
    std::sort(xs.begin(), xs.end());
}

// Odd number of crossings strictly east of lon means inside.
bool inside(const std::vector<double>& xs, double lon) {
    auto east = xs.end() - std::upper_bound(xs.begin(), xs.end(), lon);
    return (east & 1) != 0;
}

}  // namespace

ValidityMask rasterize_land(const LandPolygons& polys, const GeoGrid& grid, unsigned workers) {
    polys.validate();
    grid.validate();
    ValidityMask mask{grid, MaskPlane(grid.width, grid.height, 1), kMaskLand};
    if (polys.polygons.empty()) return mask;

    const Geolocator geo(grid.crs_id);
    std::vector<Extent> bounds;
    for (const auto& p : polys.polygons) bounds.push_back(p.bounds());

    parallel_for(grid.height, workers, [&](std::size_t r0, std::size_t r1) {
        std::vector<double> xs;
        std::vector<LatLon> centres(grid.width);
        for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t c = 0; c < grid.width; ++c) centres[c] = geo.pixel_center(grid, r, c);
            auto row = mask.valid.row(r);
            for (std::size_t k = 0; k < polys.polygons.size(); ++k) {
                const auto& b = bounds[k];
                if (geo.geographic()) {
                    // A geographic row shares one latitude: one crossing list per polygon.
                    double lat = centres[0].lat;
                    if (lat < b.min_y || lat > b.max_y) continue;
                    crossings(polys.polygons[k], lat, xs);
                    for (std::size_t c = 0; c < grid.width; ++c) {
                        if (row[c] && inside(xs, centres[c].lon)) row[c] = 0;
                    }
                } else {
                    for (std::size_t c = 0; c < grid.width; ++c) {
                        const auto& ll = centres[c];
                        if (!row[c] || ll.lat < b.min_y || ll.lat > b.max_y || ll.lon < b.min_x || ll.lon > b.max_x) {
                            continue;
                        }
                        crossings(polys.polygons[k], ll.lat, xs);
                        if (inside(xs, ll.lon)) row[c] = 0;
                    }
                }
            }
        }
    });
    return mask;
}

ValidityMask combine_masks(const ValidityMask& a, const ValidityMask& b) {
    require_same_grid(a.grid, b.grid, "combine_masks");
    ValidityMask out{a.grid, MaskPlane(a.grid.width, a.grid.height, 0),
                     static_cast<std::uint8_t>(a.provenance | b.provenance)};
    for (std::size_t i = 0; i < out.valid.size(); ++i) out.valid[i] = (a.valid[i] && b.valid[i]) ? 1 : 0;
    return out;
}

ValidityMask validity_from_probabilities(const ProbabilityRaster& p) {
    ValidityMask m{p.grid, MaskPlane(p.grid.width, p.grid.height, 0), kMaskNoData};
    for (std::size_t i = 0; i < p.probs.size(); ++i) m.valid[i] = std::isnan(p.probs[i]) ? 0 : 1;
    return m;
}

ProbabilityRaster apply_validity(const ProbabilityRaster& p, const ValidityMask& m) {
    require_same_grid(p.grid, m.grid, "apply_validity");
    ProbabilityRaster out = p;
    for (std::size_t i = 0; i < out.probs.size(); ++i) {
        if (!m.valid[i]) out.probs[i] = kNoDataF;
    }
    return out;
}

}  // namespace dde
