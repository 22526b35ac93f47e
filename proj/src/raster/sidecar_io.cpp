#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "dde/error.hpp"
#include "dde/raster.hpp"

namespace dde::detail {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

json nodata_to_json(float v) {
    if (std::isnan(v)) return nullptr;
    return static_cast<double>(v);
}

template <class T>
T require(const json& j, const char* key, const fs::path& path) {
    if (!j.contains(key)) throw MetadataError("sidecar '" + path.string() + "' lacks '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw MetadataError("sidecar '" + path.string() + "': bad '" + key + "': " + e.what());
    }
}

}  // namespace

SceneRaster read_sidecar(const fs::path& path, bool payload) {
    auto header_path = sidecar_header_path(path);
    std::ifstream in(header_path);
    if (!in) throw FormatError("cannot open sidecar header '" + header_path.string() + "'");
    json h;
    try {
        in >> h;
    } catch (const json::exception& e) {
        throw FormatError("sidecar header '" + header_path.string() + "' is not valid JSON: " + e.what());
    }
    if (!h.is_object()) throw FormatError("sidecar header '" + header_path.string() + "' is not an object");

    SceneRaster r;
    r.grid.width = require<std::size_t>(h, "width", header_path);
    r.grid.height = require<std::size_t>(h, "height", header_path);
    if (!h.contains("origin") || !h.contains("pixel_size")) {
        throw MetadataError("sidecar '" + header_path.string() + "' has no georeferencing");
    }
    auto origin = require<std::vector<double>>(h, "origin", header_path);
    auto pixel = require<std::vector<double>>(h, "pixel_size", header_path);
    if (origin.size() != 2 || pixel.size() != 2) {
        throw MetadataError("sidecar '" + header_path.string() + "': origin/pixel_size need 2 values");
    }
    r.grid.origin_x = origin[0];
    r.grid.origin_y = origin[1];
    r.grid.pixel_size_x = pixel[0];
    r.grid.pixel_size_y = pixel[1];
    r.grid.crs_id = h.value("crs", std::string{});
    try {
        r.grid.validate();
    } catch (const ArgumentError& e) {
        throw MetadataError("sidecar '" + header_path.string() + "': " + e.what());
    }
    if (h.contains("date") && !h["date"].is_null()) r.acquisition_date = parse_date(h["date"].get<std::string>());
    if (h.contains("nodata") && !h["nodata"].is_null()) r.nodata = h["nodata"].get<float>();

    const auto& bands = h.value("bands", json::array());
    for (const auto& b : bands) {
        Band band;
        band.name = b.value("name", std::string{});
        if (b.contains("wavelength_nm") && !b["wavelength_nm"].is_null()) {
            band.wavelength_nm = b["wavelength_nm"].get<double>();
        }
        r.bands.push_back(std::move(band));
    }
    if (r.bands.empty()) throw EmptyRasterError("sidecar '" + header_path.string() + "' lists no bands");
    if (!payload) return r;

    auto data_path = header_path.parent_path() / h.value("data_file", sidecar_data_path(path).filename().string());
    std::ifstream raw(data_path, std::ios::binary);
    if (!raw) throw FormatError("cannot open sidecar payload '" + data_path.string() + "'");
    const std::size_t n = r.grid.pixel_count();
    std::vector<std::uint32_t> words(n);
    for (auto& band : r.bands) {
        raw.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(n * 4));
        if (static_cast<std::size_t>(raw.gcount()) != n * 4) {
            throw FormatError("sidecar payload '" + data_path.string() + "' is truncated");
        }
        std::vector<float> values(n);
        for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(to_little(words[i]));
        band.values = FloatPlane(r.grid.width, r.grid.height, std::move(values));
    }
    return r;
}

void write_sidecar(const SceneRaster& raster, const fs::path& path) {
    auto header_path = sidecar_header_path(path);
    auto data_path = sidecar_data_path(path);

    json h;
    h["width"] = raster.grid.width;
    h["height"] = raster.grid.height;
    h["origin"] = {raster.grid.origin_x, raster.grid.origin_y};
    h["pixel_size"] = {raster.grid.pixel_size_x, raster.grid.pixel_size_y};
    h["crs"] = raster.grid.crs_id;
    h["date"] = raster.acquisition_date ? json(format_date(*raster.acquisition_date)) : json(nullptr);
    h["nodata"] = nodata_to_json(raster.nodata);
    h["data_file"] = data_path.filename().string();
    h["bands"] = json::array();
    for (const auto& b : raster.bands) {
        h["bands"].push_back({{"name", b.name},
                              {"wavelength_nm", b.wavelength_nm ? json(*b.wavelength_nm) : json(nullptr)}});
    }

    std::ofstream raw(data_path, std::ios::binary | std::ios::trunc);
    if (!raw) throw WriteError("cannot open '" + data_path.string() + "' for writing");
    std::vector<std::uint32_t> words(raster.grid.pixel_count());
    for (const auto& b : raster.bands) {
        auto v = b.values.values();
        for (std::size_t i = 0; i < v.size(); ++i) words[i] = to_little(std::bit_cast<std::uint32_t>(v[i]));
        raw.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    }
    raw.close();
    if (!raw) throw WriteError("failed writing '" + data_path.string() + "'");

    std::ofstream out(header_path, std::ios::trunc);
    if (!out) throw WriteError("cannot open '" + header_path.string() + "' for writing");
    out << h.dump(2) << '\n';
    out.close();
    if (!out) throw WriteError("failed writing '" + header_path.string() + "'");
}

}  // namespace dde::detail
