#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>

#include <tiffio.h>

#include "json.hpp"

#include "dde/error.hpp"
#include "dde/raster.hpp"

namespace dde::detail {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr ttag_t kModelPixelScale = 33550;
constexpr ttag_t kModelTiepoint = 33922;
constexpr ttag_t kModelTransformation = 34264;
constexpr ttag_t kGeoKeyDirectory = 34735;
constexpr ttag_t kGeoDoubleParams = 34736;
constexpr ttag_t kGeoAsciiParams = 34737;
constexpr ttag_t kGdalNoData = 42113;

constexpr std::uint16_t kGTModelTypeGeoKey = 1024;
constexpr std::uint16_t kGTRasterTypeGeoKey = 1025;
constexpr std::uint16_t kGTCitationGeoKey = 1026;
constexpr std::uint16_t kGeographicTypeGeoKey = 2048;
constexpr std::uint16_t kProjectedCSTypeGeoKey = 3072;

thread_local std::string g_last_error;

void error_handler(const char* module, const char* fmt, va_list ap) {
    char buf[512];
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    g_last_error = std::string(module ? module : "libtiff") + ": " + buf;
}

TIFFExtendProc g_parent_extender = nullptr;

void tag_extender(TIFF* tif) {
    static const TIFFFieldInfo fields[] = {
        {kModelPixelScale, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, const_cast<char*>("ModelPixelScale")},
        {kModelTiepoint, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, const_cast<char*>("ModelTiepoint")},
        {kModelTransformation, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
         const_cast<char*>("ModelTransformation")},
        {kGeoKeyDirectory, -1, -1, TIFF_SHORT, FIELD_CUSTOM, 1, 1, const_cast<char*>("GeoKeyDirectory")},
        {kGeoDoubleParams, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1, const_cast<char*>("GeoDoubleParams")},
        {kGeoAsciiParams, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, const_cast<char*>("GeoAsciiParams")},
        {kGdalNoData, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0, const_cast<char*>("GDALNoDataValue")},
    };
    for (const auto& f : fields) {
        if (TIFFFindField(tif, f.field_tag, TIFF_ANY) == nullptr) TIFFMergeFieldInfo(tif, &f, 1);
    }
    if (g_parent_extender) g_parent_extender(tif);
}

void install_handlers() {
    static std::once_flag once;
    std::call_once(once, [] {
        g_parent_extender = TIFFSetTagExtender(tag_extender);
        TIFFSetWarningHandler(nullptr);
        TIFFSetErrorHandler(error_handler);
    });
}

struct TiffCloser {
    void operator()(TIFF* t) const noexcept { TIFFClose(t); }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

TiffPtr open_tiff(const fs::path& path, const char* mode) {
    install_handlers();
    g_last_error.clear();
    TIFF* t = TIFFOpen(path.c_str(), mode);
    return TiffPtr(t);
}

std::string format_nodata(float v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

std::optional<int> epsg_code(const std::string& crs) {
    if (crs.rfind("EPSG:", 0) != 0) return std::nullopt;
    char* end = nullptr;
    long v = std::strtol(crs.c_str() + 5, &end, 10);
    if (*end != '\0' || v <= 0 || v > 65535) return std::nullopt;
    return static_cast<int>(v);
}

// Converts `n` samples of the given layout starting at `src`, taking every `stride`-th sample.
void convert_samples(const unsigned char* src, std::uint16_t format, std::uint16_t bits, std::size_t n,
                     std::size_t stride, float* dst) {
    auto pick = [&](auto tag) {
        using T = decltype(tag);
        for (std::size_t i = 0; i < n; ++i) {
            T v;
            std::memcpy(&v, src + i * stride * sizeof(T), sizeof(T));
            dst[i] = static_cast<float>(v);
        }
    };
    if (format == SAMPLEFORMAT_IEEEFP && bits == 32) {
        for (std::size_t i = 0; i < n; ++i) std::memcpy(dst + i, src + i * stride * 4, 4);
    } else if (format == SAMPLEFORMAT_IEEEFP && bits == 64) {
        pick(double{});
    } else if (format == SAMPLEFORMAT_INT && bits == 8) {
        pick(std::int8_t{});
    } else if (format == SAMPLEFORMAT_INT && bits == 16) {
        pick(std::int16_t{});
    } else if (format == SAMPLEFORMAT_INT && bits == 32) {
        pick(std::int32_t{});
    } else if (bits == 8) {
        pick(std::uint8_t{});
    } else if (bits == 16) {
        pick(std::uint16_t{});
    } else if (bits == 32) {
        pick(std::uint32_t{});
    } else {
        throw FormatError("unsupported TIFF sample layout: " + std::to_string(bits) + " bits");
    }
}

}  // namespace

SceneRaster read_geotiff(const fs::path& path, bool payload) {
    auto tif = open_tiff(path, "r");
    if (!tif) throw FormatError("cannot open TIFF '" + path.string() + "': " + g_last_error);
    TIFF* t = tif.get();

    std::uint32_t width = 0, height = 0;
    std::uint16_t spp = 1, bits = 8, format = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
    TIFFGetField(t, TIFFTAG_IMAGEWIDTH, &width);
    TIFFGetField(t, TIFFTAG_IMAGELENGTH, &height);
    TIFFGetFieldDefaulted(t, TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(t, TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(t, TIFFTAG_SAMPLEFORMAT, &format);
    TIFFGetFieldDefaulted(t, TIFFTAG_PLANARCONFIG, &planar);
    if (width == 0 || height == 0) throw FormatError("TIFF '" + path.string() + "' has no pixels");

    SceneRaster r;
    r.grid.width = width;
    r.grid.height = height;

    std::uint16_t count16 = 0;
    double* scale = nullptr;
    double* tie = nullptr;
    double* xform = nullptr;
    bool has_scale = TIFFGetField(t, kModelPixelScale, &count16, &scale) && count16 >= 2;
    std::uint16_t tie_count = 0;
    bool has_tie = TIFFGetField(t, kModelTiepoint, &tie_count, &tie) && tie_count >= 6;
    std::uint16_t xform_count = 0;
    bool has_xform = TIFFGetField(t, kModelTransformation, &xform_count, &xform) && xform_count >= 16;
    if (has_scale && has_tie) {
        r.grid.pixel_size_x = scale[0];
        r.grid.pixel_size_y = -scale[1];
        r.grid.origin_x = tie[3] - tie[0] * scale[0];
        r.grid.origin_y = tie[4] + tie[1] * scale[1];
    } else if (has_xform) {
        if (xform[1] != 0.0 || xform[4] != 0.0) {
            throw MetadataError("TIFF '" + path.string() + "' uses a rotated model transformation");
        }
        r.grid.pixel_size_x = xform[0];
        r.grid.origin_x = xform[3];
        r.grid.pixel_size_y = xform[5];
        r.grid.origin_y = xform[7];
    } else {
        throw MetadataError("TIFF '" + path.string() + "' has no georeferencing tags");
    }

    json meta = json::object();
    char* desc = nullptr;
    if (TIFFGetField(t, TIFFTAG_IMAGEDESCRIPTION, &desc) && desc) {
        meta = json::parse(desc, nullptr, false);
        if (meta.is_discarded() || !meta.is_object()) meta = json::object();
    }

    if (meta.contains("crs") && meta["crs"].is_string()) {
        r.grid.crs_id = meta["crs"].get<std::string>();
    } else {
        std::uint16_t key_count = 0;
        std::uint16_t* keys = nullptr;
        if (TIFFGetField(t, kGeoKeyDirectory, &key_count, &keys) && key_count >= 4) {
            std::size_t n = keys[3];
            for (std::size_t k = 0; k < n && 4 + 4 * k + 3 < key_count; ++k) {
                const std::uint16_t* e = keys + 4 + 4 * k;
                if ((e[0] == kProjectedCSTypeGeoKey || e[0] == kGeographicTypeGeoKey) && e[1] == 0 &&
                    e[3] != 32767) {
                    r.grid.crs_id = "EPSG:" + std::to_string(e[3]);
                    if (e[0] == kProjectedCSTypeGeoKey) break;
                }
            }
        }
    }
    try {
        r.grid.validate();
    } catch (const ArgumentError& e) {
        throw MetadataError("TIFF '" + path.string() + "': " + e.what());
    }

    char* nodata = nullptr;
    if (TIFFGetField(t, kGdalNoData, &nodata) && nodata) r.nodata = std::strtof(nodata, nullptr);

    if (meta.contains("date") && meta["date"].is_string()) {
        r.acquisition_date = try_parse_date(meta["date"].get<std::string>());
    }
    char* dt = nullptr;
    if (!r.acquisition_date && TIFFGetField(t, TIFFTAG_DATETIME, &dt) && dt && std::strlen(dt) >= 10) {
        std::string s(dt, 10);
        s[4] = '-';
        s[7] = '-';
        r.acquisition_date = try_parse_date(s);
    }
    if (!r.acquisition_date) r.acquisition_date = find_date_in_name(path.filename().string());

    const json bands_meta = meta.value("bands", json::array());
    for (std::uint16_t s = 0; s < spp; ++s) {
        Band b;
        b.name = "band_" + std::to_string(s + 1);
        if (s < bands_meta.size()) {
            const auto& bm = bands_meta[s];
            b.name = bm.value("name", b.name);
            if (bm.contains("wavelength_nm") && bm["wavelength_nm"].is_number()) {
                b.wavelength_nm = bm["wavelength_nm"].get<double>();
            }
        }
        r.bands.push_back(std::move(b));
    }
    if (!payload) return r;

    const std::size_t bytes = bits / 8;
    if (bytes == 0 || bits % 8 != 0) throw FormatError("TIFF '" + path.string() + "': sub-byte samples unsupported");
    std::vector<std::vector<float>> planes(spp, std::vector<float>(r.grid.pixel_count()));

    if (TIFFIsTiled(t)) {
        std::uint32_t tw = 0, th = 0;
        TIFFGetField(t, TIFFTAG_TILEWIDTH, &tw);
        TIFFGetField(t, TIFFTAG_TILELENGTH, &th);
        std::vector<unsigned char> buf(TIFFTileSize(t));
        const std::uint16_t passes = planar == PLANARCONFIG_SEPARATE ? spp : 1;
        for (std::uint16_t p = 0; p < passes; ++p) {
            for (std::uint32_t y = 0; y < height; y += th) {
                for (std::uint32_t x = 0; x < width; x += tw) {
                    if (TIFFReadTile(t, buf.data(), x, y, 0, p) < 0) {
                        throw FormatError("TIFF '" + path.string() + "': tile read failed: " + g_last_error);
                    }
                    std::uint32_t rows = std::min(th, height - y), cols = std::min(tw, width - x);
                    for (std::uint32_t rr = 0; rr < rows; ++rr) {
                        if (planar == PLANARCONFIG_SEPARATE) {
                            convert_samples(buf.data() + std::size_t(rr) * tw * bytes, format, bits, cols, 1,
                                            planes[p].data() + std::size_t(y + rr) * width + x);
                        } else {
                            for (std::uint16_t s = 0; s < spp; ++s) {
                                convert_samples(buf.data() + (std::size_t(rr) * tw * spp + s) * bytes, format, bits,
                                                cols, spp, planes[s].data() + std::size_t(y + rr) * width + x);
                            }
                        }
                    }
                }
            }
        }
    } else {
        std::vector<unsigned char> buf(TIFFScanlineSize(t));
        if (planar == PLANARCONFIG_SEPARATE) {
            for (std::uint16_t s = 0; s < spp; ++s) {
                for (std::uint32_t row = 0; row < height; ++row) {
                    if (TIFFReadScanline(t, buf.data(), row, s) < 0) {
                        throw FormatError("TIFF '" + path.string() + "': scanline read failed: " + g_last_error);
                    }
                    convert_samples(buf.data(), format, bits, width, 1, planes[s].data() + std::size_t(row) * width);
                }
            }
        } else {
            for (std::uint32_t row = 0; row < height; ++row) {
                if (TIFFReadScanline(t, buf.data(), row, 0) < 0) {
                    throw FormatError("TIFF '" + path.string() + "': scanline read failed: " + g_last_error);
                }
                for (std::uint16_t s = 0; s < spp; ++s) {
                    convert_samples(buf.data() + s * bytes, format, bits, width, spp,
                                    planes[s].data() + std::size_t(row) * width);
                }
            }
        }
    }
    for (std::uint16_t s = 0; s < spp; ++s) {
        r.bands[s].values = FloatPlane(width, height, std::move(planes[s]));
    }
    return r;
}

void write_geotiff(const SceneRaster& raster, const fs::path& path) {
    auto tif = open_tiff(path, "w");
    if (!tif) throw WriteError("cannot create TIFF '" + path.string() + "': " + g_last_error);
    TIFF* t = tif.get();
    const auto& g = raster.grid;
    const auto spp = static_cast<std::uint16_t>(raster.bands.size());

    TIFFSetField(t, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(g.width));
    TIFFSetField(t, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(g.height));
    TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, spp);
    TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, std::uint16_t{32});
    TIFFSetField(t, TIFFTAG_SAMPLEFORMAT, std::uint16_t{SAMPLEFORMAT_IEEEFP});
    TIFFSetField(t, TIFFTAG_PLANARCONFIG, std::uint16_t{PLANARCONFIG_SEPARATE});
    TIFFSetField(t, TIFFTAG_PHOTOMETRIC, std::uint16_t{PHOTOMETRIC_MINISBLACK});
    TIFFSetField(t, TIFFTAG_COMPRESSION, std::uint16_t{COMPRESSION_NONE});
    TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(t, 0));
    if (spp > 1) {
        std::vector<std::uint16_t> extra(spp - 1, EXTRASAMPLE_UNSPECIFIED);
        TIFFSetField(t, TIFFTAG_EXTRASAMPLES, static_cast<std::uint16_t>(extra.size()), extra.data());
    }

    if (g.pixel_size_y < 0.0) {
        std::array<double, 3> scale{g.pixel_size_x, -g.pixel_size_y, 0.0};
        std::array<double, 6> tie{0.0, 0.0, 0.0, g.origin_x, g.origin_y, 0.0};
        TIFFSetField(t, kModelPixelScale, std::uint16_t{3}, scale.data());
        TIFFSetField(t, kModelTiepoint, std::uint16_t{6}, tie.data());
    } else {
        std::array<double, 16> m{g.pixel_size_x, 0, 0, g.origin_x, 0, g.pixel_size_y, 0, g.origin_y,
                                 0, 0, 0, 0, 0, 0, 0, 1};
        TIFFSetField(t, kModelTransformation, std::uint16_t{16}, m.data());
    }

    std::vector<std::uint16_t> keys{1, 1, 0, 0};
    auto add_key = [&](std::uint16_t id, std::uint16_t loc, std::uint16_t count, std::uint16_t value) {
        keys.insert(keys.end(), {id, loc, count, value});
        ++keys[3];
    };
    std::string citation;
    auto code = epsg_code(g.crs_id);
    bool geographic = code && *code >= 4000 && *code < 5000;
    add_key(kGTModelTypeGeoKey, 0, 1, geographic ? 2 : 1);
    add_key(kGTRasterTypeGeoKey, 0, 1, 1);
    if (code) {
        add_key(geographic ? kGeographicTypeGeoKey : kProjectedCSTypeGeoKey, 0, 1,
                static_cast<std::uint16_t>(*code));
    } else if (!g.crs_id.empty()) {
        citation = g.crs_id + "|";
        add_key(kGTCitationGeoKey, static_cast<std::uint16_t>(kGeoAsciiParams),
                static_cast<std::uint16_t>(citation.size()), 0);
    }
    TIFFSetField(t, kGeoKeyDirectory, static_cast<std::uint16_t>(keys.size()), keys.data());
    if (!citation.empty()) TIFFSetField(t, kGeoAsciiParams, citation.c_str());

    auto nodata = format_nodata(raster.nodata);
    TIFFSetField(t, kGdalNoData, nodata.c_str());

    json meta = json::object();
    meta["crs"] = g.crs_id;
    meta["bands"] = json::array();
    for (const auto& b : raster.bands) {
        meta["bands"].push_back({{"name", b.name},
                                 {"wavelength_nm", b.wavelength_nm ? json(*b.wavelength_nm) : json(nullptr)}});
    }
    if (raster.acquisition_date) {
        meta["date"] = format_date(*raster.acquisition_date);
        std::string dt = format_date(*raster.acquisition_date) + " 00:00:00";
        dt[4] = ':';
        dt[7] = ':';
        TIFFSetField(t, TIFFTAG_DATETIME, dt.c_str());
    }
    auto desc = meta.dump();
    TIFFSetField(t, TIFFTAG_IMAGEDESCRIPTION, desc.c_str());

    for (std::uint16_t s = 0; s < spp; ++s) {
        const auto& plane = raster.bands[s].values;
        std::vector<float> row(g.width);
        for (std::size_t y = 0; y < g.height; ++y) {
            auto src = plane.row(y);
            std::copy(src.begin(), src.end(), row.begin());
            if (TIFFWriteScanline(t, row.data(), static_cast<std::uint32_t>(y), s) < 0) {
                throw WriteError("TIFF '" + path.string() + "': scanline write failed: " + g_last_error);
            }
        }
    }
    if (!TIFFWriteDirectory(t)) throw WriteError("TIFF '" + path.string() + "': " + g_last_error);
}

}  // namespace dde::detail
