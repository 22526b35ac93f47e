#include "dde/indices.hpp"

#include <cmath>

#include "dde/error.hpp"

namespace dde {

BandNaming BandNaming::defaults() {
    BandNaming n;
    n.names[static_cast<int>(BandRole::red)] = {"B04", "B4", "red", "rhos_665", "rhos_664"};
    n.names[static_cast<int>(BandRole::re2)] = {"B06", "B6", "re2", "rhos_740", "rhos_739"};
    n.names[static_cast<int>(BandRole::nir)] = {"B08", "B8", "nir", "rhos_833", "rhos_842"};
    n.names[static_cast<int>(BandRole::swir1)] = {"B11", "swir1", "rhos_1614", "rhos_1610"};
    return n;
}

void BandQuad::validate() const {
    grid.validate();
    for (const FloatPlane* p : {&red, &re2, &nir, &swir1}) {
        if (p->width() != grid.width || p->height() != grid.height) {
            throw ArgumentError("band quad planes do not match the grid");
        }
    }
}

BandQuad BandQuad::from_scene(const SceneRaster& scene, const BandNaming& naming) {
    auto pick = [&](BandRole role, const char* label) -> FloatPlane {
        for (const auto& name : naming.for_role(role)) {
            if (const Band* b = scene.find_band(name)) {
                FloatPlane out = b->values;
                for (auto& v : out.values()) {
                    if (scene.is_nodata(v)) v = kNoDataF;
                }
                return out;
            }
        }
        throw FormatError(std::string("scene has no band for role '") + label + "'");
    };
    BandQuad q;
    q.grid = scene.grid;
    q.red = pick(BandRole::red, "red");
    q.re2 = pick(BandRole::re2, "re2");
    q.nir = pick(BandRole::nir, "nir");
    q.swir1 = pick(BandRole::swir1, "swir1");
    q.validate();
    return q;
}

SceneRaster BandQuad::to_scene(std::optional<Date> date) const {
    SceneRaster s;
    s.grid = grid;
    s.acquisition_date = date;
    s.nodata = kNoDataF;
    s.bands = {{"B04", red, wavelengths.red},
               {"B06", re2, wavelengths.re2},
               {"B08", nir, wavelengths.nir},
               {"B11", swir1, wavelengths.swir1}};
    return s;
}

double ndvi_value(double red, double nir) {
    double denom = nir + red;
    if (std::isnan(red) || std::isnan(nir) || denom == 0.0) return kNoDataD;
    return (nir - red) / denom;
}

double fdi_value(double red, double re2, double nir, double swir1, const BandWavelengths& wl) {
    if (std::isnan(red) || std::isnan(re2) || std::isnan(nir) || std::isnan(swir1)) return kNoDataD;
    const double slope = (wl.nir - wl.red) / (wl.swir1 - wl.red) * kFdiSlopeScale;
    const double baseline = re2 + (swir1 - re2) * slope;
    return nir - baseline;
}

IndexRaster ndvi(const BandQuad& q) {
    q.validate();
    IndexRaster out{q.grid, FloatPlane(q.grid.width, q.grid.height), IndexKind::ndvi};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = static_cast<float>(ndvi_value(q.red[i], q.nir[i]));
    }
    return out;
}

IndexRaster fdi(const BandQuad& q) {
    q.validate();
    IndexRaster out{q.grid, FloatPlane(q.grid.width, q.grid.height), IndexKind::fdi};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = static_cast<float>(fdi_value(q.red[i], q.re2[i], q.nir[i], q.swir1[i], q.wavelengths));
    }
    return out;
}

}  // namespace dde
