#pragma once

#include <array>
#include <string>
#include <vector>

#include "dde/geo.hpp"
#include "dde/plane.hpp"
#include "dde/raster.hpp"

namespace dde {

// Sentinel-2 central wavelengths (nm) of the four bands the detector uses.
struct BandWavelengths {
    double red = 665.0;     // B4
    double re2 = 740.0;     // B6
    double nir = 842.0;     // B8
    double swir1 = 1610.4;  // B11
};

inline constexpr BandWavelengths kSentinel2Wavelengths{};

// Scale applied to the red-edge/SWIR baseline slope in the floating debris index.
inline constexpr double kFdiSlopeScale = 10.0;

enum class BandRole { red, re2, nir, swir1 };

// Accepted band names per role, e.g. "B04", "rhos_665".
struct BandNaming {
    std::array<std::vector<std::string>, 4> names;

    static BandNaming defaults();
    const std::vector<std::string>& for_role(BandRole role) const { return names[static_cast<int>(role)]; }
};

// Surface reflectance of bands 4, 6, 8 and 11 on one grid. Missing pixels are NaN.
struct BandQuad {
    GeoGrid grid;
    FloatPlane red;
    FloatPlane re2;
    FloatPlane nir;
    FloatPlane swir1;
    BandWavelengths wavelengths = kSentinel2Wavelengths;

    void validate() const;

    // Picks the four bands out of a scene and maps its nodata sentinel to NaN.
    static BandQuad from_scene(const SceneRaster& scene, const BandNaming& naming = BandNaming::defaults());
    // Inverse of from_scene: a 4-band raster with canonical names B04, B06, B08, B11.
    SceneRaster to_scene(std::optional<Date> date) const;
};

enum class IndexKind { ndvi, fdi };

struct IndexRaster {
    GeoGrid grid;
    FloatPlane values;
    IndexKind kind = IndexKind::ndvi;
};

double ndvi_value(double red, double nir);
double fdi_value(double red, double re2, double nir, double swir1,
                 const BandWavelengths& wl = kSentinel2Wavelengths);

IndexRaster ndvi(const BandQuad& q);
IndexRaster fdi(const BandQuad& q);

}  // namespace dde
