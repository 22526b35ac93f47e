#pragma once

#include <span>
#include <vector>

#include "dde/date.hpp"
#include "dde/geo.hpp"
#include "dde/plane.hpp"
#include "dde/raster.hpp"

namespace dde {

// Date-aligned single-band layers on one grid. Entries with valid == 0 are
// ignored by every consumer regardless of the layer value.
struct DateStack {
    GeoGrid grid;
    std::vector<Date> dates;
    std::vector<FloatPlane> layers;
    std::vector<MaskPlane> valid;

    std::size_t size() const noexcept { return dates.size(); }
    bool empty() const noexcept { return dates.empty(); }

    // Throws ArgumentError unless the layers share the grid and dates strictly increase.
    void validate() const;
};

// Resamples single-band rasters (nearest neighbour) onto the intersection of
// their footprints, snapped to the grid of the earliest-dated raster.
// Entries are invalid where the source is nodata or outside its footprint.
DateStack align_stack(std::span<const SceneRaster> rasters);

}  // namespace dde
