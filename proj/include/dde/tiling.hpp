#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dde/raster.hpp"

namespace dde {

inline constexpr int kDefaultPatchSize = 32;

struct Patch {
    std::size_t row_offset = 0;
    std::size_t col_offset = 0;
    std::size_t rows = 0;  // patch_size unless the source is smaller than a patch
    std::size_t cols = 0;
    std::vector<float> data;  // band-major: data[(band * rows + r) * cols + c]

    float at(std::size_t band, std::size_t r, std::size_t c) const { return data[(band * rows + r) * cols + c]; }
};

struct PatchSet {
    std::size_t patch_size = 0;
    std::size_t overlap = 0;
    std::size_t band_count = 0;
    std::vector<Patch> patches;
    GeoGrid source_grid;
};

// Start offsets along one axis: multiples of (patch - overlap), with the last
// one clamped so the final patch ends exactly at the edge.
std::vector<std::size_t> patch_offsets(std::size_t extent, std::size_t patch, std::size_t overlap);

PatchSet tile(const SceneRaster& raster, int patch_size = kDefaultPatchSize, int overlap = 0);

// Reassembles one plane per patch onto the source grid. Pixels covered by
// several patches get the arithmetic mean of the non-NaN contributions.
FloatPlane stitch(const PatchSet& patch_set, std::span<const FloatPlane> planes);

}  // namespace dde
