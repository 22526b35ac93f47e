#include "dde/tiling.hpp"

#include <algorithm>

#include "dde/error.hpp"

namespace dde {

std::vector<std::size_t> patch_offsets(std::size_t extent, std::size_t patch, std::size_t overlap) {
    std::vector<std::size_t> offsets;
    if (patch >= extent) {
        offsets.push_back(0);
        return offsets;
    }
    const std::size_t stride = patch - overlap;
    std::size_t o = 0;
    for (; o + patch <= extent; o += stride) offsets.push_back(o);
    if (offsets.back() + patch < extent) offsets.push_back(extent - patch);
    return offsets;
}

PatchSet tile(const SceneRaster& raster, int patch_size, int overlap) {
    if (patch_size <= 0) throw ArgumentError("patch_size must be positive");
    if (overlap < 0) throw ArgumentError("overlap must be nonnegative");
    if (patch_size <= overlap) throw ArgumentError("patch_size must exceed overlap");
    raster.grid.validate();

    PatchSet set;
    set.patch_size = static_cast<std::size_t>(patch_size);
    set.overlap = static_cast<std::size_t>(overlap);
    set.band_count = raster.bands.size();
    set.source_grid = raster.grid;

    const auto& g = raster.grid;
    const auto row_offsets = patch_offsets(g.height, set.patch_size, set.overlap);
    const auto col_offsets = patch_offsets(g.width, set.patch_size, set.overlap);
    const std::size_t rows = std::min(set.patch_size, g.height);
    const std::size_t cols = std::min(set.patch_size, g.width);

    for (std::size_t ro : row_offsets) {
        for (std::size_t co : col_offsets) {
            Patch p{ro, co, rows, cols, {}};
            p.data.reserve(set.band_count * rows * cols);
            for (const auto& band : raster.bands) {
                for (std::size_t r = 0; r < rows; ++r) {
                    auto src = band.values.row(ro + r).subspan(co, cols);
                    p.data.insert(p.data.end(), src.begin(), src.end());
                }
            }
            set.patches.push_back(std::move(p));
        }
    }
    return set;
}

FloatPlane stitch(const PatchSet& patch_set, std::span<const FloatPlane> planes) {
    if (planes.size() != patch_set.patches.size()) {
        throw ArgumentError("stitch: expected " + std::to_string(patch_set.patches.size()) + " planes, got " +
                            std::to_string(planes.size()));
    }
    const auto& g = patch_set.source_grid;
    DoublePlane sum(g.width, g.height, 0.0);
    Plane<std::uint32_t> count(g.width, g.height, 0u);
    for (std::size_t i = 0; i < planes.size(); ++i) {
        const auto& p = patch_set.patches[i];
        const auto& plane = planes[i];
        if (plane.width() != p.cols || plane.height() != p.rows) {
            throw ArgumentError("stitch: plane " + std::to_string(i) + " does not match its patch size");
        }
        for (std::size_t r = 0; r < p.rows; ++r) {
            for (std::size_t c = 0; c < p.cols; ++c) {
                float v = plane(r, c);
                if (std::isnan(v)) continue;
                sum(p.row_offset + r, p.col_offset + c) += v;
                ++count(p.row_offset + r, p.col_offset + c);
            }
        }
    }
    FloatPlane out(g.width, g.height, kNoDataF);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (count[i] == 1) {
            out[i] = static_cast<float>(sum[i]);
        } else if (count[i] > 1) {
            out[i] = static_cast<float>(sum[i] / count[i]);
        }
    }
    return out;
}

}  // namespace dde
