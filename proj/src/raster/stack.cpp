#include "dde/stack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dde/error.hpp"

namespace dde {

void DateStack::validate() const {
    grid.validate();
    if (layers.size() != dates.size() || valid.size() != dates.size()) {
        throw ArgumentError("stack: dates, layers and validity planes differ in count");
    }
    for (std::size_t k = 0; k < dates.size(); ++k) {
        if (k > 0 && !(dates[k - 1] < dates[k])) throw ArgumentError("stack: dates must strictly increase");
        if (layers[k].width() != grid.width || layers[k].height() != grid.height ||
            !layers[k].same_shape(valid[k])) {
            throw ArgumentError("stack: layer " + std::to_string(k) + " does not match the grid");
        }
    }
}

namespace {

constexpr double kSnapEps = 1e-9;

GeoGrid intersection_grid(const GeoGrid& ref, std::span<const SceneRaster> rasters) {
    Extent common = ref.extent();
    for (const auto& r : rasters) common = common.intersect(r.grid.extent());
    if (common.empty()) throw AlignmentError("align_stack: raster footprints do not overlap");

    auto c0 = static_cast<long long>(std::ceil(ref.col_at(common.min_x) - kSnapEps));
    auto c1 = static_cast<long long>(std::floor(ref.col_at(common.max_x) + kSnapEps));
    double ra = ref.row_at(common.min_y), rb = ref.row_at(common.max_y);
    auto r0 = static_cast<long long>(std::ceil(std::min(ra, rb) - kSnapEps));
    auto r1 = static_cast<long long>(std::floor(std::max(ra, rb) + kSnapEps));
    if (c1 <= c0 || r1 <= r0) throw AlignmentError("align_stack: footprint intersection holds no whole pixel");

    GeoGrid out = ref;
    out.width = static_cast<std::size_t>(c1 - c0);
    out.height = static_cast<std::size_t>(r1 - r0);
    out.origin_x = ref.x_at(static_cast<double>(c0));
    out.origin_y = ref.y_at(static_cast<double>(r0));
    return out;
}

}  // namespace

DateStack align_stack(std::span<const SceneRaster> rasters) {
    if (rasters.empty()) throw ArgumentError("align_stack: no rasters given");
    for (const auto& r : rasters) {
        if (r.bands.size() != 1) throw ArgumentError("align_stack: rasters must be single-band");
        if (!r.acquisition_date) throw ArgumentError("align_stack: raster has no acquisition date");
        if (r.grid.crs_id != rasters.front().grid.crs_id) {
            throw AlignmentError("align_stack: CRS mismatch ('" + r.grid.crs_id + "' vs '" +
                                 rasters.front().grid.crs_id + "')");
        }
        r.grid.validate();
    }

    std::vector<std::size_t> order(rasters.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return *rasters[a].acquisition_date < *rasters[b].acquisition_date;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (*rasters[order[i - 1]].acquisition_date == *rasters[order[i]].acquisition_date) {
            throw ArgumentError("align_stack: duplicate date " + format_date(*rasters[order[i]].acquisition_date));
        }
    }

    DateStack stack;
    stack.grid = intersection_grid(rasters[order.front()].grid, rasters);
    const auto& g = stack.grid;

    for (std::size_t idx : order) {
        const auto& src = rasters[idx];
        const auto& sg = src.grid;
        const auto& values = src.bands.front().values;
        FloatPlane layer(g.width, g.height, kNoDataF);
        MaskPlane valid(g.width, g.height, 0);

        std::vector<long long> src_cols(g.width);
        for (std::size_t c = 0; c < g.width; ++c) {
            src_cols[c] = static_cast<long long>(std::floor(sg.col_at(g.center_x(c))));
        }
        for (std::size_t r = 0; r < g.height; ++r) {
            auto sr = static_cast<long long>(std::floor(sg.row_at(g.center_y(r))));
            if (sr < 0 || sr >= static_cast<long long>(sg.height)) continue;
            for (std::size_t c = 0; c < g.width; ++c) {
                auto sc = src_cols[c];
                if (sc < 0 || sc >= static_cast<long long>(sg.width)) continue;
                float v = values(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
                if (src.is_nodata(v)) continue;
                layer(r, c) = v;
                valid(r, c) = 1;
            }
        }
        stack.dates.push_back(*src.acquisition_date);
        stack.layers.push_back(std::move(layer));
        stack.valid.push_back(std::move(valid));
    }
    return stack;
}

}  // namespace dde
