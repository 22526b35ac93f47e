#include "dde/mdm.hpp"

#include <fstream>
#include <vector>

#include <fmt/format.h>

#include "dde/error.hpp"
#include "dde/parallel.hpp"

namespace dde {

namespace fs = std::filesystem;

std::size_t MdmRaster::valid_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t i = 0; i < mdm.size(); ++i) n += valid(i) ? 1 : 0;
    return n;
}

double pairwise_sum(std::span<const double> v) noexcept {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

struct PixelStats {
    std::uint32_t valid = 0;
    std::uint32_t detections = 0;
    double sum = 0.0;
};

void check_inputs(const DateStack& stack, std::size_t min_obs) {
    if (stack.empty()) throw ArgumentError("MDM: stack is empty");
    if (min_obs < 1) throw ArgumentError("MDM: min_obs must be at least 1");
    stack.validate();
    for (std::size_t k = 0; k < stack.size(); ++k) {
        const auto& layer = stack.layers[k];
        const auto& valid = stack.valid[k];
        for (std::size_t i = 0; i < layer.size(); ++i) {
            if (valid[i] && !(layer[i] >= 0.0f && layer[i] <= 1.0f)) {
                throw IntegrityError("MDM: probability outside [0, 1] in layer " + std::to_string(k));
            }
        }
    }
}

// Runs fn(pixel, stats) for every pixel, with observations taken in date order.
template <class Fn>
void for_each_pixel(const DateStack& stack, double threshold_value, ObservationCount mode, unsigned workers,
                    Fn&& fn) {
    const std::size_t n_pixels = stack.grid.pixel_count();
    const std::size_t n_dates = stack.size();
    parallel_for(n_pixels, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> obs;
        obs.reserve(n_dates);
        for (std::size_t i = begin; i < end; ++i) {
            PixelStats s;
            obs.clear();
            for (std::size_t k = 0; k < n_dates; ++k) {
                if (stack.valid[k][i]) {
                    const float p = stack.layers[k][i];
                    ++s.valid;
                    if (meets_threshold(p, threshold_value)) ++s.detections;
                    obs.push_back(p);
                } else if (mode == ObservationCount::global) {
                    obs.push_back(0.0);
                }
            }
            s.sum = pairwise_sum(obs);
            fn(i, s);
        }
    });
}

double denominator(const PixelStats& s, std::size_t n_dates, ObservationCount mode) {
    return mode == ObservationCount::global ? static_cast<double>(n_dates) : static_cast<double>(s.valid);
}

}  // namespace

DoublePlane detection_rate(const DateStack& stack, const ThresholdPreset& t, std::size_t min_obs,
                           ObservationCount mode) {
    check_inputs(stack, min_obs);
    DoublePlane out(stack.grid.width, stack.grid.height, kNoDataD);
    for_each_pixel(stack, t.value(), mode, 1, [&](std::size_t i, const PixelStats& s) {
        if (s.valid < min_obs) return;
        out[i] = 100.0 * s.detections / denominator(s, stack.size(), mode);
    });
    return out;
}

DoublePlane mean_probability(const DateStack& stack, std::size_t min_obs, ObservationCount mode) {
    check_inputs(stack, min_obs);
    DoublePlane out(stack.grid.width, stack.grid.height, kNoDataD);
    for_each_pixel(stack, 1.0, mode, 1, [&](std::size_t i, const PixelStats& s) {
        if (s.valid < min_obs) return;
        out[i] = s.sum / denominator(s, stack.size(), mode);
    });
    return out;
}

MdmRaster compute_mdm(const DateStack& stack, const MdmOptions& options) {
    check_inputs(stack, options.min_obs);
    const auto& g = stack.grid;
    MdmRaster m{g, DoublePlane(g.width, g.height, kNoDataD), DoublePlane(g.width, g.height, kNoDataD),
                DoublePlane(g.width, g.height, kNoDataD), Plane<std::uint32_t>(g.width, g.height, 0u)};
    for_each_pixel(stack, options.threshold.value(), options.count_mode, options.workers,
                   [&](std::size_t i, const PixelStats& s) {
                       m.obs_count[i] = s.valid;
                       if (s.valid < options.min_obs) return;
                       const double n = denominator(s, stack.size(), options.count_mode);
                       const double d = 100.0 * s.detections / n;
                       const double pbar = s.sum / n;
                       m.detection_pct[i] = d;
                       m.mean_prob[i] = pbar;
                       m.mdm[i] = d * pbar;
                   });
    return m;
}

SceneRaster mdm_to_scene(const MdmRaster& m) {
    SceneRaster s;
    s.grid = m.grid;
    s.nodata = kNoDataF;
    auto to_float = [&](const DoublePlane& p) {
        FloatPlane out(p.width(), p.height());
        for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<float>(p[i]);
        return out;
    };
    FloatPlane n(m.grid.width, m.grid.height);
    for (std::size_t i = 0; i < n.size(); ++i) n[i] = static_cast<float>(m.obs_count[i]);
    s.bands = {{"detection_pct", to_float(m.detection_pct), std::nullopt},
               {"mean_prob", to_float(m.mean_prob), std::nullopt},
               {"mdm", to_float(m.mdm), std::nullopt},
               {"obs_count", std::move(n), std::nullopt}};
    return s;
}

MdmRaster mdm_from_scene(const SceneRaster& s) {
    auto to_double = [&](const std::string& name) {
        const auto& p = s.band(name).values;
        DoublePlane out(p.width(), p.height());
        for (std::size_t i = 0; i < p.size(); ++i) out[i] = s.is_nodata(p[i]) ? kNoDataD : p[i];
        return out;
    };
    MdmRaster m{s.grid, to_double("detection_pct"), to_double("mean_prob"), to_double("mdm"),
                Plane<std::uint32_t>(s.grid.width, s.grid.height, 0u)};
    const auto& n = s.band("obs_count").values;
    for (std::size_t i = 0; i < n.size(); ++i) m.obs_count[i] = static_cast<std::uint32_t>(n[i]);
    return m;
}

void write_mdm_csv(const MdmRaster& m, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("cannot write '" + path.string() + "'");
    const Geolocator geo(m.grid.crs_id);
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "lat,lon,detection_pct,mean_prob,mdm,obs_count\n");
    for (std::size_t r = 0; r < m.grid.height; ++r) {
        for (std::size_t c = 0; c < m.grid.width; ++c) {
            const std::size_t i = r * m.grid.width + c;
            if (!m.valid(i)) continue;
            LatLon ll = geo.pixel_center(m.grid, r, c);
            fmt::format_to(std::back_inserter(buf), "{:.8f},{:.8f},{:.10g},{:.10g},{:.10g},{}\n", ll.lat, ll.lon,
                           m.detection_pct[i], m.mean_prob[i], m.mdm[i], m.obs_count[i]);
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw WriteError("failed writing '" + path.string() + "'");
}

}  // namespace dde
