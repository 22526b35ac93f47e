#pragma once

#include <cstdint>
#include <filesystem>

#include "dde/geo.hpp"
#include "dde/plane.hpp"
#include "dde/predictor.hpp"
#include "dde/stack.hpp"

namespace dde {

// Denominator N of the detection percentage and the mean probability.
enum class ObservationCount {
    per_pixel,  // N_ij = number of valid observations of the pixel
    global,     // N = number of dates; masked observations count as p = 0
};

inline constexpr std::size_t kDefaultMinObs = 3;

struct MdmOptions {
    ThresholdPreset threshold = ThresholdPreset::opt();
    std::size_t min_obs = kDefaultMinObs;
    ObservationCount count_mode = ObservationCount::per_pixel;
    unsigned workers = 1;
};

// Marine Debris Mapping index per pixel:
//   D    = 100 / N * #{k : p_k >= T}     (detection percentage)
//   Pbar = 1 / N * sum_k p_k             (mean probability)
//   MDM  = D * Pbar                      (0..100)
// Pixels with fewer than min_obs valid observations are NaN in all float planes.
struct MdmRaster {
    GeoGrid grid;
    DoublePlane detection_pct;
    DoublePlane mean_prob;
    DoublePlane mdm;
    Plane<std::uint32_t> obs_count;

    bool valid(std::size_t i) const noexcept { return !std::isnan(mdm[i]); }
    std::size_t valid_count() const noexcept;
};

DoublePlane detection_rate(const DateStack& stack, const ThresholdPreset& t, std::size_t min_obs,
                           ObservationCount mode = ObservationCount::per_pixel);
DoublePlane mean_probability(const DateStack& stack, std::size_t min_obs,
                             ObservationCount mode = ObservationCount::per_pixel);
MdmRaster compute_mdm(const DateStack& stack, const MdmOptions& options);

// Sum in fixed pairwise order; the result depends only on the sequence.
double pairwise_sum(std::span<const double> values) noexcept;

// 4-band raster: detection_pct, mean_prob, mdm, obs_count (float32, NaN nodata).
SceneRaster mdm_to_scene(const MdmRaster& m);
MdmRaster mdm_from_scene(const SceneRaster& s);
// lat,lon,detection_pct,mean_prob,mdm,obs_count for every valid pixel, row-major.
void write_mdm_csv(const MdmRaster& m, const std::filesystem::path& path);

}  // namespace dde
