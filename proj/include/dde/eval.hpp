#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dde/plane.hpp"
#include "dde/predictor.hpp"
#include "dde/raster.hpp"

namespace dde {

using ClassPlane = Plane<std::int32_t>;
inline constexpr std::int32_t kNoLabel = -1;

struct ConfusionMatrix {
    std::vector<std::int32_t> labels;
    std::vector<std::string> names;    // display names, parallel to labels
    std::vector<std::uint64_t> counts;  // row = reference, col = predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::int32_t> labels, std::vector<std::string> names = {});

    std::size_t size() const noexcept { return labels.size(); }
    std::uint64_t& at(std::size_t ref, std::size_t pred) { return counts[ref * labels.size() + pred]; }
    std::uint64_t at(std::size_t ref, std::size_t pred) const { return counts[ref * labels.size() + pred]; }
    std::uint64_t total() const noexcept;
    std::size_t index_of(std::int32_t label) const;  // LabelError when absent

    // Element-wise sum; both matrices must share the label list.
    void merge(const ConfusionMatrix& other);
};

// Pixels where either plane is kNoLabel are skipped.
ConfusionMatrix confusion(const ClassPlane& pred, const ClassPlane& ref, const std::vector<std::int32_t>& labels,
                          unsigned workers = 1);

// Rounds float class codes to integers; NaN or the raster nodata become kNoLabel.
ClassPlane class_plane_from_raster(const SceneRaster& raster);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou = 0.0;
    std::uint64_t support = 0;  // reference pixels of the class
};

struct OverallMetrics {
    double miou = 0.0;  // over classes present in the reference
    double precision_micro = 0.0;
    double recall_micro = 0.0;
    double f1_micro = 0.0;
    double precision_macro = 0.0;
    double recall_macro = 0.0;
    double f1_macro = 0.0;
    std::size_t classes_present = 0;
};

struct MetricSet {
    std::vector<std::int32_t> labels;
    std::vector<std::string> names;
    std::vector<ClassMetrics> per_class;
    OverallMetrics overall;

    const ClassMetrics& of(std::int32_t label) const;
};

// Ratios with a zero denominator are 0.
MetricSet metrics(const ConfusionMatrix& cm);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // thresholds strictly increasing
};

// Thresholds: i / (steps + 1) for i = 1..steps, plus every distinct probability
// strictly inside (0, 1). A pixel is positive when meets_threshold(p, t).
// NaN probabilities are skipped.
PrCurve pr_curve(std::span<const float> probs, std::span<const std::uint8_t> labels, std::size_t steps = 100);

enum class Objective { max_f1, min_precision };

struct SelectionObjective {
    Objective kind = Objective::max_f1;
    double min_precision = 0.95;

    static SelectionObjective max_f1() { return {Objective::max_f1, 0.0}; }
    static SelectionObjective precision_at_least(double p0) { return {Objective::min_precision, p0}; }
};

// max_f1: highest F1, ties to the higher threshold.
// min_precision: lowest threshold with precision >= p0, else NoSolutionError.
ThresholdPreset select_threshold(const PrCurve& curve, const SelectionObjective& objective);

std::string metrics_json(const MetricSet& m, const ConfusionMatrix& cm);
std::string metrics_table(const MetricSet& m);
std::string curve_csv(const PrCurve& curve);

}  // namespace dde
