#include "dde/eval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fmt/format.h>

#include "json.hpp"

#include "dde/error.hpp"
#include "dde/parallel.hpp"

namespace dde {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::vector<std::int32_t> l, std::vector<std::string> n)
    : labels(std::move(l)), names(std::move(n)), counts(labels.size() * labels.size(), 0) {
    if (labels.empty()) throw ArgumentError("confusion matrix needs at least one class label");
    auto sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ArgumentError("duplicate class label");
    }
    if (std::find(labels.begin(), labels.end(), kNoLabel) != labels.end()) {
        throw ArgumentError("class label -1 is reserved for nodata");
    }
    if (names.empty()) {
        for (auto v : labels) names.push_back(fmt::format("class {}", v));
    } else if (names.size() != labels.size()) {
        throw ArgumentError("class names and labels differ in length");
    }
}

std::uint64_t ConfusionMatrix::total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

std::size_t ConfusionMatrix::index_of(std::int32_t label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return i;
    }
    throw LabelError(fmt::format("label {} is not in the class list", label));
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.labels != labels) throw ArgumentError("cannot merge confusion matrices with different labels");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

ConfusionMatrix confusion(const ClassPlane& pred, const ClassPlane& ref, const std::vector<std::int32_t>& labels,
                          unsigned workers) {
    if (!pred.same_shape(ref)) throw ArgumentError("prediction and reference planes differ in shape");
    ConfusionMatrix total(labels);
    std::mutex m;
    const std::size_t w = pred.width();
    parallel_for(pred.height(), workers, [&](std::size_t r0, std::size_t r1) {
        ConfusionMatrix local(labels, total.names);
        for (std::size_t i = r0 * w; i < r1 * w; ++i) {
            if (pred[i] == kNoLabel || ref[i] == kNoLabel) continue;
            ++local.at(local.index_of(ref[i]), local.index_of(pred[i]));
        }
        std::lock_guard lock(m);
        total.merge(local);
    });
    return total;
}

ClassPlane class_plane_from_raster(const SceneRaster& raster) {
    raster.validate();
    if (raster.bands.size() != 1) throw FormatError("class raster must have exactly one band");
    const auto& v = raster.bands.front().values;
    ClassPlane out(v.width(), v.height(), kNoLabel);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!raster.is_nodata(v[i])) out[i] = static_cast<std::int32_t>(std::lround(v[i]));
    }
    return out;
}

const ClassMetrics& MetricSet::of(std::int32_t label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return per_class[i];
    }
    throw LabelError(fmt::format("label {} is not in the metric set", label));
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

MetricSet metrics(const ConfusionMatrix& cm) {
    const std::size_t k = cm.size();
    if (k == 0 || cm.total() == 0) throw ArgumentError("confusion matrix is empty");
    MetricSet out;
    out.labels = cm.labels;
    out.names = cm.names;
    out.per_class.resize(k);

    double tp_sum = 0, fp_sum = 0, fn_sum = 0;
    double iou_sum = 0, p_sum = 0, r_sum = 0, f1_sum = 0;
    for (std::size_t c = 0; c < k; ++c) {
        double tp = static_cast<double>(cm.at(c, c)), fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += static_cast<double>(cm.at(o, c));
            fn += static_cast<double>(cm.at(c, o));
        }
        auto& m = out.per_class[c];
        m.precision = ratio(tp, tp + fp);
        m.recall = ratio(tp, tp + fn);
        m.f1 = harmonic(m.precision, m.recall);
        m.iou = ratio(tp, tp + fp + fn);
        m.support = static_cast<std::uint64_t>(tp + fn);
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn;
        if (m.support > 0) {
            ++out.overall.classes_present;
            iou_sum += m.iou;
            p_sum += m.precision;
            r_sum += m.recall;
            f1_sum += m.f1;
        }
    }
    auto& o = out.overall;
    const auto n = static_cast<double>(o.classes_present);
    o.miou = ratio(iou_sum, n);
    o.precision_macro = ratio(p_sum, n);
    o.recall_macro = ratio(r_sum, n);
    o.f1_macro = ratio(f1_sum, n);
    o.precision_micro = ratio(tp_sum, tp_sum + fp_sum);
    o.recall_micro = ratio(tp_sum, tp_sum + fn_sum);
    o.f1_micro = harmonic(o.precision_micro, o.recall_micro);
    return out;
}

PrCurve pr_curve(std::span<const float> probs, std::span<const std::uint8_t> labels, std::size_t steps) {
    if (probs.size() != labels.size()) throw ArgumentError("probabilities and labels differ in length");
    if (steps < 2) throw ArgumentError("pr_curve needs at least 2 steps");

    std::vector<float> pos, neg;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (std::isnan(probs[i])) continue;
        (labels[i] ? pos : neg).push_back(probs[i]);
    }
    if (pos.empty()) throw DegenerateCurveError("no positive labels; precision-recall curve is undefined");
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());

    std::vector<double> thresholds;
    for (std::size_t i = 1; i <= steps; ++i) {
        thresholds.push_back(static_cast<double>(i) / static_cast<double>(steps + 1));
    }
    for (const auto* v : {&pos, &neg}) {
        for (float p : *v) {
            if (p > 0.0f && p < 1.0f) thresholds.push_back(p);
        }
    }
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    // Count of values meeting the threshold, via the float-precision cut.
    auto at_or_above = [](const std::vector<float>& v, double t) {
        const float cut = static_cast<float>(t);
        return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), cut));
    };
    PrCurve curve;
    curve.points.reserve(thresholds.size());
    const auto total_pos = static_cast<double>(pos.size());
    for (double t : thresholds) {
        const double tp = at_or_above(pos, t);
        const double fp = at_or_above(neg, t);
        PrPoint p;
        p.threshold = t;
        p.precision = ratio(tp, tp + fp);
        p.recall = tp / total_pos;
        p.f1 = harmonic(p.precision, p.recall);
        curve.points.push_back(p);
    }
    return curve;
}

ThresholdPreset select_threshold(const PrCurve& curve, const SelectionObjective& objective) {
    if (curve.points.empty()) throw ArgumentError("precision-recall curve is empty");
    if (objective.kind == Objective::max_f1) {
        const PrPoint* best = &curve.points.front();
        for (const auto& p : curve.points) {
            if (p.f1 >= best->f1) best = &p;  // ascending thresholds: >= keeps the higher one on ties
        }
        return ThresholdPreset::custom(best->threshold);
    }
    if (!(objective.min_precision > 0.0 && objective.min_precision <= 1.0)) {
        throw ArgumentError("precision target must lie in (0, 1]");
    }
    for (const auto& p : curve.points) {
        if (p.precision >= objective.min_precision) return ThresholdPreset::custom(p.threshold);
    }
    throw NoSolutionError(fmt::format("no threshold reaches precision {}", objective.min_precision));
}

std::string metrics_json(const MetricSet& m, const ConfusionMatrix& cm) {
    json j;
    j["classes"] = json::array();
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        const auto& c = m.per_class[i];
        j["classes"].push_back({{"label", m.labels[i]},
                                {"name", m.names[i]},
                                {"precision", c.precision},
                                {"recall", c.recall},
                                {"f1", c.f1},
                                {"iou", c.iou},
                                {"support", c.support}});
    }
    const auto& o = m.overall;
    j["overall"] = {{"miou", o.miou},
                    {"classes_present", o.classes_present},
                    {"micro", {{"precision", o.precision_micro}, {"recall", o.recall_micro}, {"f1", o.f1_micro}}},
                    {"macro", {{"precision", o.precision_macro}, {"recall", o.recall_macro}, {"f1", o.f1_macro}}}};
    json rows = json::array();
    for (std::size_t r = 0; r < cm.size(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < cm.size(); ++c) row.push_back(cm.at(r, c));
        rows.push_back(row);
    }
    j["confusion"] = {{"labels", cm.labels}, {"rows_reference_cols_predicted", rows}};
    return j.dump(2);
}

std::string metrics_table(const MetricSet& m) {
    fmt::memory_buffer out;
    auto it = std::back_inserter(out);
    fmt::format_to(it, "{:<18}{:>10}{:>12}{:>10}{:>10}\n", "", "IoU", "Precision", "Recall", "F1-Score");
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        const auto& c = m.per_class[i];
        fmt::format_to(it, "{:<18}{:>10.4f}{:>12.4f}{:>10.4f}{:>10.4f}\n", m.names[i], c.iou, c.precision, c.recall,
                       c.f1);
    }
    const auto& o = m.overall;
    fmt::format_to(it, "\n{:<18}{:>10}{:>12}{:>10}{:>10}\n", "Overall", "mIoU", "Precision", "Recall", "F1-Score");
    fmt::format_to(it, "{:<18}{:>10.4f}{:>12.4f}{:>10.4f}{:>10.4f}\n", "  micro", o.miou, o.precision_micro,
                   o.recall_micro, o.f1_micro);
    fmt::format_to(it, "{:<18}{:>10.4f}{:>12.4f}{:>10.4f}{:>10.4f}\n", "  macro", o.miou, o.precision_macro,
                   o.recall_macro, o.f1_macro);
    return fmt::to_string(out);
}

std::string curve_csv(const PrCurve& curve) {
    fmt::memory_buffer out;
    auto it = std::back_inserter(out);
    fmt::format_to(it, "threshold,precision,recall,f1\n");
    for (const auto& p : curve.points) {
        fmt::format_to(it, "{:.9g},{:.10g},{:.10g},{:.10g}\n", p.threshold, p.precision, p.recall, p.f1);
    }
    return fmt::to_string(out);
}

}  // namespace dde
