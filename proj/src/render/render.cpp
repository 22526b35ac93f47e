#include "dde/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "dde/error.hpp"

namespace dde {

namespace fs = std::filesystem;

std::string Rgb::hex() const { return fmt::format("#{:02x}{:02x}{:02x}", r, g, b); }

Rgb ColourRamp::at(double v) const {
    if (stops.empty()) throw RenderError("colour ramp has no stops");
    if (stops.size() == 1 || !(hi > lo) || std::isnan(v)) return stops.front();
    const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0) * static_cast<double>(stops.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    auto mix = [f](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround(a + (b - a) * f));
    };
    const Rgb& a = stops[i];
    const Rgb& b = stops[i + 1];
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

ColourRamp ColourRamp::density() {
    return {{{255, 255, 204}, {254, 217, 118}, {253, 141, 60}, {227, 26, 28}, {128, 0, 38}}, 0.0, 100.0};
}

ColourRamp ColourRamp::hotspot() {
    return {{{198, 219, 239}, {66, 146, 198}, {8, 48, 107}}, 0.0, 100.0};
}

namespace {

struct Frame {
    double min_x, max_y, scale, margin;

    double px(double x) const { return margin + (x - min_x) * scale; }
    double py(double y) const { return margin + (max_y - y) * scale; }
};

double nice_length(double target) {
    const double p = std::pow(10.0, std::floor(std::log10(target)));
    for (double m : {5.0, 2.0, 1.0}) {
        if (m * p <= target) return m * p;
    }
    return p;
}

void legend(fmt::memory_buffer& out, const char* title, const ColourRamp& ramp, double x, double y) {
    auto it = std::back_inserter(out);
    fmt::format_to(it, "<g class=\"legend\" transform=\"translate({:.1f},{:.1f})\">\n", x, y);
    fmt::format_to(it, "<text x=\"0\" y=\"-6\" font-size=\"11\">{}</text>\n", title);
    constexpr int kSteps = 5;
    for (int i = 0; i < kSteps; ++i) {
        const double v = ramp.lo + (ramp.hi - ramp.lo) * i / (kSteps - 1);
        fmt::format_to(it, "<rect x=\"0\" y=\"{}\" width=\"14\" height=\"14\" fill=\"{}\"/>", i * 18,
                       ramp.at(v).hex());
        fmt::format_to(it, "<text x=\"20\" y=\"{}\" font-size=\"10\">{:.3g}</text>\n", i * 18 + 11, v);
    }
    fmt::format_to(it, "</g>\n");
}

}  // namespace

std::string render_svg(const HexBinMap& map, const RenderStyle& style) {
    if (map.cells.empty()) throw RenderError("hexbin map has no cells to draw");
    if (!(style.canvas_width_px > 2 * style.margin_px)) throw RenderError("canvas narrower than its margins");

    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    for (const auto& c : map.cells) {
        for (const auto& v : hex_vertices(c.coord, map.width_m)) {
            min_x = std::min(min_x, v.x);
            max_x = std::max(max_x, v.x);
            min_y = std::min(min_y, v.y);
            max_y = std::max(max_y, v.y);
        }
    }
    const double inner = style.canvas_width_px - 2 * style.margin_px;
    const Frame f{min_x, max_y, inner / (max_x - min_x), style.margin_px};
    const double legend_w = 130.0;
    const double width = style.canvas_width_px + legend_w;
    const double height = (max_y - min_y) * f.scale + 2 * style.margin_px + 30.0;

    // Hexagon colour scale is anchored at 0 so empty-density cells get the ramp minimum.
    ColourRamp hex_ramp = ColourRamp::density();
    hex_ramp.hi = 0.0;
    for (const auto& c : map.cells) hex_ramp.hi = std::max(hex_ramp.hi, c.trimmed_mean_mdm);
    if (hex_ramp.hi <= 0.0) hex_ramp.hi = 1.0;
    ColourRamp top_ramp = ColourRamp::hotspot();
    if (!map.top_pixels.empty()) {
        top_ramp.lo = map.top_pixels.back().mdm;
        top_ramp.hi = map.top_pixels.front().mdm;
    }

    fmt::memory_buffer out;
    auto it = std::back_inserter(out);
    fmt::format_to(it,
                   "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
                   "viewBox=\"0 0 {0:.0f} {1:.0f}\" font-family=\"sans-serif\">\n",
                   width, height);
    fmt::format_to(it, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    fmt::format_to(it, "<text x=\"{:.1f}\" y=\"30\" font-size=\"16\">{}</text>\n", style.margin_px, style.title);

    fmt::format_to(it, "<g class=\"cells\" stroke=\"#555555\" stroke-width=\"0.6\">\n");
    for (const auto& c : map.cells) {
        const auto v = hex_vertices(c.coord, map.width_m);
        fmt::format_to(it, "<path class=\"hex\" data-q=\"{}\" data-r=\"{}\" data-value=\"{:.6g}\" fill=\"{}\" d=\"",
                       c.coord.q, c.coord.r, c.trimmed_mean_mdm, hex_ramp.at(c.trimmed_mean_mdm).hex());
        for (std::size_t i = 0; i < v.size(); ++i) {
            fmt::format_to(it, "{}{:.2f},{:.2f} ", i == 0 ? 'M' : 'L', f.px(v[i].x), f.py(v[i].y));
        }
        fmt::format_to(it, "Z\"/>\n");
    }
    fmt::format_to(it, "</g>\n");

    fmt::format_to(it, "<g class=\"top-pixels\" stroke=\"#000000\" stroke-width=\"0.8\">\n");
    for (std::size_t i = 0; i < map.top_pixels.size(); ++i) {
        const auto& p = map.top_pixels[i];
        const XY xy = project_local(p.position.lat, p.position.lon, map.projection);
        fmt::format_to(it,
                       "<circle class=\"top\" data-rank=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.1f}\" fill=\"{}\"/>\n",
                       i + 1, f.px(xy.x), f.py(xy.y), style.marker_radius_px, top_ramp.at(p.mdm).hex());
    }
    fmt::format_to(it, "</g>\n");

    const double lx = style.canvas_width_px + 10.0;
    legend(out, "Hexagon MDM", hex_ramp, lx, style.margin_px);
    legend(out, "Top pixel MDM", top_ramp, lx, style.margin_px + 130.0);

    const double bar_m = nice_length((max_x - min_x) / 4.0);
    const double bar_px = bar_m * f.scale;
    const double by = height - 20.0;
    fmt::format_to(it, "<g class=\"scale-bar\">\n");
    fmt::format_to(it, "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#000000\" stroke-width=\"2\"/>\n",
                   style.margin_px, by, style.margin_px + bar_px);
    if (bar_m >= 1000.0) {
        fmt::format_to(it, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{:g} km</text>\n",
                       style.margin_px + bar_px + 6.0, by + 4.0, bar_m / 1000.0);
    } else {
        fmt::format_to(it, "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{:g} m</text>\n",
                       style.margin_px + bar_px + 6.0, by + 4.0, bar_m);
    }
    fmt::format_to(it, "</g>\n</svg>\n");
    return fmt::to_string(out);
}

void render_map(const HexBinMap& map, const fs::path& path, const RenderStyle& style) {
    const std::string svg = render_svg(map, style);
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw RenderError("cannot write map to '" + path.string() + "'");
    out << svg;
    if (!out) throw RenderError("failed writing map to '" + path.string() + "'");
}

}  // namespace dde
