#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dde/hexbin.hpp"

namespace dde {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;

    std::string hex() const;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Piecewise-linear ramp over evenly spaced stops; values outside [lo, hi] clamp.
struct ColourRamp {
    std::vector<Rgb> stops;
    double lo = 0.0;
    double hi = 100.0;

    Rgb at(double v) const;

    static ColourRamp density();  // pale yellow to dark red, for hexagons
    static ColourRamp hotspot();  // light to deep blue, for top pixels
};

struct RenderStyle {
    double canvas_width_px = 900.0;
    double margin_px = 70.0;
    double marker_radius_px = 5.0;
    std::string title = "Marine debris density";
};

// One <path class="hex"> per occupied cell, a circle per top pixel, two
// legends and a metric scale bar. Throws RenderError when there is nothing to draw.
std::string render_svg(const HexBinMap& map, const RenderStyle& style = {});
void render_map(const HexBinMap& map, const std::filesystem::path& path, const RenderStyle& style = {});

}  // namespace dde
