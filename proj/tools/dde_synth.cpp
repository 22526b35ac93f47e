#include <iostream>

#include <CLI11.hpp>

#include "dde/error.hpp"
#include "dde/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Writes a synthetic scene time series and a ready-to-run pipeline config"};
    std::string out;
    dde::SynthOptions o;
    app.add_option("output", out, "Output directory")->required();
    app.add_option("--dates", o.dates, "Number of acquisitions")->check(CLI::Range(1, 100));
    app.add_option("--size", o.width, "Scene width and height in pixels")->check(CLI::Range(64, 4096));
    app.add_option("--seed", o.seed, "Random seed");
    app.add_option("--min-obs", o.min_obs, "min_obs written to the config")->check(CLI::PositiveNumber);
    app.add_flag("--probabilities", o.write_probabilities, "Also write per-date probability rasters");
    CLI11_PARSE(app, argc, argv);
    o.height = o.width;
    try {
        const auto sc = dde::generate_scenario(out, o);
        std::cout << sc.config.string() << '\n';
    } catch (const dde::Error& e) {
        std::cerr << "dde_synth: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
