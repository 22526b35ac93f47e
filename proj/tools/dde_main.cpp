#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dde/acquisition.hpp"
#include "dde/config.hpp"
#include "dde/eval.hpp"
#include "dde/hexbin.hpp"
#include "dde/indices.hpp"
#include "dde/masking.hpp"
#include "dde/mdm.hpp"
#include "dde/pipeline.hpp"
#include "dde/predictor.hpp"
#include "dde/raster.hpp"
#include "dde/render.hpp"
#include "dde/stack.hpp"

namespace fs = std::filesystem;
using namespace dde;

namespace {

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::validation: return 2;
        case ErrorCategory::transport: return 3;
        case ErrorCategory::integrity: return 4;
        case ErrorCategory::internal: break;
    }
    return 5;
}

// Settings that may come from the config file or be overridden on the command line.
struct Overrides {
    std::optional<unsigned> workers;
    std::optional<std::string> output_dir;
    std::optional<std::string> run_id;
    std::optional<std::string> threshold;
    std::optional<double> hex_width_m;
    std::optional<double> trim;
    std::optional<std::size_t> top_k;
    std::optional<std::size_t> min_obs;
    std::optional<std::string> land_polygons;
    std::optional<std::string> n_mode;

    void add_common(CLI::App* app) {
        app->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
        app->add_option("--output-dir", output_dir, "Root directory for run outputs");
        app->add_option("--run-id", run_id, "Run directory name (default: derived from the config hash)");
    }
    void add_threshold(CLI::App* app) {
        app->add_option("--threshold", threshold, "Detection threshold: opt, hp or a value in (0, 1)");
        app->add_option("--min-obs", min_obs, "Minimum valid observations per pixel")->check(CLI::PositiveNumber);
        app->add_option("--n-mode", n_mode, "Observation count: per_pixel or global")
            ->check(CLI::IsMember({"per_pixel", "global"}));
    }
    void add_hexbin(CLI::App* app) {
        app->add_option("--hex-width-m", hex_width_m, "Hexagon width, flat to flat, in metres");
        app->add_option("--trim", trim, "Fraction of lowest values dropped per hexagon");
        app->add_option("--top-k", top_k, "Number of top pixels to report");
    }
    void add_land(CLI::App* app) {
        app->add_option("--land-polygons", land_polygons, "GeoJSON land polygons");
    }

    ThresholdPreset threshold_or(ThresholdPreset fallback) const {
        return threshold ? ThresholdPreset::parse(*threshold) : fallback;
    }
    ObservationCount count_mode_or(ObservationCount fallback) const {
        if (!n_mode) return fallback;
        return *n_mode == "global" ? ObservationCount::global : ObservationCount::per_pixel;
    }

    void apply(PipelineConfig& c) const {
        if (workers) c.workers = *workers;
        if (output_dir) c.output_dir = fs::absolute(*output_dir);
        if (run_id) c.run_id = *run_id;
        c.threshold = threshold_or(c.threshold);
        if (hex_width_m) c.hex_width_m = *hex_width_m;
        if (trim) c.trim_fraction = *trim;
        if (top_k) c.top_k = *top_k;
        if (min_obs) c.min_obs = *min_obs;
        if (land_polygons) c.land_polygons = fs::absolute(*land_polygons);
        c.count_mode = count_mode_or(c.count_mode);
    }
};

PipelineConfig config_with_overrides(const fs::path& path, const Overrides& o) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    PipelineConfig c = parse_config(ss.str(), fs::absolute(path).parent_path());
    o.apply(c);
    c.validate();
    return c;
}

int report(const RunLedger& ledger) {
    for (const auto& s : ledger.stages) {
        std::cout << fmt::format("{:<8} {:<10} {:>8.2f}s", stage_name(s.stage), status_name(s.status), s.wall_time_s);
        if (s.status == StageStatus::failed) std::cout << "  " << s.error;
        std::cout << '\n';
    }
    std::cout << "run directory: " << ledger.run_dir.string() << '\n';
    for (const auto& s : ledger.stages) {
        if (s.status == StageStatus::failed) return exit_code(s.error_category.value_or(ErrorCategory::internal));
    }
    return 0;
}

int run_config(const std::string& config, const Overrides& o, Stage last, bool force) {
    const PipelineConfig c = config_with_overrides(config, o);
    return report(run_pipeline(c, {last, force}));
}

std::pair<double, double> parse_pair(const std::string& text, const char* what) {
    double a = 0.0, b = 0.0;
    char comma = 0;
    std::istringstream ss(text);
    if (!(ss >> a >> comma >> b) || comma != ',' || !ss.eof()) {
        throw ArgumentError(fmt::format("{} must be given as LAT,LON", what));
    }
    return {a, b};
}

Date raster_date(const SceneRaster& r, const fs::path& path) {
    if (r.acquisition_date) return *r.acquisition_date;
    if (auto d = find_date_in_name(path.filename().string())) return *d;
    throw MetadataError("no acquisition date in '" + path.string() + "'");
}

std::vector<std::int32_t> parse_labels(const std::string& text) {
    std::vector<std::int32_t> out;
    std::istringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ArgumentError("bad label '" + tok + "'");
        }
    }
    if (out.empty()) throw ArgumentError("no labels given");
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw WriteError("failed writing '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Marine debris density maps from satellite scene time series"};
    app.require_subcommand(1);
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Errors only");

    std::string config;
    bool force = false;
    Overrides ov;

    // run
    auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
    run->add_option("--config", config, "Pipeline config (TOML)")->required()->check(CLI::ExistingFile);
    run->add_flag("--force", force, "Ignore cached stage outputs");
    ov.add_common(run);
    ov.add_threshold(run);
    ov.add_hexbin(run);
    ov.add_land(run);

    // acquire
    auto* acquire = app.add_subcommand("acquire", "Build a scene manifest, locally or from a catalog");
    std::string scene_dir, corner_a, corner_b, date_start, date_end, endpoint, download_dir, manifest_out;
    std::string product_type = "S2MSI2A";
    acquire->add_option("--config", config, "Pipeline config; runs the acquire stage")->check(CLI::ExistingFile);
    acquire->add_flag("--force", force, "Ignore cached stage outputs");
    acquire->add_option("--scene-dir", scene_dir, "Directory of scene folders")->check(CLI::ExistingDirectory);
    acquire->add_option("--catalog", endpoint, "Catalog endpoint (default: DDE_CATALOG_ENDPOINT)");
    acquire->add_option("--download-dir", download_dir, "Where catalog downloads are stored");
    acquire->add_option("--product-type", product_type, "Catalog product type");
    acquire->add_option("--corner-a", corner_a, "ROI corner LAT,LON");
    acquire->add_option("--corner-b", corner_b, "Opposite ROI corner LAT,LON");
    acquire->add_option("--start", date_start, "First date, YYYY-MM-DD");
    acquire->add_option("--end", date_end, "Last date, YYYY-MM-DD");
    acquire->add_option("-o,--output", manifest_out, "Manifest JSON path");
    ov.add_common(acquire);

    // predict
    auto* predict = app.add_subcommand("predict", "Per-pixel debris probabilities");
    std::string scene_path, weights_path, prob_out;
    predict->add_option("--config", config, "Pipeline config; runs up to the predict stage")->check(CLI::ExistingFile);
    predict->add_flag("--force", force, "Ignore cached stage outputs");
    predict->add_option("--scene", scene_path, "Corrected scene raster")->check(CLI::ExistingFile);
    predict->add_option("--weights", weights_path, "Baseline model weights (JSON)")->check(CLI::ExistingFile);
    predict->add_option("-o,--output", prob_out, "Probability raster path");
    ov.add_common(predict);

    // mdm
    auto* mdm = app.add_subcommand("mdm", "Marine debris density index over a probability stack");
    std::vector<std::string> prob_files;
    std::string mdm_out, mdm_csv;
    mdm->add_option("--config", config, "Pipeline config; runs up to the mdm stage")->check(CLI::ExistingFile);
    mdm->add_flag("--force", force, "Ignore cached stage outputs");
    mdm->add_option("--probs", prob_files, "Masked probability rasters, one per date")->check(CLI::ExistingFile);
    mdm->add_option("-o,--output", mdm_out, "MDM raster path");
    mdm->add_option("--csv", mdm_csv, "Per-pixel CSV path");
    ov.add_common(mdm);
    ov.add_threshold(mdm);
    ov.add_land(mdm);

    // hexbin
    auto* hexbin = app.add_subcommand("hexbin", "Trimmed-mean hexagon aggregation of an MDM raster");
    std::string mdm_in, origin, hex_out;
    hexbin->add_option("--config", config, "Pipeline config; runs up to the hexbin stage")->check(CLI::ExistingFile);
    hexbin->add_flag("--force", force, "Ignore cached stage outputs");
    hexbin->add_option("--mdm", mdm_in, "MDM raster")->check(CLI::ExistingFile);
    hexbin->add_option("--origin", origin, "Projection origin LAT,LON (default: raster centre)");
    hexbin->add_option("-o,--out-dir", hex_out, "Directory for hexbin.json, cells.csv and top.csv");
    ov.add_common(hexbin);
    ov.add_threshold(hexbin);
    ov.add_hexbin(hexbin);
    ov.add_land(hexbin);

    // render
    auto* render = app.add_subcommand("render", "SVG density map");
    std::string hex_in, svg_out, title;
    render->add_option("--config", config, "Pipeline config; runs the full pipeline")->check(CLI::ExistingFile);
    render->add_flag("--force", force, "Ignore cached stage outputs");
    render->add_option("--hexbin", hex_in, "hexbin.json")->check(CLI::ExistingFile);
    render->add_option("-o,--output", svg_out, "SVG path");
    render->add_option("--title", title, "Map title");
    ov.add_common(render);
    ov.add_threshold(render);
    ov.add_hexbin(render);
    ov.add_land(render);

    // eval
    auto* eval = app.add_subcommand("eval", "Segmentation metrics and threshold selection");
    std::string pred_path, ref_path, probs_path, labels = "0,1", eval_out, select = "max_f1";
    std::int32_t positive = 1;
    std::size_t steps = 100;
    eval->add_option("--ref", ref_path, "Reference class raster")->required()->check(CLI::ExistingFile);
    eval->add_option("--pred", pred_path, "Predicted class raster")->check(CLI::ExistingFile);
    eval->add_option("--probs", probs_path, "Probability raster for the PR curve")->check(CLI::ExistingFile);
    eval->add_option("--labels", labels, "Comma-separated class codes");
    eval->add_option("--positive", positive, "Reference code of the positive class for the PR curve");
    eval->add_option("--steps", steps, "Uniform PR thresholds");
    eval->add_option("--select", select, "max_f1 or a minimum precision such as 0.95");
    eval->add_option("-o,--output-dir", eval_out, "Directory for metrics.json, metrics.txt and pr_curve.csv");
    eval->add_option("--workers", ov.workers, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    auto logger = spdlog::stderr_color_mt("dde");
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

    try {
        const unsigned workers = ov.workers.value_or(1);

        if (*run) return run_config(config, ov, Stage::render, force);

        if (*acquire) {
            if (!config.empty()) return run_config(config, ov, Stage::acquire, force);
            if (corner_a.empty() || corner_b.empty() || date_start.empty() || date_end.empty() || manifest_out.empty()) {
                throw ValidationError("acquire needs --config, or --corner-a, --corner-b, --start, --end and --output");
            }
            const auto [la, oa] = parse_pair(corner_a, "--corner-a");
            const auto [lb, ob] = parse_pair(corner_b, "--corner-b");
            RoiSpec roi{{la, oa}, {lb, ob}, parse_date(date_start), parse_date(date_end)};
            roi.validate();
            Manifest m;
            if (!scene_dir.empty()) {
                m = build_manifest(roi, scene_dir);
            } else {
                CatalogQuery q;
                q.endpoint = endpoint.empty() ? catalog_endpoint_from_env().value_or("") : endpoint;
                if (q.endpoint.empty()) throw ValidationError("give --scene-dir, --catalog or set DDE_CATALOG_ENDPOINT");
                q.product_type = product_type;
                auto client = make_http_client();
                m.roi = roi;
                m.created_at = utc_timestamp();
                m.scenes = query_catalog(roi, q, *client);
                if (!download_dir.empty()) {
                    fs::create_directories(download_dir);
                    fetch_all(m.scenes, download_dir, *client, workers, q.retry);
                }
                m.normalise();
            }
            m.save(manifest_out);
            std::cout << fmt::format("{} scenes, {} warnings -> {}\n", m.scenes.size(), m.warnings, manifest_out);
            return 0;
        }

        if (*predict) {
            if (!config.empty()) return run_config(config, ov, Stage::predict, force);
            if (scene_path.empty() || weights_path.empty() || prob_out.empty()) {
                throw ValidationError("predict needs --config, or --scene, --weights and --output");
            }
            const SceneRaster scene = read_raster(scene_path);
            const auto p = predict_baseline(BandQuad::from_scene(scene), BaselineWeights::load(weights_path),
                                            raster_date(scene, scene_path));
            write_raster(p.to_scene(), prob_out);
            std::cout << "probabilities -> " << prob_out << '\n';
            return 0;
        }

        if (*mdm) {
            if (!config.empty()) return run_config(config, ov, Stage::mdm, force);
            if (prob_files.empty() || mdm_out.empty()) throw ValidationError("mdm needs --config, or --probs and --output");
            std::vector<SceneRaster> layers;
            std::optional<LandPolygons> land;
            if (ov.land_polygons) land = LandPolygons::load_geojson(*ov.land_polygons);
            for (const auto& f : prob_files) {
                ProbabilityRaster p = ingest_probability(f, raster_date(read_raster(f), f));
                if (land) p = apply_validity(p, rasterize_land(*land, p.grid, workers));
                layers.push_back(p.to_scene());
            }
            const MdmRaster r = compute_mdm(align_stack(layers), {ov.threshold_or(ThresholdPreset::opt()),
                                                                  ov.min_obs.value_or(kDefaultMinObs),
                                                                  ov.count_mode_or(ObservationCount::per_pixel), workers});
            write_raster(mdm_to_scene(r), mdm_out);
            if (!mdm_csv.empty()) write_mdm_csv(r, mdm_csv);
            std::cout << fmt::format("{} valid pixels -> {}\n", r.valid_count(), mdm_out);
            return 0;
        }

        if (*hexbin) {
            if (!config.empty()) return run_config(config, ov, Stage::hexbin, force);
            if (mdm_in.empty() || hex_out.empty()) throw ValidationError("hexbin needs --config, or --mdm and --out-dir");
            const MdmRaster r = mdm_from_scene(read_raster(mdm_in));
            LocalProjection proj;
            if (!origin.empty()) {
                std::tie(proj.origin_lat, proj.origin_lon) = parse_pair(origin, "--origin");
            } else {
                const LatLon c = Geolocator(r.grid.crs_id)
                                     .to_lat_lon(r.grid.x_at(r.grid.width / 2.0), r.grid.y_at(r.grid.height / 2.0));
                proj.origin_lat = c.lat;
                proj.origin_lon = c.lon;
            }
            const HexBinMap map = aggregate(r, proj,
                                            {ov.hex_width_m.value_or(kDefaultHexWidthM),
                                             ov.trim.value_or(kDefaultTrimFraction), ov.top_k.value_or(kDefaultTopK),
                                             workers});
            fs::create_directories(hex_out);
            write_hexbin_json(map, fs::path(hex_out) / "hexbin.json");
            write_cells_csv(map, fs::path(hex_out) / "cells.csv");
            write_top_csv(map, fs::path(hex_out) / "top.csv");
            std::cout << fmt::format("{} cells -> {}\n", map.cells.size(), hex_out);
            return 0;
        }

        if (*render) {
            if (!config.empty()) return run_config(config, ov, Stage::render, force);
            if (hex_in.empty() || svg_out.empty()) throw ValidationError("render needs --config, or --hexbin and --output");
            RenderStyle style;
            if (!title.empty()) style.title = title;
            render_map(read_hexbin_json(hex_in), svg_out, style);
            std::cout << "map -> " << svg_out << '\n';
            return 0;
        }

        if (*eval) {
            if (pred_path.empty() && probs_path.empty()) throw ValidationError("eval needs --pred and/or --probs");
            const ClassPlane ref = class_plane_from_raster(read_raster(ref_path));
            const fs::path out = eval_out.empty() ? fs::path() : fs::path(eval_out);
            if (!pred_path.empty()) {
                const ClassPlane pred = class_plane_from_raster(read_raster(pred_path));
                const ConfusionMatrix cm = confusion(pred, ref, parse_labels(labels), workers);
                const MetricSet m = metrics(cm);
                std::cout << metrics_table(m);
                if (!out.empty()) {
                    write_file(out / "metrics.json", metrics_json(m, cm));
                    write_file(out / "metrics.txt", metrics_table(m));
                }
            }
            if (!probs_path.empty()) {
                const SceneRaster pr = read_raster(probs_path);
                if (!pr.grid.same_shape(read_raster_info(ref_path).grid)) {
                    throw AlignmentError("probability and reference rasters differ in shape");
                }
                std::vector<float> probs;
                std::vector<std::uint8_t> truth;
                const auto& values = pr.bands.front().values;
                for (std::size_t i = 0; i < ref.size(); ++i) {
                    if (ref[i] == kNoLabel || pr.is_nodata(values[i])) continue;
                    probs.push_back(values[i]);
                    truth.push_back(ref[i] == positive ? 1 : 0);
                }
                const PrCurve curve = pr_curve(probs, truth, steps);
                const auto objective = select == "max_f1"
                                           ? SelectionObjective::max_f1()
                                           : SelectionObjective::precision_at_least(std::stod(select));
                const ThresholdPreset t = select_threshold(curve, objective);
                std::cout << fmt::format("selected threshold ({}): {:.6f}\n", select, t.value());
                if (!out.empty()) write_file(out / "pr_curve.csv", curve_csv(curve));
            }
            return 0;
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_code(e.category());
    } catch (const std::invalid_argument& e) {
        spdlog::error("invalid number: {}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 5;
    }
    return 0;
}
