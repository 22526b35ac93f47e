#include "dde/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "dde/acquisition.hpp"
#include "dde/digest.hpp"
#include "dde/hexbin.hpp"
#include "dde/indices.hpp"
#include "dde/masking.hpp"
#include "dde/mdm.hpp"
#include "dde/predictor.hpp"
#include "dde/raster.hpp"
#include "dde/render.hpp"
#include "dde/stack.hpp"

namespace dde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bumped whenever a stage's outputs change meaning, so old caches are not reused.
constexpr std::string_view kStageFormat = "dde-stage-1";

constexpr std::string_view kStageFile = "stage.json";
constexpr std::string_view kManifestFile = "manifest.json";
constexpr std::string_view kCatalogFile = "catalog.json";
constexpr std::string_view kIndexFile = "scenes.json";
constexpr std::string_view kMdmRaster = "mdm.tif";
constexpr std::string_view kMdmCsv = "mdm.csv";
constexpr std::string_view kHexJson = "hexbin.json";
constexpr std::string_view kCellsCsv = "cells.csv";
constexpr std::string_view kTopCsv = "top.csv";
constexpr std::string_view kMapSvg = "map.svg";

// One scene passed between stages: a file inside the stage directory.
struct IndexEntry {
    std::string scene_id;
    Date date;
    std::string file;
};

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw WriteError("failed writing '" + path.string() + "'");
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

void write_index(const std::vector<IndexEntry>& entries, const fs::path& dir) {
    json j = json::array();
    for (const auto& e : entries) j.push_back({{"scene_id", e.scene_id}, {"date", format_date(e.date)}, {"file", e.file}});
    write_json(j, dir / kIndexFile);
}

std::vector<IndexEntry> read_index(const fs::path& dir) {
    const json j = read_json(dir / kIndexFile);
    std::vector<IndexEntry> out;
    try {
        for (const auto& e : j) {
            out.push_back({e.at("scene_id").get<std::string>(), parse_date(e.at("date").get<std::string>()),
                           e.at("file").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw ParseError("stage index in '" + dir.string() + "': " + e.what());
    }
    return out;
}

// sha256 of every regular file below `dir`, keyed by relative path.
json tree_digest(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    json j = json::object();
    for (const auto& f : files) j[fs::relative(f, dir).generic_string()] = file_hex_digest(f);
    return j;
}

json optional_file_digest(const std::optional<fs::path>& p) {
    return p ? json(file_hex_digest(*p)) : json(nullptr);
}

json optional_tree_digest(const std::optional<fs::path>& p) { return p ? tree_digest(*p) : json(nullptr); }

json roi_json(const RoiSpec& roi) {
    return {{"corner_a", {roi.corner_a.lat, roi.corner_a.lon}},
            {"corner_b", {roi.corner_b.lat, roi.corner_b.lon}},
            {"date_start", format_date(roi.date_start)},
            {"date_end", format_date(roi.date_end)}};
}

ProbabilityRaster crop_probability(const ProbabilityRaster& p, const PixelWindow& w) {
    ProbabilityRaster out = p;
    const SceneRaster cropped = crop(p.to_scene(), w);
    out.grid = cropped.grid;
    out.probs = cropped.bands.front().values;
    return out;
}

SceneRaster read_and_crop(const fs::path& path, const Extent& roi_box) {
    SceneRaster r = read_raster(path);
    const auto w = lat_lon_window(r.grid, roi_box);
    if (!w) throw AlignmentError("'" + path.string() + "' does not overlap the ROI");
    return crop(r, *w);
}

std::optional<fs::path> first_existing(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".tif", ".tiff", ".json"}) {
        fs::path p = dir / (stem + ext);
        if (fs::is_regular_file(p)) return p;
    }
    return std::nullopt;
}

std::string scene_file_stem(const IndexEntry& e) { return e.scene_id + "_" + format_date_compact(e.date); }

class Runner {
public:
    Runner(const PipelineConfig& config, fs::path run_dir) : cfg_(config), run_dir_(std::move(run_dir)) {}

    fs::path dir(Stage s) const { return run_dir_ / std::string(stage_name(s)); }

    std::string input_hash(Stage s) const {
        json j{{"format", kStageFormat}, {"stage", stage_name(s)}, {"roi", roi_json(cfg_.roi)}};
        auto upstream = [&](Stage u) { j["upstream"][std::string(stage_name(u))] = outputs_.at(u); };
        switch (s) {
            case Stage::acquire:
                if (cfg_.scene_dir) {
                    j["scenes"] = tree_digest(*cfg_.scene_dir);
                } else {
                    j["catalog"] = {{"endpoint", catalog_endpoint()},
                                    {"product_type", cfg_.catalog->product_type},
                                    {"download_dir", cfg_.catalog->download_dir.generic_string()},
                                    {"corrected", tree_digest(cfg_.catalog->corrected_dir)}};
                }
                break;
            case Stage::ingest: upstream(Stage::acquire); break;
            case Stage::indices: upstream(Stage::ingest); break;
            case Stage::predict:
                upstream(Stage::ingest);
                j["weights"] = optional_file_digest(cfg_.weights_path);
                j["probabilities"] = optional_tree_digest(cfg_.probability_dir);
                break;
            case Stage::mask:
                upstream(Stage::acquire);
                upstream(Stage::predict);
                j["scene_class"] = optional_tree_digest(cfg_.scene_class_dir);
                j["land"] = optional_file_digest(cfg_.land_polygons);
                break;
            case Stage::mdm:
                upstream(Stage::mask);
                j["threshold"] = cfg_.threshold.value();
                j["min_obs"] = cfg_.min_obs;
                j["n_mode"] = cfg_.count_mode == ObservationCount::global ? "global" : "per_pixel";
                break;
            case Stage::hexbin:
                upstream(Stage::mdm);
                j["hexbin"] = {{"width_m", cfg_.hex_width_m}, {"trim", cfg_.trim_fraction}, {"top_k", cfg_.top_k}};
                break;
            case Stage::render: upstream(Stage::hexbin); break;
        }
        return sha256_hex(j.dump());
    }

    // True when stage.json matches the input hash and every artifact is intact.
    bool cached(Stage s, const std::string& input, StageRecord& rec) const {
        const fs::path file = dir(s) / kStageFile;
        if (!fs::is_regular_file(file)) return false;
        try {
            const json j = read_json(file);
            if (j.at("input_hash").get<std::string>() != input) return false;
            for (const auto& a : j.at("artifacts")) {
                const fs::path p = run_dir_ / a.at("path").get<std::string>();
                if (!fs::is_regular_file(p) || file_hex_digest(p) != a.at("sha256").get<std::string>()) return false;
                rec.artifacts.emplace_back(a.at("path").get<std::string>());
            }
            rec.output_hash = j.at("output_hash").get<std::string>();
        } catch (const std::exception&) {
            rec.artifacts.clear();
            return false;
        }
        return true;
    }

    void seal(Stage s, const std::string& input, StageRecord& rec) const {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir(s))) {
            if (e.is_regular_file() && e.path().filename() != kStageFile) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        json arts = json::array();
        Hasher h;
        h.update(input);
        for (const auto& f : files) {
            const std::string rel = fs::relative(f, run_dir_).generic_string();
            const std::string digest = file_hex_digest(f);
            arts.push_back({{"path", rel}, {"sha256", digest}});
            const bool manifest = f.filename() == kManifestFile || f.filename() == kCatalogFile;
            h.update(s == Stage::acquire && manifest ? manifest_content(f) : rel + ' ' + digest);
            h.update("\n");
            rec.artifacts.emplace_back(rel);
        }
        rec.output_hash = h.hex_digest();
        write_json({{"stage", stage_name(s)}, {"input_hash", input}, {"output_hash", rec.output_hash}, {"artifacts", arts}},
                   dir(s) / kStageFile);
    }

    void record_output(Stage s, const std::string& hash) { outputs_[s] = hash; }

    void execute(Stage s) {
        switch (s) {
            case Stage::acquire: return acquire();
            case Stage::ingest: return ingest();
            case Stage::indices: return indices();
            case Stage::predict: return predict();
            case Stage::mask: return mask();
            case Stage::mdm: return mdm();
            case Stage::hexbin: return hexbin();
            case Stage::render: return render();
        }
    }

private:
    // Scene bytes are already in the input hash; dropping the timestamp and the
    // absolute paths keeps the hash independent of when and where the run happened.
    static std::string manifest_content(const fs::path& path) {
        json j = read_json(path);
        j.erase("created_at");
        for (auto& s : j["scenes"]) s.erase("local_path");
        return j.dump();
    }

    std::string catalog_endpoint() const {
        if (!cfg_.catalog->endpoint.empty()) return cfg_.catalog->endpoint;
        const auto env = catalog_endpoint_from_env();
        if (!env) throw ValidationError("catalog endpoint missing: set DDE_CATALOG_ENDPOINT");
        return *env;
    }

    void acquire() {
        const fs::path out = dir(Stage::acquire);
        if (cfg_.scene_dir) {
            const Manifest m = build_manifest(cfg_.roi, *cfg_.scene_dir);
            if (m.warnings > 0) spdlog::warn("acquire: {} unrecognised entries in '{}'", m.warnings, cfg_.scene_dir->string());
            m.save(out / kManifestFile);
            return;
        }
        CatalogQuery q;
        q.endpoint = catalog_endpoint();
        q.product_type = cfg_.catalog->product_type;
        auto client = make_http_client();
        Manifest fetched;
        fetched.roi = cfg_.roi;
        fetched.created_at = utc_timestamp();
        fetched.scenes = query_catalog(cfg_.roi, q, *client);
        fs::create_directories(cfg_.catalog->download_dir);
        fetch_all(fetched.scenes, cfg_.catalog->download_dir, *client, cfg_.workers, q.retry);
        fetched.normalise();
        fetched.save(out / kCatalogFile);
        spdlog::info("acquire: {} scenes downloaded; reading corrected scenes from '{}'", fetched.scenes.size(),
                     cfg_.catalog->corrected_dir.string());
        build_manifest(cfg_.roi, cfg_.catalog->corrected_dir).save(out / kManifestFile);
    }

    void ingest() {
        const Manifest m = Manifest::load(dir(Stage::acquire) / kManifestFile);
        const fs::path out = dir(Stage::ingest);
        const Extent box = cfg_.roi.bounds();
        std::vector<IndexEntry> entries;
        std::map<Date, std::string> by_date;
        for (const auto& s : m.scenes) {
            if (!cfg_.roi.contains(s.sensing_date)) continue;
            if (!s.local_path) throw MetadataError("scene '" + s.scene_id + "' has no local raster");
            SceneRaster raster = read_raster(*s.local_path);
            const auto w = lat_lon_window(raster.grid, box);
            if (!w) {
                spdlog::warn("ingest: scene '{}' does not cover the ROI, skipped", s.scene_id);
                continue;
            }
            if (auto [it, fresh] = by_date.emplace(s.sensing_date, s.scene_id); !fresh) {
                throw ValidationError(fmt::format("scenes '{}' and '{}' share the date {}; one scene per date is supported",
                                                  it->second, s.scene_id, format_date(s.sensing_date)));
            }
            const BandQuad quad = BandQuad::from_scene(crop(raster, *w));
            IndexEntry e{s.scene_id, s.sensing_date, ""};
            e.file = scene_file_stem(e) + ".tif";
            write_raster(quad.to_scene(s.sensing_date), out / e.file);
            entries.push_back(std::move(e));
        }
        if (entries.empty()) throw ValidationError("no scene covers the ROI within its date range");
        write_index(entries, out);
    }

    void indices() {
        const fs::path in = dir(Stage::ingest), out = dir(Stage::indices);
        for (const auto& e : read_index(in)) {
            const BandQuad quad = BandQuad::from_scene(read_raster(in / e.file));
            for (const auto& idx : {ndvi(quad), fdi(quad)}) {
                const char* name = idx.kind == IndexKind::ndvi ? "ndvi" : "fdi";
                SceneRaster r{quad.grid, {{name, idx.values, std::nullopt}}, e.date, kNoDataF};
                write_raster(r, out / fmt::format("{}_{}.tif", scene_file_stem(e), name));
            }
        }
    }

    void predict() {
        const fs::path in = dir(Stage::ingest), out = dir(Stage::predict);
        std::optional<BaselineWeights> weights;
        if (cfg_.weights_path) weights = BaselineWeights::load(*cfg_.weights_path);
        std::vector<IndexEntry> entries;
        for (const auto& e : read_index(in)) {
            ProbabilityRaster p;
            if (weights) {
                p = predict_baseline(BandQuad::from_scene(read_raster(in / e.file)), *weights, e.date);
            } else {
                const auto file = find_probability_file(*cfg_.probability_dir, e.scene_id, e.date);
                if (!file) {
                    throw MetadataError(fmt::format("no probability file '{}' in '{}'",
                                                    probability_file_name(e.scene_id, e.date),
                                                    cfg_.probability_dir->string()));
                }
                p = ingest_probability(*file, e.date);
                const auto w = lat_lon_window(p.grid, cfg_.roi.bounds());
                if (!w) throw AlignmentError("probability file '" + file->string() + "' does not overlap the ROI");
                p = crop_probability(p, *w);
            }
            IndexEntry o{e.scene_id, e.date, probability_file_name(e.scene_id, e.date)};
            write_raster(p.to_scene(), out / o.file);
            entries.push_back(std::move(o));
        }
        write_index(entries, out);
    }

    std::optional<SceneClassMask> scene_class_for(const IndexEntry& e, const Manifest& m) const {
        std::optional<fs::path> file;
        if (cfg_.scene_class_dir) {
            file = first_existing(*cfg_.scene_class_dir, e.scene_id);
            if (!file) {
                throw MetadataError(fmt::format("no scene-class mask for '{}' in '{}'", e.scene_id,
                                                cfg_.scene_class_dir->string()));
            }
        } else {
            auto it = std::find_if(m.scenes.begin(), m.scenes.end(), [&](const auto& s) { return s.scene_id == e.scene_id; });
            if (it != m.scenes.end() && it->local_path) file = first_existing(it->local_path->parent_path(), "class");
        }
        if (!file) return std::nullopt;
        return SceneClassMask::from_raster(read_and_crop(*file, cfg_.roi.bounds()));
    }

    void mask() {
        const fs::path in = dir(Stage::predict), out = dir(Stage::mask);
        const Manifest m = Manifest::load(dir(Stage::acquire) / kManifestFile);
        std::optional<LandPolygons> land;
        if (cfg_.land_polygons) land = LandPolygons::load_geojson(*cfg_.land_polygons).crop(cfg_.roi.bounds());
        std::vector<IndexEntry> entries;
        json summary = json::array();
        for (const auto& e : read_index(in)) {
            ProbabilityRaster p = ingest_probability(in / e.file, e.date);
            std::uint8_t sources = kMaskNoData;
            if (const auto scm = scene_class_for(e, m)) {
                if (scm->grid != p.grid) {
                    throw AlignmentError("scene-class mask of '" + e.scene_id + "' is not on the probability grid");
                }
                p = apply_scene_mask(p, *scm);
                sources |= kMaskSceneClass;
            } else {
                spdlog::warn("mask: no scene-class mask for '{}'", e.scene_id);
            }
            if (land) {
                p = apply_validity(p, rasterize_land(*land, p.grid, cfg_.workers));
                sources |= kMaskLand;
            }
            IndexEntry o{e.scene_id, e.date, "masked_" + e.file};
            write_raster(p.to_scene(), out / o.file);
            summary.push_back({{"scene_id", e.scene_id},
                               {"valid_pixels", validity_from_probabilities(p).valid_count()},
                               {"scene_class", (sources & kMaskSceneClass) != 0},
                               {"land", (sources & kMaskLand) != 0}});
            entries.push_back(std::move(o));
        }
        write_index(entries, out);
        write_json(summary, out / "masks.json");
    }

    void mdm() {
        const fs::path in = dir(Stage::mask), out = dir(Stage::mdm);
        std::vector<SceneRaster> layers;
        for (const auto& e : read_index(in)) layers.push_back(read_raster(in / e.file));
        const DateStack stack = align_stack(layers);
        const MdmRaster r = compute_mdm(stack, {cfg_.threshold, cfg_.min_obs, cfg_.count_mode, cfg_.workers});
        if (r.valid_count() == 0) {
            spdlog::warn("mdm: no pixel has {} valid observations", cfg_.min_obs);
        }
        write_raster(mdm_to_scene(r), out / kMdmRaster);
        write_mdm_csv(r, out / kMdmCsv);
    }

    void hexbin() {
        const fs::path out = dir(Stage::hexbin);
        const MdmRaster r = mdm_from_scene(read_raster(dir(Stage::mdm) / kMdmRaster));
        const LatLon c = cfg_.roi.centroid();
        const HexBinMap map = aggregate(r, LocalProjection{c.lat, c.lon},
                                        {cfg_.hex_width_m, cfg_.trim_fraction, cfg_.top_k, cfg_.workers});
        write_hexbin_json(map, out / kHexJson);
        write_cells_csv(map, out / kCellsCsv);
        write_top_csv(map, out / kTopCsv);
    }

    void render() {
        const HexBinMap map = read_hexbin_json(dir(Stage::hexbin) / kHexJson);
        RenderStyle style;
        style.title = fmt::format("Marine debris density {} to {}", format_date(cfg_.roi.date_start),
                                  format_date(cfg_.roi.date_end));
        render_map(map, dir(Stage::render) / kMapSvg, style);
    }

    const PipelineConfig& cfg_;
    fs::path run_dir_;
    std::map<Stage, std::string> outputs_;
};

std::optional<ErrorCategory> parse_category(std::string_view s) {
    if (s == "validation") return ErrorCategory::validation;
    if (s == "transport") return ErrorCategory::transport;
    if (s == "integrity") return ErrorCategory::integrity;
    if (s == "internal") return ErrorCategory::internal;
    return std::nullopt;
}

std::string_view category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::validation: return "validation";
        case ErrorCategory::transport: return "transport";
        case ErrorCategory::integrity: return "integrity";
        case ErrorCategory::internal: break;
    }
    return "internal";
}

}  // namespace

std::string_view stage_name(Stage s) noexcept {
    switch (s) {
        case Stage::acquire: return "acquire";
        case Stage::ingest: return "ingest";
        case Stage::indices: return "indices";
        case Stage::predict: return "predict";
        case Stage::mask: return "mask";
        case Stage::mdm: return "mdm";
        case Stage::hexbin: return "hexbin";
        case Stage::render: return "render";
    }
    return "?";
}

Stage parse_stage(std::string_view name) {
    for (Stage s : kAllStages) {
        if (stage_name(s) == name) return s;
    }
    throw ArgumentError(fmt::format("unknown stage '{}'", name));
}

std::string_view status_name(StageStatus s) noexcept {
    switch (s) {
        case StageStatus::succeeded: return "succeeded";
        case StageStatus::skipped: return "skipped";
        case StageStatus::failed: break;
    }
    return "failed";
}

bool RunLedger::failed() const noexcept {
    return std::any_of(stages.begin(), stages.end(), [](const auto& s) { return s.status == StageStatus::failed; });
}

const StageRecord* RunLedger::find(Stage s) const noexcept {
    auto it = std::find_if(stages.begin(), stages.end(), [s](const auto& r) { return r.stage == s; });
    return it == stages.end() ? nullptr : &*it;
}

void RunLedger::save(const fs::path& path) const {
    json j{{"run_id", run_id}, {"config_hash", config_hash}, {"stages", json::array()}};
    for (const auto& s : stages) {
        json e{{"stage", stage_name(s.stage)},
               {"status", status_name(s.status)},
               {"wall_time_s", s.wall_time_s},
               {"input_hash", s.input_hash},
               {"output_hash", s.output_hash},
               {"artifacts", json::array()}};
        for (const auto& a : s.artifacts) e["artifacts"].push_back(a.generic_string());
        if (s.status == StageStatus::failed) {
            e["error"] = s.error;
            e["error_category"] = category_name(s.error_category.value_or(ErrorCategory::internal));
        }
        j["stages"].push_back(std::move(e));
    }
    write_json(j, path);
}

RunLedger RunLedger::load(const fs::path& path) {
    const json j = read_json(path);
    RunLedger l;
    try {
        l.run_id = j.at("run_id").get<std::string>();
        l.config_hash = j.at("config_hash").get<std::string>();
        l.run_dir = path.parent_path();
        for (const auto& e : j.at("stages")) {
            StageRecord r;
            r.stage = parse_stage(e.at("stage").get<std::string>());
            const auto status = e.at("status").get<std::string>();
            r.status = status == "succeeded" ? StageStatus::succeeded
                       : status == "skipped" ? StageStatus::skipped
                                             : StageStatus::failed;
            r.wall_time_s = e.at("wall_time_s").get<double>();
            r.input_hash = e.at("input_hash").get<std::string>();
            r.output_hash = e.at("output_hash").get<std::string>();
            for (const auto& a : e.at("artifacts")) r.artifacts.emplace_back(a.get<std::string>());
            r.error = e.value("error", "");
            if (e.contains("error_category")) r.error_category = parse_category(e["error_category"].get<std::string>());
            l.stages.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ParseError("ledger '" + path.string() + "': " + e.what());
    }
    return l;
}

std::string resolve_run_id(const PipelineConfig& config) {
    return config.run_id ? *config.run_id : "run-" + config_hash(config).substr(0, 12);
}

fs::path run_directory(const PipelineConfig& config) { return config.output_dir / resolve_run_id(config); }

RunLedger run_pipeline(const PipelineConfig& config, const RunOptions& options) {
    config.validate();
    RunLedger ledger;
    ledger.run_id = resolve_run_id(config);
    ledger.config_hash = config_hash(config);
    ledger.run_dir = run_directory(config);
    fs::create_directories(ledger.run_dir);
    const fs::path ledger_path = ledger.run_dir / "ledger.json";

    Runner runner(config, ledger.run_dir);
    bool force = options.force;
    for (Stage s : kAllStages) {
        StageRecord rec;
        rec.stage = s;
        const auto start = std::chrono::steady_clock::now();
        try {
            rec.input_hash = runner.input_hash(s);
            if (!force && runner.cached(s, rec.input_hash, rec)) {
                rec.status = StageStatus::skipped;
                spdlog::info("{}: cached", stage_name(s));
            } else {
                // Once a stage reruns, everything downstream reruns too.
                force = true;
                const fs::path d = runner.dir(s);
                fs::remove_all(d);
                fs::create_directories(d);
                spdlog::info("{}: running", stage_name(s));
                runner.execute(s);
                runner.seal(s, rec.input_hash, rec);
                rec.status = StageStatus::succeeded;
            }
            runner.record_output(s, rec.output_hash);
        } catch (const Error& e) {
            rec.status = StageStatus::failed;
            rec.error = e.what();
            rec.error_category = e.category();
        } catch (const std::exception& e) {
            rec.status = StageStatus::failed;
            rec.error = e.what();
            rec.error_category = ErrorCategory::internal;
        }
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (rec.status == StageStatus::failed) spdlog::error("{}: {}", stage_name(s), rec.error);
        ledger.stages.push_back(std::move(rec));
        ledger.save(ledger_path);
        if (ledger.stages.back().status == StageStatus::failed || s == options.last_stage) break;
    }
    return ledger;
}

}  // namespace dde
