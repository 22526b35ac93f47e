#include "dde/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "toml.hpp"

#include "dde/digest.hpp"
#include "dde/error.hpp"

namespace dde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>, std::less<>>& schema() {
    static const std::map<std::string, std::set<std::string>, std::less<>> s{
        {"roi", {"corner_a", "corner_b", "date_start", "date_end"}},
        {"scenes", {"local_dir", "catalog_endpoint", "product_type", "download_dir", "corrected_dir"}},
        {"predictor", {"weights", "probability_dir", "threshold"}},
        {"mdm", {"min_obs", "n_mode"}},
        {"hexbin", {"width_m", "trim", "top_k"}},
        {"masks", {"scene_class_dir", "land_polygons"}},
        {"run", {"workers", "output_dir", "run_id"}},
    };
    return s;
}

void check_keys(const toml::table& root) {
    for (const auto& [section, node] : root) {
        auto it = schema().find(section.str());
        if (it == schema().end()) throw ConfigError(fmt::format("unknown config section [{}]", section.str()));
        const auto* table = node.as_table();
        if (!table) throw ConfigError(fmt::format("[{}] must be a table", section.str()));
        for (const auto& [key, value] : *table) {
            if (!it->second.contains(std::string(key.str()))) {
                throw ConfigError(fmt::format("unknown key '{}' in [{}]", key.str(), section.str()));
            }
        }
    }
}

std::string where(std::string_view section, std::string_view key) { return fmt::format("[{}] {}", section, key); }

const toml::node* find(const toml::table& root, std::string_view section, std::string_view key) {
    const auto* t = root[section].as_table();
    return t ? t->get(key) : nullptr;
}

double number(const toml::node& n, std::string_view section, std::string_view key) {
    if (auto v = n.value<double>()) return *v;
    throw ConfigError(where(section, key) + " must be a number");
}

std::int64_t integer(const toml::node& n, std::string_view section, std::string_view key) {
    if (auto v = n.as_integer()) return v->get();
    throw ConfigError(where(section, key) + " must be an integer");
}

std::string string(const toml::node& n, std::string_view section, std::string_view key) {
    if (auto v = n.as_string()) return v->get();
    throw ConfigError(where(section, key) + " must be a string");
}

LatLon corner(const toml::node& n, std::string_view key) {
    const auto* arr = n.as_array();
    if (!arr || arr->size() != 2) throw ConfigError(where("roi", key) + " must be [lat, lon]");
    return {number(*arr->get(0), "roi", key), number(*arr->get(1), "roi", key)};
}

Date date(const toml::node& n, std::string_view key) {
    if (auto d = n.as_date()) {
        const auto v = d->get();
        const Date out{std::chrono::year{v.year}, std::chrono::month{v.month}, std::chrono::day{v.day}};
        if (!out.ok()) throw ConfigError(where("roi", key) + " is not a valid date");
        return out;
    }
    if (auto s = n.as_string()) {
        try {
            return parse_date(s->get());
        } catch (const ParseError& e) {
            throw ConfigError(where("roi", key) + ": " + e.what());
        }
    }
    throw ConfigError(where("roi", key) + " must be a date");
}

fs::path path_value(const toml::node& n, std::string_view section, std::string_view key, const fs::path& base) {
    fs::path p = string(n, section, key);
    if (p.empty()) throw ConfigError(where(section, key) + " is empty");
    p = p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
    if (p.filename().empty() && p.has_parent_path()) p = p.parent_path();
    return p;
}

std::size_t positive(std::int64_t v, std::string_view section, std::string_view key) {
    if (v < 1) throw ConfigError(where(section, key) + " must be at least 1");
    return static_cast<std::size_t>(v);
}

void require_dir(const std::optional<fs::path>& p, std::string_view what) {
    if (p && !fs::is_directory(*p)) throw ValidationError(fmt::format("{} '{}' is not a directory", what, p->string()));
}

void require_file(const std::optional<fs::path>& p, std::string_view what) {
    if (p && !fs::is_regular_file(*p)) throw ValidationError(fmt::format("{} '{}' does not exist", what, p->string()));
}

}  // namespace

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw ConfigError(fmt::format("config syntax error at line {}: {}", e.source().begin.line, e.description()));
    }
    check_keys(root);

    PipelineConfig c;
    for (const char* k : {"corner_a", "corner_b", "date_start", "date_end"}) {
        if (!find(root, "roi", k)) throw ConfigError(where("roi", k) + " is required");
    }
    c.roi.corner_a = corner(*find(root, "roi", "corner_a"), "corner_a");
    c.roi.corner_b = corner(*find(root, "roi", "corner_b"), "corner_b");
    c.roi.date_start = date(*find(root, "roi", "date_start"), "date_start");
    c.roi.date_end = date(*find(root, "roi", "date_end"), "date_end");

    if (auto* n = find(root, "scenes", "local_dir")) c.scene_dir = path_value(*n, "scenes", "local_dir", base_dir);
    const bool catalog_keys = find(root, "scenes", "catalog_endpoint") || find(root, "scenes", "download_dir") ||
                              find(root, "scenes", "corrected_dir") || find(root, "scenes", "product_type");
    if (catalog_keys) {
        CatalogSource cat;
        if (auto* n = find(root, "scenes", "catalog_endpoint")) cat.endpoint = string(*n, "scenes", "catalog_endpoint");
        if (auto* n = find(root, "scenes", "product_type")) cat.product_type = string(*n, "scenes", "product_type");
        if (auto* n = find(root, "scenes", "download_dir")) {
            cat.download_dir = path_value(*n, "scenes", "download_dir", base_dir);
        }
        if (auto* n = find(root, "scenes", "corrected_dir")) {
            cat.corrected_dir = path_value(*n, "scenes", "corrected_dir", base_dir);
        }
        c.catalog = cat;
    }

    if (auto* n = find(root, "predictor", "weights")) c.weights_path = path_value(*n, "predictor", "weights", base_dir);
    if (auto* n = find(root, "predictor", "probability_dir")) {
        c.probability_dir = path_value(*n, "predictor", "probability_dir", base_dir);
    }
    if (auto* n = find(root, "predictor", "threshold")) {
        try {
            if (auto s = n->as_string()) {
                c.threshold = ThresholdPreset::parse(s->get());
            } else {
                c.threshold = ThresholdPreset::custom(number(*n, "predictor", "threshold"));
            }
        } catch (const ArgumentError& e) {
            throw ConfigError(where("predictor", "threshold") + ": " + e.what());
        }
    }

    if (auto* n = find(root, "mdm", "min_obs")) c.min_obs = positive(integer(*n, "mdm", "min_obs"), "mdm", "min_obs");
    if (auto* n = find(root, "mdm", "n_mode")) {
        const auto mode = string(*n, "mdm", "n_mode");
        if (mode == "per_pixel") {
            c.count_mode = ObservationCount::per_pixel;
        } else if (mode == "global") {
            c.count_mode = ObservationCount::global;
        } else {
            throw ConfigError(where("mdm", "n_mode") + " must be \"per_pixel\" or \"global\"");
        }
    }

    if (auto* n = find(root, "hexbin", "width_m")) c.hex_width_m = number(*n, "hexbin", "width_m");
    if (auto* n = find(root, "hexbin", "trim")) c.trim_fraction = number(*n, "hexbin", "trim");
    if (auto* n = find(root, "hexbin", "top_k")) c.top_k = positive(integer(*n, "hexbin", "top_k"), "hexbin", "top_k");

    if (auto* n = find(root, "masks", "scene_class_dir")) {
        c.scene_class_dir = path_value(*n, "masks", "scene_class_dir", base_dir);
    }
    if (auto* n = find(root, "masks", "land_polygons")) {
        c.land_polygons = path_value(*n, "masks", "land_polygons", base_dir);
    }

    if (auto* n = find(root, "run", "workers")) {
        c.workers = static_cast<unsigned>(positive(integer(*n, "run", "workers"), "run", "workers"));
    }
    if (auto* n = find(root, "run", "output_dir")) c.output_dir = path_value(*n, "run", "output_dir", base_dir);
    else c.output_dir = (base_dir / "runs").lexically_normal();
    if (auto* n = find(root, "run", "run_id")) c.run_id = string(*n, "run", "run_id");
    return c;
}

void PipelineConfig::validate() const {
    roi.validate();
    if (scene_dir.has_value() == catalog.has_value()) {
        throw ValidationError(scene_dir ? "configure either [scenes] local_dir or a catalog source, not both"
                                        : "no scene source: set [scenes] local_dir or catalog_endpoint");
    }
    if (weights_path.has_value() == probability_dir.has_value()) {
        throw ValidationError(weights_path ? "configure either [predictor] weights or probability_dir, not both"
                                           : "no predictor: set [predictor] weights or probability_dir");
    }
    if (catalog) {
        if (catalog->endpoint.empty() && !catalog_endpoint_from_env()) {
            throw ValidationError("catalog endpoint missing: set [scenes] catalog_endpoint or DDE_CATALOG_ENDPOINT");
        }
        if (catalog->download_dir.empty() || catalog->corrected_dir.empty()) {
            throw ValidationError("catalog source needs [scenes] download_dir and corrected_dir");
        }
        require_dir(catalog->corrected_dir, "corrected scene directory");
    }
    if (!(hex_width_m > 0.0) || !std::isfinite(hex_width_m)) throw ValidationError("[hexbin] width_m must be positive");
    if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) throw ValidationError("[hexbin] trim must lie in [0, 1)");
    if (min_obs < 1 || top_k < 1 || workers < 1) throw ValidationError("counts must be at least 1");
    if (run_id && (run_id->empty() || run_id->find_first_of("/\\") != std::string::npos || *run_id == "." ||
                   *run_id == "..")) {
        throw ValidationError("[run] run_id must be a plain directory name");
    }
    require_dir(scene_dir, "scene directory");
    require_file(weights_path, "weights file");
    require_dir(probability_dir, "probability directory");
    require_dir(scene_class_dir, "scene-class directory");
    require_file(land_polygons, "land polygon file");
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    auto cfg = parse_config(ss.str(), fs::absolute(path).parent_path());
    cfg.validate();
    return cfg;
}

std::string canonical_json(const PipelineConfig& c) {
    auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
    json j;  // nlohmann's default object type keeps keys sorted
    j["roi"] = {{"corner_a", {c.roi.corner_a.lat, c.roi.corner_a.lon}},
                {"corner_b", {c.roi.corner_b.lat, c.roi.corner_b.lon}},
                {"date_start", format_date(c.roi.date_start)},
                {"date_end", format_date(c.roi.date_end)}};
    j["scenes"] = {{"local_dir", opt_path(c.scene_dir)}};
    if (c.catalog) {
        j["scenes"]["catalog"] = {{"endpoint", c.catalog->endpoint},
                                  {"product_type", c.catalog->product_type},
                                  {"download_dir", c.catalog->download_dir.generic_string()},
                                  {"corrected_dir", c.catalog->corrected_dir.generic_string()}};
    } else {
        j["scenes"]["catalog"] = nullptr;
    }
    j["predictor"] = {{"weights", opt_path(c.weights_path)},
                      {"probability_dir", opt_path(c.probability_dir)},
                      {"threshold", {{"name", c.threshold.label()}, {"value", c.threshold.value()}}}};
    j["mdm"] = {{"min_obs", c.min_obs},
                {"n_mode", c.count_mode == ObservationCount::global ? "global" : "per_pixel"}};
    j["hexbin"] = {{"width_m", c.hex_width_m}, {"trim", c.trim_fraction}, {"top_k", c.top_k}};
    j["masks"] = {{"scene_class_dir", opt_path(c.scene_class_dir)}, {"land_polygons", opt_path(c.land_polygons)}};
    j["run"] = {{"workers", c.workers},
                {"output_dir", c.output_dir.generic_string()},
                {"run_id", c.run_id ? json(*c.run_id) : json(nullptr)}};
    return j.dump();
}

std::string config_hash(const PipelineConfig& c) { return sha256_hex(canonical_json(c)); }

}  // namespace dde
