#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "dde/config.hpp"
#include "dde/pipeline.hpp"
#include "dde/synth.hpp"
#include "test_support.hpp"

using namespace dde;
using dde::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

std::string roi_block() {
    return "[roi]\ncorner_a = [40.06, 19.94]\ncorner_b = [39.94, 20.06]\ndate_start = 2024-03-01\n"
           "date_end = 2024-03-31\n";
}

// Directory tree with the files a minimal config refers to.
struct ConfigDir {
    TempDir dir{"dde-config"};
    ConfigDir() {
        fs::create_directories(dir / "scenes");
        fs::create_directories(dir / "probs");
        BaselineWeights::synthetic_default().save(dir / "weights.json");
    }
    PipelineConfig parse(const std::string& body) const { return parse_config(roi_block() + body, dir.path()); }
};

SynthOptions two_dates() {
    SynthOptions o;
    o.dates = 2;
    o.width = o.height = 96;
    o.land_cols = 12;
    o.cloudy_dates = 1;
    o.sporadic_per_date = 8;
    o.min_obs = 2;
    return o;
}

PipelineConfig load(const fs::path& config) { return load_config(config); }

std::map<Stage, StageStatus> statuses(const RunLedger& l) {
    std::map<Stage, StageStatus> m;
    for (const auto& s : l.stages) m[s.stage] = s.status;
    return m;
}

}  // namespace

TEST_CASE("minimal config gets the documented defaults") {
    ConfigDir cd;
    const auto c = cd.parse("[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nprobability_dir = \"probs\"\n");
    c.validate();
    CHECK(c.threshold == ThresholdPreset::opt());
    CHECK(c.threshold.value() == doctest::Approx(0.815));
    CHECK(c.hex_width_m == 5000.0);
    CHECK(c.trim_fraction == 0.5);
    CHECK(c.top_k == 10);
    CHECK(c.min_obs == 3);
    CHECK(c.count_mode == ObservationCount::per_pixel);
    CHECK(c.workers == 1);
    CHECK(*c.scene_dir == (cd.dir.path() / "scenes").lexically_normal());
    CHECK(*c.probability_dir == (cd.dir.path() / "probs").lexically_normal());
    CHECK(c.roi.date_start == testing::ymd(2024, 3, 1));
    CHECK(c.roi.corner_a.lat == 40.06);
}

TEST_CASE("threshold presets and numbers") {
    ConfigDir cd;
    const std::string src = "[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nweights = \"weights.json\"\n";
    CHECK(cd.parse(src + "threshold = \"hp\"\n").threshold.value() == 0.99);
    CHECK(cd.parse(src + "threshold = \"hp\"\n").threshold == ThresholdPreset::hp());
    CHECK(cd.parse(src + "threshold = 0.7\n").threshold.value() == 0.7);
    CHECK_THROWS_AS(cd.parse(src + "threshold = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(cd.parse(src + "threshold = \"loose\"\n"), ConfigError);
}

TEST_CASE("strict keys and types") {
    ConfigDir cd;
    const std::string src = "[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nweights = \"weights.json\"\n";
    CHECK_NOTHROW(cd.parse(src));
    CHECK_THROWS_AS(cd.parse(src + "[hexbin]\nwidth = 100.0\n"), ConfigError);
    CHECK_THROWS_AS(cd.parse(src + "[extras]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(cd.parse(src + "[mdm]\nmin_obs = \"three\"\n"), ConfigError);
    CHECK_THROWS_AS(cd.parse(src + "[mdm]\nmin_obs = 0\n"), ConfigError);
    CHECK_THROWS_AS(cd.parse(src + "[mdm]\nn_mode = \"sometimes\"\n"), ConfigError);
    CHECK_THROWS_AS(cd.parse(src + "[hexbin]\ntop_k = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(cd.parse(src + "[roi]\nextra = 1\n"), ConfigError);  // duplicate table
    CHECK_THROWS_AS(parse_config("[scenes]\nlocal_dir = \"x\"\n", cd.dir.path()), ConfigError);  // no roi
    CHECK_THROWS_AS(parse_config("not toml at all = = =", cd.dir.path()), ConfigError);
    CHECK(cd.parse(src + "[mdm]\nn_mode = \"global\"\n").count_mode == ObservationCount::global);
}

TEST_CASE("contradictory or missing sources are validation errors") {
    ConfigDir cd;
    const std::string pred = "[predictor]\nweights = \"weights.json\"\n";
    CHECK_THROWS_AS(cd.parse("[scenes]\nlocal_dir = \"scenes\"\ncatalog_endpoint = \"http://x\"\n"
                             "download_dir = \"dl\"\ncorrected_dir = \"scenes\"\n" + pred)
                        .validate(),
                    ValidationError);
    CHECK_THROWS_AS(cd.parse(pred).validate(), ValidationError);
    CHECK_THROWS_AS(cd.parse("[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nweights = \"weights.json\"\n"
                             "probability_dir = \"probs\"\n")
                        .validate(),
                    ValidationError);
    CHECK_THROWS_AS(cd.parse("[scenes]\nlocal_dir = \"scenes\"\n").validate(), ValidationError);
    CHECK_NOTHROW(cd.parse("[scenes]\ncatalog_endpoint = \"http://x\"\ndownload_dir = \"dl\"\n"
                           "corrected_dir = \"scenes\"\n" + pred)
                      .validate());
}

TEST_CASE("referenced paths must exist") {
    ConfigDir cd;
    CHECK_THROWS_AS(cd.parse("[scenes]\nlocal_dir = \"nowhere\"\n[predictor]\nweights = \"weights.json\"\n").validate(),
                    ValidationError);
    CHECK_THROWS_AS(cd.parse("[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nweights = \"missing.json\"\n").validate(),
                    ValidationError);
    CHECK_THROWS_AS(cd.parse("[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nweights = \"weights.json\"\n"
                             "[masks]\nland_polygons = \"land.geojson\"\n")
                        .validate(),
                    ValidationError);
}

TEST_CASE("bad ROI and hexbin values are validation errors") {
    ConfigDir cd;
    const std::string src = "[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nweights = \"weights.json\"\n";
    CHECK_THROWS_AS(cd.parse(src + "[hexbin]\ntrim = 1.0\n").validate(), ValidationError);
    CHECK_THROWS_AS(cd.parse(src + "[hexbin]\nwidth_m = -5.0\n").validate(), ValidationError);
    CHECK_THROWS_AS(cd.parse(src + "[run]\nrun_id = \"../escape\"\n").validate(), ValidationError);
    auto bad = parse_config("[roi]\ncorner_a = [40.0, 20.0]\ncorner_b = [39.0, 21.0]\ndate_start = 2024-03-31\n"
                            "date_end = 2024-03-01\n" + src,
                            cd.dir.path());
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("config hash is stable and sensitive") {
    ConfigDir cd;
    const std::string a = "[scenes]\nlocal_dir = \"scenes\"\n[predictor]\nweights = \"weights.json\"\n"
                          "[hexbin]\ntrim = 0.25\ntop_k = 5\n";
    const std::string b = "[hexbin]\ntop_k = 5\ntrim = 0.25\n[predictor]\nweights = \"./weights.json\"\n"
                          "[scenes]\nlocal_dir = \"scenes/\"\n";
    const auto ca = cd.parse(a), cb = parse_config(b + roi_block(), cd.dir.path());
    CHECK(canonical_json(ca) == canonical_json(ca));
    CHECK(config_hash(ca) == config_hash(cb));
    CHECK(config_hash(ca) != config_hash(cd.parse(a + "[mdm]\nmin_obs = 4\n")));
    CHECK(config_hash(ca).size() == 64);
}

TEST_CASE("missing weights path fails validation before any stage runs") {
    TempDir tmp("dde-pipe");
    const auto sc = generate_scenario(tmp.path(), two_dates());
    auto c = load(sc.config);
    c.weights_path = tmp / "gone.json";
    CHECK_THROWS_AS(run_pipeline(c), ValidationError);
    CHECK_FALSE(fs::exists(tmp / "runs"));
}

TEST_CASE("two-date synthetic run, cache hit on rerun, stage isolation") {
    TempDir tmp("dde-pipe");
    const auto sc = generate_scenario(tmp.path(), two_dates());
    const auto cfg = load(sc.config);
    const RunLedger first = run_pipeline(cfg);
    REQUIRE(first.stages.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(first.stages[i].stage == kAllStages[i]);
        CHECK(first.stages[i].status == StageStatus::succeeded);
        CHECK(first.stages[i].input_hash.size() == 64);
        CHECK_FALSE(first.stages[i].artifacts.empty());
    }
    CHECK_FALSE(first.failed());
    const fs::path run = first.run_dir;
    CHECK(run == cfg.output_dir / first.run_id);
    for (const char* f : {"render/map.svg", "mdm/mdm.csv", "hexbin/cells.csv", "hexbin/top.csv", "ledger.json"}) {
        CHECK(fs::is_regular_file(run / f));
    }
    CHECK(slurp(run / "render/map.svg").find("<svg") != std::string::npos);

    const RunLedger saved = RunLedger::load(run / "ledger.json");
    CHECK(saved.run_id == first.run_id);
    CHECK(saved.config_hash == config_hash(cfg));
    REQUIRE(saved.stages.size() == 8);
    CHECK(saved.stages[5].output_hash == first.stages[5].output_hash);

    std::map<std::string, std::string> before;
    for (const auto& s : first.stages) {
        for (const auto& a : s.artifacts) before[a.generic_string()] = slurp(run / a);
    }

    const RunLedger second = run_pipeline(cfg);
    REQUIRE(second.stages.size() == 8);
    for (const auto& s : second.stages) CHECK(s.status == StageStatus::skipped);
    for (std::size_t i = 0; i < 8; ++i) CHECK(second.stages[i].output_hash == first.stages[i].output_hash);
    for (const auto& [path, bytes] : before) CHECK(slurp(run / path) == bytes);

    fs::remove_all(run / "mdm");
    const auto third = statuses(run_pipeline(cfg));
    for (Stage s : {Stage::acquire, Stage::ingest, Stage::indices, Stage::predict, Stage::mask}) {
        CHECK(third.at(s) == StageStatus::skipped);
    }
    for (Stage s : {Stage::mdm, Stage::hexbin, Stage::render}) CHECK(third.at(s) == StageStatus::succeeded);
    for (const auto& [path, bytes] : before) CHECK(slurp(run / path) == bytes);

    // A tampered artifact invalidates its stage.
    write_text(run / "hexbin/top.csv", "tampered\n");
    const auto fourth = statuses(run_pipeline(cfg));
    CHECK(fourth.at(Stage::mdm) == StageStatus::skipped);
    CHECK(fourth.at(Stage::hexbin) == StageStatus::succeeded);
    CHECK(slurp(run / "hexbin/top.csv") == before.at("hexbin/top.csv"));
}

TEST_CASE("parameter changes rerun only the affected stages") {
    TempDir tmp("dde-pipe");
    const auto sc = generate_scenario(tmp.path(), two_dates());
    auto cfg = load(sc.config);
    cfg.run_id = "fixed";
    run_pipeline(cfg);
    cfg.threshold = ThresholdPreset::hp();
    const auto s = statuses(run_pipeline(cfg));
    CHECK(s.at(Stage::mask) == StageStatus::skipped);
    CHECK(s.at(Stage::mdm) == StageStatus::succeeded);
    CHECK(s.at(Stage::render) == StageStatus::succeeded);

    cfg.top_k = 3;
    const auto t = statuses(run_pipeline(cfg));
    CHECK(t.at(Stage::mdm) == StageStatus::skipped);
    CHECK(t.at(Stage::hexbin) == StageStatus::succeeded);

    // Changing a scene file invalidates everything from acquire on.
    {
        std::ofstream out(sc.scene_dir / sc.scene_ids[0] / "notes.txt");
        out << "edited";
    }
    CHECK(statuses(run_pipeline(cfg)).at(Stage::acquire) == StageStatus::succeeded);
}

TEST_CASE("identical inputs in different places give identical artifacts and hashes") {
    TempDir a("dde-pipe"), b("dde-pipe");
    const auto sa = generate_scenario(a.path(), two_dates());
    const auto sb = generate_scenario(b.path(), two_dates());
    auto ca = load(sa.config), cb = load(sb.config);
    ca.run_id = cb.run_id = "det";
    cb.workers = 3;
    const auto la = run_pipeline(ca), lb = run_pipeline(cb);
    REQUIRE(la.stages.size() == lb.stages.size());
    for (std::size_t i = 0; i < la.stages.size(); ++i) {
        CHECK(la.stages[i].input_hash == lb.stages[i].input_hash);
        CHECK(la.stages[i].output_hash == lb.stages[i].output_hash);
    }
    for (const char* f : {"mdm/mdm.csv", "hexbin/cells.csv", "hexbin/top.csv"}) {
        CHECK(slurp(la.run_dir / f) == slurp(lb.run_dir / f));
    }
}

TEST_CASE("external probabilities reproduce the baseline run") {
    TempDir tmp("dde-pipe");
    auto o = two_dates();
    o.write_probabilities = true;
    const auto sc = generate_scenario(tmp.path(), o);
    auto base = load(sc.config);
    base.run_id = "baseline";
    auto ext = base;
    ext.run_id = "external";
    ext.weights_path.reset();
    ext.probability_dir = sc.probability_dir;
    const auto lb = run_pipeline(base), le = run_pipeline(ext);
    REQUIRE_FALSE(lb.failed());
    REQUIRE_FALSE(le.failed());
    CHECK(slurp(lb.run_dir / "mdm/mdm.csv") == slurp(le.run_dir / "mdm/mdm.csv"));
    CHECK(slurp(lb.run_dir / "hexbin/cells.csv") == slurp(le.run_dir / "hexbin/cells.csv"));
}

TEST_CASE("a failing stage is recorded and stops the run") {
    TempDir tmp("dde-pipe");
    auto o = two_dates();
    o.write_probabilities = true;
    const auto sc = generate_scenario(tmp.path(), o);
    auto c = load(sc.config);
    c.weights_path.reset();
    c.probability_dir = sc.probability_dir;
    fs::remove(sc.probability_dir / probability_file_name(sc.scene_ids[1], c.roi.date_end));
    const RunLedger l = run_pipeline(c);
    CHECK(l.failed());
    REQUIRE(l.stages.size() == 4);
    CHECK(l.stages[2].status == StageStatus::succeeded);
    CHECK(l.stages[3].stage == Stage::predict);
    CHECK(l.stages[3].status == StageStatus::failed);
    CHECK(l.stages[3].error_category == ErrorCategory::integrity);
    CHECK(l.stages[3].error.find(sc.scene_ids[1]) != std::string::npos);
    const RunLedger saved = RunLedger::load(l.run_dir / "ledger.json");
    CHECK(saved.stages.back().status == StageStatus::failed);
    CHECK(fs::exists(l.run_dir / "predict" / probability_file_name(sc.scene_ids[0], c.roi.date_start)));
}

TEST_CASE("last_stage stops early and scenes outside the dates are ignored") {
    TempDir tmp("dde-pipe");
    const auto sc = generate_scenario(tmp.path(), two_dates());
    auto c = load(sc.config);
    const auto l = run_pipeline(c, {Stage::mask, false});
    REQUIRE(l.stages.size() == 5);
    CHECK(l.stages.back().stage == Stage::mask);

    c.roi.date_end = c.roi.date_start;
    c.min_obs = 1;
    c.run_id = "one-date";
    const auto one = run_pipeline(c);
    REQUIRE_FALSE(one.failed());
    const auto index = nlohmann::json::parse(slurp(one.run_dir / "ingest/scenes.json"));
    CHECK(index.size() == 1);

    c.roi.date_start = c.roi.date_end = testing::ymd(2023, 1, 1);
    c.run_id = "no-dates";
    const auto none = run_pipeline(c);
    CHECK(none.failed());
    CHECK(none.stages.back().stage == Stage::ingest);
    CHECK(none.stages.back().error_category == ErrorCategory::validation);
}
