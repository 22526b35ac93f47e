#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dde/config.hpp"
#include "dde/error.hpp"

namespace dde {

enum class Stage { acquire, ingest, indices, predict, mask, mdm, hexbin, render };

inline constexpr std::array<Stage, 8> kAllStages{Stage::acquire, Stage::ingest, Stage::indices, Stage::predict,
                                                 Stage::mask,    Stage::mdm,    Stage::hexbin,  Stage::render};

std::string_view stage_name(Stage s) noexcept;
Stage parse_stage(std::string_view name);

enum class StageStatus { succeeded, skipped, failed };

std::string_view status_name(StageStatus s) noexcept;

struct StageRecord {
    Stage stage = Stage::acquire;
    StageStatus status = StageStatus::succeeded;
    double wall_time_s = 0.0;
    std::vector<std::filesystem::path> artifacts;  // relative to the run directory
    std::string input_hash;
    std::string output_hash;
    std::string error;
    std::optional<ErrorCategory> error_category;
};

struct RunLedger {
    std::string run_id;
    std::string config_hash;
    std::filesystem::path run_dir;
    std::vector<StageRecord> stages;  // in execution order

    bool failed() const noexcept;
    const StageRecord* find(Stage s) const noexcept;

    void save(const std::filesystem::path& path) const;
    static RunLedger load(const std::filesystem::path& path);
};

struct RunOptions {
    Stage last_stage = Stage::render;
    bool force = false;  // ignore cached outputs
};

// Run id used when the config has none: a prefix of the config hash, so the
// same config always lands in the same run directory.
std::string resolve_run_id(const PipelineConfig& config);
std::filesystem::path run_directory(const PipelineConfig& config);

// Runs the stages up to options.last_stage. A failing stage is recorded in
// the ledger and stops the run; its partial outputs are left in place. The
// ledger is written to <run_dir>/ledger.json.
RunLedger run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace dde
