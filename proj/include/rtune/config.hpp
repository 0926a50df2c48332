#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtune/gbdt.hpp"
#include "rtune/harness.hpp"
#include "rtune/oracle.hpp"

namespace rtune {

struct ScenarioSourceSpec {
    enum class Type { fixed, trace, random_walk };
    Type type = Type::fixed;
    // fixed
    double cpu_mhz = 0.0;
    double gpu_mhz = 0.0;
    // trace
    std::string path;
    // random_walk; start frequencies default to the oracle range midpoints
    std::uint64_t seed = 0;
    double max_step_mhz = 0.0;
    std::optional<double> start_cpu_mhz;
    std::optional<double> start_gpu_mhz;
};

struct LodScheduleSpec {
    enum class Type { cycle, constant, explicit_list };
    Type type = Type::cycle;
    std::size_t frames_per_level = 1;  // cycle
    std::size_t lod = 0;               // constant
    std::vector<std::size_t> lods;     // explicit_list
};

struct ScenarioSpec {
    std::size_t frames = 0;
    ScenarioSourceSpec source;
    LodScheduleSpec lod_schedule;
};

struct PathsConfig {
    std::string dataset;
    std::string phi_model;
    std::string psi_model;
    std::string lut;
    std::string report_dir;
};

// The one JSON document driving a whole pipeline run. Relative paths inside
// it resolve against the config file's directory.
struct PipelineConfig {
    ParameterSpace space;
    LodSet lods;
    HardwareGrid grid;
    OracleConfig oracle;  // carries copies of space/lods
    TrainConfig train;
    double lut_time_percentile = 0.20;
    ScenarioSpec scenario;
    PathsConfig paths;
    std::string base_dir;

    std::string resolve(const std::string& path) const;
};

// Schema-validated load; unknown keys are rejected with the offending JSON
// location. Throws ConfigError.
PipelineConfig load_pipeline_config(const std::string& path);

// Expand the scenario spec into per-frame lods and frequencies.
Scenario materialize_scenario(const PipelineConfig& cfg);

}  // namespace rtune
