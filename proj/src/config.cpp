#include "rtune/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rtune/errors.hpp"
#include "rtune/runtime.hpp"

namespace rtune {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config " + where + ": " + what);
}

const json& member(const json& obj, const std::string& where, const char* key) {
    if (!obj.is_object()) fail(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(where, std::string("missing key '") + key + "'");
    return *it;
}

// Unknown keys are rejected so typos cannot silently change an experiment.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) fail(where, "unknown key '" + key + "'");
    }
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
}

std::uint64_t unsigned_number(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) fail(where, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string text(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
}

std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

ParameterSpace parse_space(const json& j, const std::string& where) {
    check_keys(j, where, {"dimensions", "best_quality"});
    ParameterSpace space;
    const json& dims = member(j, where, "dimensions");
    if (!dims.is_array() || dims.empty()) fail(where + "/dimensions", "expected a non-empty array");
    for (std::size_t d = 0; d < dims.size(); ++d) {
        std::string dw = where + "/dimensions[" + std::to_string(d) + "]";
        check_keys(dims[d], dw, {"name", "values"});
        ParameterDimension dim;
        dim.name = text(member(dims[d], dw, "name"), dw + "/name");
        dim.values = number_list(member(dims[d], dw, "values"), dw + "/values");
        space.dimensions.push_back(std::move(dim));
    }
    for (double idx : number_list(member(j, where, "best_quality"), where + "/best_quality")) {
        if (idx < 0 || idx != std::floor(idx)) fail(where + "/best_quality", "expected level indices");
        space.best_quality_index.push_back(static_cast<std::size_t>(idx));
    }
    try {
        space.validate();
    } catch (const ValidationError& e) {
        fail(where, e.what());
    }
    return space;
}

LodSet parse_lods(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array");
    LodSet lods;
    for (std::size_t i = 0; i < j.size(); ++i) {
        std::string lw = where + "[" + std::to_string(i) + "]";
        check_keys(j[i], lw, {"name", "threshold"});
        LodLevel level;
        level.name = text(member(j[i], lw, "name"), lw + "/name");
        level.threshold = number(member(j[i], lw, "threshold"), lw + "/threshold");
        lods.levels.push_back(std::move(level));
    }
    try {
        lods.validate();
    } catch (const ValidationError& e) {
        fail(where, e.what());
    }
    return lods;
}

std::vector<std::uint32_t> parse_bins(const json& j, const std::string& where) {
    std::vector<std::uint32_t> bins;
    for (double v : number_list(j, where)) {
        if (v <= 0 || v != std::floor(v)) fail(where, "bins must be positive integers (MHz)");
        bins.push_back(static_cast<std::uint32_t>(v));
    }
    return bins;
}

FreqRange parse_range(const json& j, const std::string& where) {
    auto vals = number_list(j, where);
    if (vals.size() != 2) fail(where, "expected [min, max]");
    return FreqRange{vals[0], vals[1]};
}

}  // namespace

std::string PipelineConfig::resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }

    PipelineConfig cfg;
    cfg.base_dir = std::filesystem::path(path).parent_path().string();
    check_keys(j, "/", {"space", "lods", "hardware_grid", "oracle", "train", "lut", "scenario", "paths"});

    cfg.space = parse_space(member(j, "/", "space"), "/space");
    cfg.lods = parse_lods(member(j, "/", "lods"), "/lods");

    const json& grid = member(j, "/", "hardware_grid");
    check_keys(grid, "/hardware_grid", {"cpu_bins_mhz", "gpu_bins_mhz"});
    cfg.grid.cpu_bins_mhz = parse_bins(member(grid, "/hardware_grid", "cpu_bins_mhz"),
                                       "/hardware_grid/cpu_bins_mhz");
    cfg.grid.gpu_bins_mhz = parse_bins(member(grid, "/hardware_grid", "gpu_bins_mhz"),
                                       "/hardware_grid/gpu_bins_mhz");
    try {
        cfg.grid.validate();
    } catch (const ValidationError& e) {
        fail("/hardware_grid", e.what());
    }

    const json& oracle = member(j, "/", "oracle");
    check_keys(oracle, "/oracle",
               {"cpu_freq_range_mhz", "gpu_freq_range_mhz", "cost_weights", "quality_weights",
                "interaction_strength", "noise_std_time", "noise_std_ssim", "seed"});
    cfg.oracle = default_oracle_config(
        cfg.space, cfg.lods, parse_range(member(oracle, "/oracle", "cpu_freq_range_mhz"), "/oracle/cpu_freq_range_mhz"),
        parse_range(member(oracle, "/oracle", "gpu_freq_range_mhz"), "/oracle/gpu_freq_range_mhz"),
        unsigned_number(member(oracle, "/oracle", "seed"), "/oracle/seed"));
    if (oracle.contains("cost_weights")) {
        cfg.oracle.cost_weights = number_list(oracle["cost_weights"], "/oracle/cost_weights");
    }
    if (oracle.contains("quality_weights")) {
        cfg.oracle.quality_weights = number_list(oracle["quality_weights"], "/oracle/quality_weights");
    }
    if (oracle.contains("interaction_strength")) {
        cfg.oracle.interaction_strength = number(oracle["interaction_strength"], "/oracle/interaction_strength");
    }
    if (oracle.contains("noise_std_time")) {
        cfg.oracle.noise_std_time = number(oracle["noise_std_time"], "/oracle/noise_std_time");
    }
    if (oracle.contains("noise_std_ssim")) {
        cfg.oracle.noise_std_ssim = number(oracle["noise_std_ssim"], "/oracle/noise_std_ssim");
    }
    try {
        cfg.oracle.validate();
    } catch (const ValidationError& e) {
        fail("/oracle", e.what());
    }

    const json& train = member(j, "/", "train");
    check_keys(train, "/train",
               {"n_estimators", "learning_rate", "depth_range", "split_ratio", "min_samples_leaf", "seed"});
    if (train.contains("n_estimators")) {
        cfg.train.n_estimators = unsigned_number(train["n_estimators"], "/train/n_estimators");
    }
    if (train.contains("learning_rate")) {
        cfg.train.learning_rate = number(train["learning_rate"], "/train/learning_rate");
    }
    if (train.contains("depth_range")) {
        auto range = number_list(train["depth_range"], "/train/depth_range");
        if (range.size() != 2 || range[0] != std::floor(range[0]) || range[1] != std::floor(range[1])) {
            fail("/train/depth_range", "expected [min, max] integers");
        }
        cfg.train.depth_min = static_cast<int>(range[0]);
        cfg.train.depth_max = static_cast<int>(range[1]);
    }
    if (train.contains("split_ratio")) {
        auto ratio = number_list(train["split_ratio"], "/train/split_ratio");
        if (ratio.size() != 2 || std::abs(ratio[0] + ratio[1] - 1.0) > 1e-9) {
            fail("/train/split_ratio", "expected [train, valid] fractions summing to 1");
        }
        cfg.train.train_fraction = ratio[0];
    }
    if (train.contains("min_samples_leaf")) {
        cfg.train.min_samples_leaf = unsigned_number(train["min_samples_leaf"], "/train/min_samples_leaf");
    }
    if (train.contains("seed")) {
        cfg.train.seed = unsigned_number(train["seed"], "/train/seed");
    }
    try {
        cfg.train.validate();
    } catch (const TrainingError& e) {
        fail("/train", e.what());
    }

    const json& lut = member(j, "/", "lut");
    check_keys(lut, "/lut", {"time_percentile"});
    if (lut.contains("time_percentile")) {
        cfg.lut_time_percentile = number(lut["time_percentile"], "/lut/time_percentile");
    }
    if (!(cfg.lut_time_percentile > 0.0 && cfg.lut_time_percentile <= 1.0)) {
        fail("/lut/time_percentile", "must lie in (0, 1]");
    }

    const json& scenario = member(j, "/", "scenario");
    check_keys(scenario, "/scenario", {"frames", "source", "lod_schedule"});
    cfg.scenario.frames = unsigned_number(member(scenario, "/scenario", "frames"), "/scenario/frames");
    if (cfg.scenario.frames == 0) fail("/scenario/frames", "must be >= 1");

    const json& source = member(scenario, "/scenario", "source");
    const std::string stype = text(member(source, "/scenario/source", "type"), "/scenario/source/type");
    auto& src = cfg.scenario.source;
    if (stype == "fixed") {
        check_keys(source, "/scenario/source", {"type", "cpu_mhz", "gpu_mhz"});
        src.type = ScenarioSourceSpec::Type::fixed;
        src.cpu_mhz = number(member(source, "/scenario/source", "cpu_mhz"), "/scenario/source/cpu_mhz");
        src.gpu_mhz = number(member(source, "/scenario/source", "gpu_mhz"), "/scenario/source/gpu_mhz");
    } else if (stype == "trace") {
        check_keys(source, "/scenario/source", {"type", "path"});
        src.type = ScenarioSourceSpec::Type::trace;
        src.path = text(member(source, "/scenario/source", "path"), "/scenario/source/path");
    } else if (stype == "random_walk") {
        check_keys(source, "/scenario/source",
                   {"type", "seed", "max_step_mhz", "start_cpu_mhz", "start_gpu_mhz"});
        src.type = ScenarioSourceSpec::Type::random_walk;
        src.seed = unsigned_number(member(source, "/scenario/source", "seed"), "/scenario/source/seed");
        src.max_step_mhz =
            number(member(source, "/scenario/source", "max_step_mhz"), "/scenario/source/max_step_mhz");
        if (source.contains("start_cpu_mhz")) {
            src.start_cpu_mhz = number(source["start_cpu_mhz"], "/scenario/source/start_cpu_mhz");
        }
        if (source.contains("start_gpu_mhz")) {
            src.start_gpu_mhz = number(source["start_gpu_mhz"], "/scenario/source/start_gpu_mhz");
        }
    } else {
        fail("/scenario/source/type", "expected fixed, trace, or random_walk");
    }

    const json& sched = member(scenario, "/scenario", "lod_schedule");
    const std::string ltype = text(member(sched, "/scenario/lod_schedule", "type"), "/scenario/lod_schedule/type");
    auto& ls = cfg.scenario.lod_schedule;
    if (ltype == "cycle") {
        check_keys(sched, "/scenario/lod_schedule", {"type", "frames_per_level"});
        ls.type = LodScheduleSpec::Type::cycle;
        ls.frames_per_level = unsigned_number(member(sched, "/scenario/lod_schedule", "frames_per_level"),
                                              "/scenario/lod_schedule/frames_per_level");
        if (ls.frames_per_level == 0) fail("/scenario/lod_schedule/frames_per_level", "must be >= 1");
    } else if (ltype == "constant") {
        check_keys(sched, "/scenario/lod_schedule", {"type", "lod"});
        ls.type = LodScheduleSpec::Type::constant;
        ls.lod = unsigned_number(member(sched, "/scenario/lod_schedule", "lod"), "/scenario/lod_schedule/lod");
        if (ls.lod >= cfg.lods.level_count()) fail("/scenario/lod_schedule/lod", "lod index out of range");
    } else if (ltype == "explicit") {
        check_keys(sched, "/scenario/lod_schedule", {"type", "lods"});
        ls.type = LodScheduleSpec::Type::explicit_list;
        for (double v : number_list(member(sched, "/scenario/lod_schedule", "lods"),
                                    "/scenario/lod_schedule/lods")) {
            if (v < 0 || v != std::floor(v) || static_cast<std::size_t>(v) >= cfg.lods.level_count()) {
                fail("/scenario/lod_schedule/lods", "lod index out of range");
            }
            ls.lods.push_back(static_cast<std::size_t>(v));
        }
        if (ls.lods.size() != cfg.scenario.frames) {
            fail("/scenario/lod_schedule/lods", "explicit schedule length must equal frames");
        }
    } else {
        fail("/scenario/lod_schedule/type", "expected cycle, constant, or explicit");
    }

    const json& paths = member(j, "/", "paths");
    check_keys(paths, "/paths", {"dataset", "phi_model", "psi_model", "lut", "report_dir"});
    cfg.paths.dataset = text(member(paths, "/paths", "dataset"), "/paths/dataset");
    cfg.paths.phi_model = text(member(paths, "/paths", "phi_model"), "/paths/phi_model");
    cfg.paths.psi_model = text(member(paths, "/paths", "psi_model"), "/paths/psi_model");
    cfg.paths.lut = text(member(paths, "/paths", "lut"), "/paths/lut");
    cfg.paths.report_dir = text(member(paths, "/paths", "report_dir"), "/paths/report_dir");
    return cfg;
}

Scenario materialize_scenario(const PipelineConfig& cfg) {
    Scenario s;
    const std::size_t frames = cfg.scenario.frames;
    s.lod_schedule.reserve(frames);
    const auto& ls = cfg.scenario.lod_schedule;
    for (std::size_t i = 0; i < frames; ++i) {
        switch (ls.type) {
            case LodScheduleSpec::Type::cycle:
                s.lod_schedule.push_back((i / ls.frames_per_level) % cfg.lods.level_count());
                break;
            case LodScheduleSpec::Type::constant:
                s.lod_schedule.push_back(ls.lod);
                break;
            case LodScheduleSpec::Type::explicit_list:
                s.lod_schedule.push_back(ls.lods[i]);
                break;
        }
    }

    const auto& src = cfg.scenario.source;
    s.frequencies.reserve(frames);
    switch (src.type) {
        case ScenarioSourceSpec::Type::fixed: {
            s.frequencies.assign(frames, {src.cpu_mhz, src.gpu_mhz});
            break;
        }
        case ScenarioSourceSpec::Type::trace: {
            auto trace = load_trace_csv(cfg.resolve(src.path));
            if (trace.size() < frames) {
                throw ConfigError("trace '" + src.path + "' has " + std::to_string(trace.size()) +
                                  " frames, scenario needs " + std::to_string(frames));
            }
            s.frequencies.assign(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(frames));
            break;
        }
        case ScenarioSourceSpec::Type::random_walk: {
            const double cpu_start = src.start_cpu_mhz.value_or(cfg.oracle.cpu_freq_range.midpoint());
            const double gpu_start = src.start_gpu_mhz.value_or(cfg.oracle.gpu_freq_range.midpoint());
            RandomWalkFrequencySource walk(cpu_start, cfg.oracle.cpu_freq_range.min_mhz,
                                           cfg.oracle.cpu_freq_range.max_mhz, gpu_start,
                                           cfg.oracle.gpu_freq_range.min_mhz,
                                           cfg.oracle.gpu_freq_range.max_mhz, src.max_step_mhz, src.seed);
            for (std::size_t i = 0; i < frames; ++i) {
                s.frequencies.push_back(walk.next());
            }
            break;
        }
    }
    return s;
}

}  // namespace rtune
