#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtune/gbdt.hpp"
#include "rtune/lut.hpp"
#include "rtune/oracle.hpp"

namespace rtune {

// Materialized evaluation input: one lod and one (cpu, gpu) pair per frame.
struct Scenario {
    std::vector<std::size_t> lod_schedule;
    std::vector<std::pair<double, double>> frequencies;
};

struct FrameRecord {
    std::size_t frame = 0;
    std::size_t lod = 0;
    double cpu_mhz = 0.0;
    double gpu_mhz = 0.0;
    std::uint32_t code = 0;
    double time_ms = 0.0;       // noiseless ground truth for the chosen params
    double ssim = 0.0;          // ditto
    double best_time_ms = 0.0;  // noiseless ground truth for best quality
};

struct EvalReport {
    std::vector<FrameRecord> frames;
    double mean_time_ms = 0.0;
    double mean_best_time_ms = 0.0;
    double time_reduction_pct = 0.0;  // 100 * (1 - mean chosen / mean best)
    double image_error_pct = 0.0;     // mean(1 - ssim) * 100
    std::size_t adaptivity_count = 0; // frames where the chosen code changed
};

// Per frame: query the table at the true (unsnapped) frequencies, then score
// both the chosen and the best-quality parameters through the noiseless
// oracle at those same frequencies.
EvalReport evaluate(const LookupTable& table, const OracleConfig& oracle_cfg, const Scenario& scenario);

// One fixed-frequency evaluation per entry of freq_list, same lod schedule
// and cpu frequency throughout.
std::vector<EvalReport> sweep_gpu_frequency(const LookupTable& table, const OracleConfig& oracle_cfg,
                                            std::span<const double> gpu_freqs,
                                            std::span<const std::size_t> lod_schedule, double cpu_mhz);

struct AblationRecord {
    std::size_t probe_count = 0;
    std::vector<std::array<std::size_t, 3>> mismatches;  // (lod, cpu bin, gpu bin)
    double model_select_ns = 0.0;  // one full predict + two-phase search
    double lut_query_ns = 0.0;
    double latency_ratio = 0.0;

    bool exact_match() const { return mismatches.empty(); }
};

// For every probe cell, check the stored code against a fresh model-based
// two-phase selection, and compare selection latencies.
AblationRecord ablation_lut_vs_model(const GbdtModel& phi, const GbdtModel& psi, const LookupTable& table,
                                     std::span<const std::array<std::size_t, 3>> probe_cells);

// The two-phase search run on noiseless oracle values instead of model
// predictions: the ground-truth reference the model-backed table is judged
// against.
LookupTable build_reference_lut(const OracleConfig& oracle_cfg, const HardwareGrid& grid, double percentile);

// frames.csv / summary.csv / sweep.csv writers.
void save_frames_csv(const EvalReport& report, const std::string& path);
void save_summary_csv(const EvalReport& report, const std::string& path);
void save_sweep_csv(std::span<const EvalReport> reports, std::span<const double> gpu_freqs,
                    const std::string& path);

}  // namespace rtune
