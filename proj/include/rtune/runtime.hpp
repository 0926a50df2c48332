#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtune/core.hpp"
#include "rtune/lut.hpp"

namespace rtune {

struct QueryResult {
    ParameterVector params;
    std::size_t lod = 0;
    std::size_t cpu_bin = 0;
    std::size_t gpu_bin = 0;
    std::uint32_t code = 0;

    bool operator==(const QueryResult&) const = default;
};

// Snap both frequencies to the table's bins, look the cell up, decode the
// stored code. Throws ValidationError for an out-of-range lod.
QueryResult query(const LookupTable& table, std::size_t lod, double cpu_mhz, double gpu_mhz);

// Produces (cpu MHz, gpu MHz) per frame. Implementations are single-caller.
class FrequencySource {
public:
    virtual ~FrequencySource() = default;
    virtual std::pair<double, double> next() = 0;
};

class FixedFrequencySource final : public FrequencySource {
public:
    FixedFrequencySource(double cpu_mhz, double gpu_mhz) : cpu_(cpu_mhz), gpu_(gpu_mhz) {}
    std::pair<double, double> next() override { return {cpu_, gpu_}; }

private:
    double cpu_;
    double gpu_;
};

// Replays a recorded trace; throws ValidationError when exhausted.
class ScriptedFrequencySource final : public FrequencySource {
public:
    explicit ScriptedFrequencySource(std::vector<std::pair<double, double>> trace)
        : trace_(std::move(trace)) {}
    std::pair<double, double> next() override;

private:
    std::vector<std::pair<double, double>> trace_;
    std::size_t pos_ = 0;
};

// Bounded drift per step, clamped to [min, max] per processor; seeded.
class RandomWalkFrequencySource final : public FrequencySource {
public:
    RandomWalkFrequencySource(double cpu_start, double cpu_min, double cpu_max, double gpu_start,
                              double gpu_min, double gpu_max, double max_step_mhz, std::uint64_t seed);
    std::pair<double, double> next() override;

private:
    double cpu_, cpu_min_, cpu_max_;
    double gpu_, gpu_min_, gpu_max_;
    double max_step_;
    std::mt19937_64 rng_;
};

// Trace CSV: header `frame,cpu_freq_mhz,gpu_freq_mhz`, one row per frame.
std::vector<std::pair<double, double>> load_trace_csv(const std::string& path);
void save_trace_csv(std::span<const std::pair<double, double>> trace, const std::string& path);

// One query per frame, in schedule order.
std::vector<QueryResult> run_frame_loop(const LookupTable& table, FrequencySource& source,
                                        std::span<const std::size_t> lod_schedule);

struct LatencyStats {
    std::size_t iterations = 0;
    double min_ns = 0.0;
    double median_ns = 0.0;
    double p99_ns = 0.0;
    double max_ns = 0.0;
    double mean_ns = 0.0;
};

// Wall-clock per query over randomized valid inputs; inputs are generated
// outside the timed region.
LatencyStats bench_query_latency(const LookupTable& table, std::size_t iterations,
                                 std::uint64_t seed = 0x5eedb0bb);

}  // namespace rtune
