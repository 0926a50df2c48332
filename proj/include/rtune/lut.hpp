#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rtune/core.hpp"
#include "rtune/gbdt.hpp"

namespace rtune {

struct LutBuildConfig {
    ParameterSpace space;
    LodSet lods;
    HardwareGrid grid;
    double time_percentile = 0.20;  // in (0, 1]
    GbdtModel phi;                  // ssim predictor
    GbdtModel psi;                  // time predictor

    void validate() const;
};

struct PredictedEntry {
    std::uint32_t code = 0;
    double ssim = 0.0;
    double time_ms = 0.0;
};

// (l * |cpu_bins| + c) * |gpu_bins| + g; bijective over cells.
std::size_t cell_index(std::size_t lod_count, std::size_t cpu_count, std::size_t gpu_count, std::size_t l,
                       std::size_t c, std::size_t g);

// Phase-1 survivor count: max(1, ceil(percentile * n)).
std::size_t phase1_keep_count(std::size_t n, double percentile);

// Phase 1: sort ascending by (predicted time, code), keep the first
// phase1_keep_count entries. Phase 2: the kept code with maximum predicted
// ssim; ties resolve to the smaller time, then the smaller code.
std::uint32_t two_phase_search(std::vector<PredictedEntry> entries, double percentile);

// Minimal bit width covering `total` codes (>= 1 bit).
std::uint8_t code_bit_width(std::uint32_t total);

// Pre-computed map from (LOD, CPU bin, GPU bin) to the bit-encoded optimal
// parameter code. Header values mirror the binary format (f32 precision);
// build_seconds is informational and never serialized.
struct LookupTable {
    std::vector<ParameterDimension> dimensions;
    std::vector<float> lod_thresholds;
    std::vector<std::uint32_t> cpu_bins_mhz;
    std::vector<std::uint32_t> gpu_bins_mhz;
    float time_percentile = 0.2f;
    std::uint64_t phi_fingerprint = 0;
    std::uint64_t psi_fingerprint = 0;
    std::uint8_t bit_width = 1;
    std::vector<std::uint8_t> packed;  // cell entries, MSB-first within each
    double build_seconds = 0.0;

    std::size_t lod_count() const { return lod_thresholds.size(); }
    std::size_t cell_count() const {
        return lod_thresholds.size() * cpu_bins_mhz.size() * gpu_bins_mhz.size();
    }
    std::uint32_t total_combinations() const;
    std::uint32_t entry(std::size_t cell) const;

    bool operator==(const LookupTable& other) const;
};

// Pack per-cell codes into a table with the given header values. Level and
// threshold values are narrowed through f32, matching the binary format.
LookupTable assemble_table(const ParameterSpace& space, const LodSet& lods, const HardwareGrid& grid,
                           double percentile, std::uint64_t phi_fp, std::uint64_t psi_fp,
                           std::span<const std::uint32_t> codes);

// For every (LOD, CPU bin, GPU bin) cell: evaluate phi/psi over the whole
// parameter space, run the two-phase search, store the winner.
LookupTable build_lut(const LutBuildConfig& cfg);

// Binary format `LUT1`, little-endian, trailing CRC32. load verifies the
// checksum before parsing and throws FormatError on any corruption.
void save_lut(const LookupTable& table, const std::string& path);
LookupTable load_lut(const std::string& path);

}  // namespace rtune
