#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rtune {

// One tunable rendering parameter: an ordered list of scalar levels.
// Categorical options (half/full, low/high) are ordinal-coded 0,1,... in
// declared order, so `values` is always strictly increasing.
struct ParameterDimension {
    std::string name;
    std::vector<double> values;

    std::size_t level_count() const { return values.size(); }
};

// The discretized parameter space plus, per dimension, the index of the
// reference (highest-quality) level. The reference level is not necessarily
// the last one (e.g. a scattering radius whose visual optimum sits mid-range).
struct ParameterSpace {
    std::vector<ParameterDimension> dimensions;
    std::vector<std::size_t> best_quality_index;

    std::size_t dimension_count() const { return dimensions.size(); }
    std::uint32_t total_combinations() const;

    // Throws ValidationError on any violated invariant.
    void validate() const;
};

// Mixed-radix digit vector over a ParameterSpace: indices[d] is the level
// index of dimension d.
struct ParameterVector {
    std::vector<std::uint32_t> indices;

    bool operator==(const ParameterVector&) const = default;
};

// Representative CPU/GPU clock bins, MHz, strictly increasing.
struct HardwareGrid {
    std::vector<std::uint32_t> cpu_bins_mhz;
    std::vector<std::uint32_t> gpu_bins_mhz;

    void validate() const;
};

struct LodLevel {
    std::string name;
    double threshold;  // projection-area fraction in (0, 1]
};

// LOD tiers keyed by projection-area threshold, largest first.
// The first threshold is always 1.0 (full projection area).
struct LodSet {
    std::vector<LodLevel> levels;

    std::size_t level_count() const { return levels.size(); }
    void validate() const;
};

// One fully specified input to the quantized rendering function.
struct ConfigPoint {
    ParameterVector params;
    std::size_t lod = 0;
    double cpu_freq_mhz = 0.0;
    double gpu_freq_mhz = 0.0;
};

struct RenderOutcome {
    double ssim = 0.0;     // in [0, 1]
    double time_ms = 0.0;  // >= 0
};

struct Sample {
    ConfigPoint point;
    RenderOutcome outcome;
};

struct Dataset {
    ParameterSpace space;
    std::vector<Sample> samples;
    std::uint64_t seed = 0;  // RNG seed that produced it; not persisted in CSV
};

// Mixed-radix code with dimension 0 as the most significant digit:
//   code = ((...(i0*n1 + i1)*n2 + i2)...)*n_{k-1} + i_{k-1}
// Bijective over [0, prod n_d). Throws ValidationError on dimension-count or
// index-out-of-range mismatch.
std::uint32_t config_index(std::span<const ParameterDimension> dims, const ParameterVector& p);
std::uint32_t config_index(const ParameterSpace& space, const ParameterVector& p);

// Inverse of config_index. Throws ValidationError when code is out of range.
ParameterVector config_unindex(std::span<const ParameterDimension> dims, std::uint32_t code);
ParameterVector config_unindex(const ParameterSpace& space, std::uint32_t code);

// All combinations exactly once, in ascending config_index order.
std::vector<ParameterVector> enumerate_space(const ParameterSpace& space);

// Index of the bin nearest to `observed_mhz`. Equidistant ties resolve to the
// lower index; values outside the bin range clamp to the nearest endpoint.
std::size_t snap_frequency(std::span<const std::uint32_t> bins, double observed_mhz);

// Dataset CSV: header `param_<name>,...,lod,cpu_freq_mhz,gpu_freq_mhz,ssim,time_ms`,
// one sample per row, UTF-8, LF line endings. param columns hold level indices.
void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path, const ParameterSpace& space);

}  // namespace rtune
