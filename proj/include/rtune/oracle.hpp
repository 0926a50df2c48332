#pragma once

#include <cstdint>

#include "rtune/core.hpp"

namespace rtune {

struct FreqRange {
    double min_mhz = 0.0;
    double max_mhz = 0.0;

    double midpoint() const { return (min_mhz + max_mhz) / 2.0; }
    bool contains(double f) const { return f >= min_mhz && f <= max_mhz; }
};

// Synthetic stand-in for the rendering engine. The closed form is fixed:
//
//   normlevel_d(p) = index_d / (count_d - 1), or 0 when count_d == 1
//   work(p)   = sum_d cost_w[d] * normlevel_d(p)
//             + interaction_strength * normlevel_a(p) * normlevel_b(p)
//               (a, b: the two dimensions with the largest cost weights,
//                ties to the lower index; term is 0 for single-dim spaces)
//   time_ms   = 4.0 * (0.25 + work(p)) * lod_threshold * (gpu_ref / gpu_freq)
//             + 0.2 * (cpu_ref / cpu_freq)
//   ssim      = clamp(1 - sum_d quality_w[d]
//                         * max(0, normlevel_d(p_best) - normlevel_d(p))
//                         * lod_threshold, 0, 1)
//
// gpu_ref/cpu_ref are the midpoints of the configured frequency ranges.
// Noise, when enabled, multiplies time by (1 + e_t) and shifts ssim by e_s,
// both zero-mean Gaussians seeded by a hash of (seed, config code, lod,
// integer MHz), so a point's noise does not depend on draw order.
struct OracleConfig {
    ParameterSpace space;
    LodSet lods;
    FreqRange cpu_freq_range;
    FreqRange gpu_freq_range;
    std::vector<double> cost_weights;     // per dimension, > 0
    std::vector<double> quality_weights;  // per dimension, > 0
    double interaction_strength = 0.5;
    double noise_std_time = 0.03;   // relative
    double noise_std_ssim = 0.002;  // absolute
    std::uint64_t seed = 0;

    void validate() const;
};

// Uniform weights 1/k per dimension and the default nonlinearity/noise.
OracleConfig default_oracle_config(ParameterSpace space, LodSet lods, FreqRange cpu, FreqRange gpu,
                                   std::uint64_t seed);

// Deterministic given (cfg, point, noisy). Throws ValidationError on an
// invalid point (bad indices, bad lod, frequency outside the declared range).
RenderOutcome oracle_evaluate(const OracleConfig& cfg, const ConfigPoint& point, bool noisy);

// The best-quality vector of the configured space.
ParameterVector best_quality_vector(const ParameterSpace& space);

// n_samples i.i.d. draws: parameter vector uniform over the space, LOD
// uniform over levels, frequencies uniform over their ranges rounded to
// integer MHz; evaluated with noise on. Deterministic for a fixed seed.
Dataset generate_dataset(const OracleConfig& cfg, std::size_t n_samples);

}  // namespace rtune
