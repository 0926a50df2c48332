#include "rtune/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rtune/errors.hpp"

namespace rtune {

namespace {

constexpr double kBaseTimeMs = 4.0;
constexpr double kWorkFloor = 0.25;
constexpr double kCpuOverheadMs = 0.2;

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t point_noise_seed(const OracleConfig& cfg, std::uint32_t code, std::size_t lod,
                               double cpu_mhz, double gpu_mhz) {
    std::uint64_t h = mix64(cfg.seed);
    h = mix64(h ^ code);
    h = mix64(h ^ static_cast<std::uint64_t>(lod));
    h = mix64(h ^ static_cast<std::uint64_t>(std::llround(cpu_mhz)));
    h = mix64(h ^ static_cast<std::uint64_t>(std::llround(gpu_mhz)));
    return h;
}

double normlevel(const ParameterDimension& dim, std::uint32_t index) {
    std::size_t n = dim.values.size();
    return n > 1 ? static_cast<double>(index) / static_cast<double>(n - 1) : 0.0;
}

// The two dimensions with the largest cost weights; ties to the lower index.
std::pair<std::size_t, std::size_t> costliest_pair(const std::vector<double>& w) {
    std::size_t a = 0;
    for (std::size_t d = 1; d < w.size(); ++d) {
        if (w[d] > w[a]) a = d;
    }
    std::size_t b = a == 0 ? 1 : 0;
    for (std::size_t d = 0; d < w.size(); ++d) {
        if (d != a && w[d] > w[b]) b = d;
    }
    return {a, b};
}

}  // namespace

void OracleConfig::validate() const {
    space.validate();
    lods.validate();
    const std::size_t k = space.dimension_count();
    if (cost_weights.size() != k || quality_weights.size() != k) {
        throw ValidationError("oracle weights must have one entry per dimension");
    }
    for (double w : cost_weights) {
        if (!(w > 0.0)) throw ValidationError("cost weights must be positive");
    }
    for (double w : quality_weights) {
        if (!(w > 0.0)) throw ValidationError("quality weights must be positive");
    }
    if (interaction_strength < 0.0) {
        throw ValidationError("interaction strength must be >= 0");
    }
    if (noise_std_time < 0.0 || noise_std_ssim < 0.0) {
        throw ValidationError("noise levels must be >= 0");
    }
    for (const auto* r : {&cpu_freq_range, &gpu_freq_range}) {
        if (!(r->min_mhz > 0.0 && r->min_mhz < r->max_mhz)) {
            throw ValidationError("frequency range must satisfy 0 < min < max");
        }
    }
}

OracleConfig default_oracle_config(ParameterSpace space, LodSet lods, FreqRange cpu, FreqRange gpu,
                                   std::uint64_t seed) {
    OracleConfig cfg;
    cfg.space = std::move(space);
    cfg.lods = std::move(lods);
    cfg.cpu_freq_range = cpu;
    cfg.gpu_freq_range = gpu;
    const std::size_t k = cfg.space.dimension_count();
    cfg.cost_weights.assign(k, 1.0 / static_cast<double>(k));
    cfg.quality_weights.assign(k, 1.0 / static_cast<double>(k));
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

ParameterVector best_quality_vector(const ParameterSpace& space) {
    ParameterVector best;
    best.indices.reserve(space.dimension_count());
    for (std::size_t d = 0; d < space.dimension_count(); ++d) {
        best.indices.push_back(static_cast<std::uint32_t>(space.best_quality_index[d]));
    }
    return best;
}

RenderOutcome oracle_evaluate(const OracleConfig& cfg, const ConfigPoint& point, bool noisy) {
    const std::uint32_t code = config_index(cfg.space, point.params);
    if (point.lod >= cfg.lods.level_count()) {
        throw ValidationError("lod index " + std::to_string(point.lod) + " out of range");
    }
    if (!cfg.cpu_freq_range.contains(point.cpu_freq_mhz)) {
        throw ValidationError("cpu frequency " + std::to_string(point.cpu_freq_mhz) +
                              " MHz outside the oracle range");
    }
    if (!cfg.gpu_freq_range.contains(point.gpu_freq_mhz)) {
        throw ValidationError("gpu frequency " + std::to_string(point.gpu_freq_mhz) +
                              " MHz outside the oracle range");
    }

    const std::size_t k = cfg.space.dimension_count();
    double work = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
        work += cfg.cost_weights[d] * normlevel(cfg.space.dimensions[d], point.params.indices[d]);
    }
    if (k >= 2 && cfg.interaction_strength > 0.0) {
        auto [a, b] = costliest_pair(cfg.cost_weights);
        work += cfg.interaction_strength * normlevel(cfg.space.dimensions[a], point.params.indices[a]) *
                normlevel(cfg.space.dimensions[b], point.params.indices[b]);
    }

    const double lod_factor = cfg.lods.levels[point.lod].threshold;
    const double gpu_ref = cfg.gpu_freq_range.midpoint();
    const double cpu_ref = cfg.cpu_freq_range.midpoint();

    double time_ms = kBaseTimeMs * (kWorkFloor + work) * lod_factor * (gpu_ref / point.gpu_freq_mhz) +
                     kCpuOverheadMs * (cpu_ref / point.cpu_freq_mhz);

    double quality_loss = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
        double gap = normlevel(cfg.space.dimensions[d], static_cast<std::uint32_t>(cfg.space.best_quality_index[d])) -
                     normlevel(cfg.space.dimensions[d], point.params.indices[d]);
        quality_loss += cfg.quality_weights[d] * std::max(0.0, gap) * lod_factor;
    }
    double ssim = std::clamp(1.0 - quality_loss, 0.0, 1.0);

    if (noisy) {
        std::mt19937_64 eng(point_noise_seed(cfg, code, point.lod, point.cpu_freq_mhz, point.gpu_freq_mhz));
        std::normal_distribution<double> unit(0.0, 1.0);
        double eps_t = unit(eng) * cfg.noise_std_time;
        double eps_s = unit(eng) * cfg.noise_std_ssim;
        time_ms = std::max(0.0, time_ms * (1.0 + eps_t));
        ssim = std::clamp(ssim + eps_s, 0.0, 1.0);
    }
    return RenderOutcome{ssim, time_ms};
}

Dataset generate_dataset(const OracleConfig& cfg, std::size_t n_samples) {
    cfg.validate();
    if (n_samples < 1) {
        throw ValidationError("n_samples must be >= 1");
    }
    const std::uint32_t total = cfg.space.total_combinations();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::uint32_t> code_draw(0, total - 1);
    std::uniform_int_distribution<std::size_t> lod_draw(0, cfg.lods.level_count() - 1);
    std::uniform_real_distribution<double> cpu_draw(cfg.cpu_freq_range.min_mhz, cfg.cpu_freq_range.max_mhz);
    std::uniform_real_distribution<double> gpu_draw(cfg.gpu_freq_range.min_mhz, cfg.gpu_freq_range.max_mhz);

    auto draw_mhz = [](std::uniform_real_distribution<double>& dist, std::mt19937_64& eng,
                       const FreqRange& range) {
        double f = std::round(dist(eng));
        // rounding can step past the range ends for fractional bounds
        f = std::clamp(f, std::ceil(range.min_mhz), std::floor(range.max_mhz));
        return f;
    };

    Dataset data;
    data.space = cfg.space;
    data.seed = cfg.seed;
    data.samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        ConfigPoint p;
        p.params = config_unindex(cfg.space, code_draw(rng));
        p.lod = lod_draw(rng);
        p.cpu_freq_mhz = draw_mhz(cpu_draw, rng, cfg.cpu_freq_range);
        p.gpu_freq_mhz = draw_mhz(gpu_draw, rng, cfg.gpu_freq_range);
        RenderOutcome out = oracle_evaluate(cfg, p, /*noisy=*/true);
        data.samples.push_back(Sample{std::move(p), out});
    }
    return data;
}

}  // namespace rtune
