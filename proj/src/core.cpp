#include "rtune/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rtune/errors.hpp"
#include "rtune/textio.hpp"

namespace rtune {

namespace {

std::uint64_t combination_product(std::span<const ParameterDimension> dims) {
    std::uint64_t total = 1;
    for (const auto& d : dims) {
        total *= d.values.size();
        if (total > std::numeric_limits<std::uint32_t>::max()) {
            throw ValidationError("parameter space has more combinations than fit in 32 bits");
        }
    }
    return total;
}

void check_vector(std::span<const ParameterDimension> dims, const ParameterVector& p) {
    if (p.indices.size() != dims.size()) {
        throw ValidationError("parameter vector has " + std::to_string(p.indices.size()) +
                              " indices, space has " + std::to_string(dims.size()) + " dimensions");
    }
    for (std::size_t d = 0; d < dims.size(); ++d) {
        if (p.indices[d] >= dims[d].values.size()) {
            throw ValidationError("index " + std::to_string(p.indices[d]) + " out of range for dimension '" +
                                  dims[d].name + "' (" + std::to_string(dims[d].values.size()) + " levels)");
        }
    }
}

}  // namespace

std::uint32_t ParameterSpace::total_combinations() const {
    return static_cast<std::uint32_t>(combination_product(dimensions));
}

void ParameterSpace::validate() const {
    if (dimensions.empty()) {
        throw ValidationError("parameter space has no dimensions");
    }
    for (std::size_t d = 0; d < dimensions.size(); ++d) {
        const auto& dim = dimensions[d];
        if (dim.name.empty()) {
            throw ValidationError("dimension " + std::to_string(d) + " has an empty name");
        }
        for (std::size_t e = d + 1; e < dimensions.size(); ++e) {
            if (dimensions[e].name == dim.name) {
                throw ValidationError("duplicate dimension name '" + dim.name + "'");
            }
        }
        if (dim.values.empty()) {
            throw ValidationError("dimension '" + dim.name + "' has no levels");
        }
        for (std::size_t i = 1; i < dim.values.size(); ++i) {
            if (!(dim.values[i - 1] < dim.values[i])) {
                throw ValidationError("dimension '" + dim.name + "' levels are not strictly increasing");
            }
        }
    }
    combination_product(dimensions);
    if (best_quality_index.size() != dimensions.size()) {
        throw ValidationError("best_quality_index length does not match dimension count");
    }
    for (std::size_t d = 0; d < dimensions.size(); ++d) {
        if (best_quality_index[d] >= dimensions[d].values.size()) {
            throw ValidationError("best_quality_index out of range for dimension '" + dimensions[d].name + "'");
        }
    }
}

void HardwareGrid::validate() const {
    for (const auto* bins : {&cpu_bins_mhz, &gpu_bins_mhz}) {
        if (bins->empty()) {
            throw ValidationError("hardware grid has an empty bin list");
        }
        for (std::size_t i = 1; i < bins->size(); ++i) {
            if (!((*bins)[i - 1] < (*bins)[i])) {
                throw ValidationError("hardware grid bins are not strictly increasing");
            }
        }
    }
}

void LodSet::validate() const {
    if (levels.empty()) {
        throw ValidationError("LOD set is empty");
    }
    if (levels.front().threshold != 1.0) {
        throw ValidationError("first LOD threshold must be 1.0");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        double t = levels[i].threshold;
        if (!(t > 0.0 && t <= 1.0)) {
            throw ValidationError("LOD threshold must lie in (0, 1]");
        }
        if (i > 0 && !(t < levels[i - 1].threshold)) {
            throw ValidationError("LOD thresholds must be strictly decreasing");
        }
    }
}

std::uint32_t config_index(std::span<const ParameterDimension> dims, const ParameterVector& p) {
    check_vector(dims, p);
    std::uint64_t code = 0;
    for (std::size_t d = 0; d < dims.size(); ++d) {
        code = code * dims[d].values.size() + p.indices[d];
    }
    return static_cast<std::uint32_t>(code);
}

std::uint32_t config_index(const ParameterSpace& space, const ParameterVector& p) {
    return config_index(std::span<const ParameterDimension>(space.dimensions), p);
}

ParameterVector config_unindex(std::span<const ParameterDimension> dims, std::uint32_t code) {
    std::uint64_t total = combination_product(dims);
    if (code >= total) {
        throw ValidationError("config code " + std::to_string(code) + " out of range (" +
                              std::to_string(total) + " combinations)");
    }
    ParameterVector p;
    p.indices.resize(dims.size());
    std::uint64_t rest = code;
    for (std::size_t d = dims.size(); d-- > 0;) {
        std::uint64_t n = dims[d].values.size();
        p.indices[d] = static_cast<std::uint32_t>(rest % n);
        rest /= n;
    }
    return p;
}

ParameterVector config_unindex(const ParameterSpace& space, std::uint32_t code) {
    return config_unindex(std::span<const ParameterDimension>(space.dimensions), code);
}

std::vector<ParameterVector> enumerate_space(const ParameterSpace& space) {
    const std::uint32_t total = space.total_combinations();
    std::vector<ParameterVector> out;
    out.reserve(total);
    ParameterVector cur;
    cur.indices.assign(space.dimension_count(), 0);
    for (std::uint32_t code = 0; code < total; ++code) {
        out.push_back(cur);
        // increment least significant digit, mixed radix
        for (std::size_t d = cur.indices.size(); d-- > 0;) {
            if (++cur.indices[d] < space.dimensions[d].values.size()) break;
            cur.indices[d] = 0;
        }
    }
    return out;
}

std::size_t snap_frequency(std::span<const std::uint32_t> bins, double observed_mhz) {
    if (bins.empty()) {
        throw ValidationError("snap_frequency: empty bin list");
    }
    auto it = std::lower_bound(bins.begin(), bins.end(), observed_mhz);
    if (it == bins.begin()) return 0;
    if (it == bins.end()) return bins.size() - 1;
    std::size_t hi = static_cast<std::size_t>(it - bins.begin());
    std::size_t lo = hi - 1;
    double d_lo = observed_mhz - bins[lo];
    double d_hi = bins[hi] - observed_mhz;
    return d_hi < d_lo ? hi : lo;  // tie resolves to the lower index
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    for (std::size_t d = 0; d < data.space.dimension_count(); ++d) {
        out << "param_" << data.space.dimensions[d].name << ',';
    }
    out << "lod,cpu_freq_mhz,gpu_freq_mhz,ssim,time_ms\n";
    for (const auto& s : data.samples) {
        for (std::uint32_t idx : s.point.params.indices) {
            out << idx << ',';
        }
        out << s.point.lod << ',' << format_double(s.point.cpu_freq_mhz) << ','
            << format_double(s.point.gpu_freq_mhz) << ',' << format_double(s.outcome.ssim) << ','
            << format_double(s.outcome.time_ms) << '\n';
    }
    if (!out) {
        throw FormatError("write failed for '" + path + "'");
    }
}

Dataset load_dataset_csv(const std::string& path, const ParameterSpace& space) {
    space.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(path + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::size_t k = space.dimension_count();
    auto header = split_csv_line(line);
    if (header.size() != k + 5) {
        throw FormatError(path + ": expected " + std::to_string(k + 5) + " columns, got " +
                          std::to_string(header.size()));
    }
    for (std::size_t d = 0; d < k; ++d) {
        std::string expected = "param_" + space.dimensions[d].name;
        if (header[d] != expected) {
            throw FormatError(path + ": column " + std::to_string(d) + " is '" + std::string(header[d]) +
                              "', expected '" + expected + "'");
        }
    }
    const char* fixed[] = {"lod", "cpu_freq_mhz", "gpu_freq_mhz", "ssim", "time_ms"};
    for (std::size_t i = 0; i < 5; ++i) {
        if (header[k + i] != fixed[i]) {
            throw FormatError(path + ": column " + std::to_string(k + i) + " is '" +
                              std::string(header[k + i]) + "', expected '" + fixed[i] + "'");
        }
    }

    Dataset data;
    data.space = space;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        std::string ctx = path + ":" + std::to_string(row);
        if (fields.size() != k + 5) {
            throw FormatError(ctx + ": expected " + std::to_string(k + 5) + " fields");
        }
        Sample s;
        s.point.params.indices.resize(k);
        for (std::size_t d = 0; d < k; ++d) {
            std::uint64_t idx = parse_uint(fields[d], ctx);
            if (idx >= space.dimensions[d].values.size()) {
                throw FormatError(ctx + ": level index " + std::to_string(idx) + " out of range for '" +
                                  space.dimensions[d].name + "'");
            }
            s.point.params.indices[d] = static_cast<std::uint32_t>(idx);
        }
        s.point.lod = parse_uint(fields[k], ctx);
        s.point.cpu_freq_mhz = parse_double(fields[k + 1], ctx);
        s.point.gpu_freq_mhz = parse_double(fields[k + 2], ctx);
        s.outcome.ssim = parse_double(fields[k + 3], ctx);
        s.outcome.time_ms = parse_double(fields[k + 4], ctx);
        if (s.point.cpu_freq_mhz <= 0.0 || s.point.gpu_freq_mhz <= 0.0) {
            throw FormatError(ctx + ": frequencies must be positive");
        }
        data.samples.push_back(std::move(s));
    }
    return data;
}

}  // namespace rtune
