#include "rtune/lut.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include "rtune/errors.hpp"

namespace rtune {

namespace {

constexpr char kMagic[4] = {'L', 'U', 'T', '1'};
constexpr std::uint16_t kFormatVersion = 1;

std::vector<std::uint8_t> pack_codes(std::span<const std::uint32_t> codes, std::uint8_t width) {
    const std::size_t total_bits = codes.size() * width;
    std::vector<std::uint8_t> bytes((total_bits + 7) / 8, 0);
    std::size_t pos = 0;
    for (std::uint32_t code : codes) {
        for (int b = width - 1; b >= 0; --b, ++pos) {
            const std::uint8_t bit = static_cast<std::uint8_t>((code >> b) & 1u);
            bytes[pos >> 3] |= static_cast<std::uint8_t>(bit << (7 - (pos & 7)));
        }
    }
    return bytes;
}

struct ByteWriter {
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
};

struct ByteReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
    const std::string& path;

    void need(std::size_t n) {
        if (pos + n > bytes.size()) {
            throw FormatError(path + ": truncated at byte " + std::to_string(pos));
        }
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

std::uint64_t dims_product(const std::vector<ParameterDimension>& dims, const char* what) {
    std::uint64_t total = 1;
    for (const auto& d : dims) {
        total *= d.values.size();
        if (total > std::numeric_limits<std::uint32_t>::max()) {
            throw ValidationError(std::string(what) + ": combination count exceeds 32 bits");
        }
    }
    return total;
}

}  // namespace

void LutBuildConfig::validate() const {
    space.validate();
    lods.validate();
    grid.validate();
    if (!(time_percentile > 0.0 && time_percentile <= 1.0)) {
        throw ValidationError("time_percentile must lie in (0, 1]");
    }
    if (phi.target != "ssim") {
        throw ValidationError("phi model target is '" + phi.target + "', expected 'ssim'");
    }
    if (psi.target != "time_ms") {
        throw ValidationError("psi model target is '" + psi.target + "', expected 'time_ms'");
    }
    const std::size_t width = space.dimension_count() + 3;
    if (phi.n_features != width || psi.n_features != width) {
        throw ValidationError("model feature width does not match the parameter space");
    }
}

std::size_t cell_index(std::size_t lod_count, std::size_t cpu_count, std::size_t gpu_count, std::size_t l,
                       std::size_t c, std::size_t g) {
    if (l >= lod_count || c >= cpu_count || g >= gpu_count) {
        throw ValidationError("cell index (" + std::to_string(l) + "," + std::to_string(c) + "," +
                              std::to_string(g) + ") out of range");
    }
    return (l * cpu_count + c) * gpu_count + g;
}

std::size_t phase1_keep_count(std::size_t n, double percentile) {
    std::size_t m = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n)));
    return std::clamp<std::size_t>(m, 1, n);
}

std::uint32_t two_phase_search(std::vector<PredictedEntry> entries, double percentile) {
    if (entries.empty()) {
        throw ValidationError("two_phase_search: empty candidate list");
    }
    std::sort(entries.begin(), entries.end(), [](const PredictedEntry& a, const PredictedEntry& b) {
        if (a.time_ms != b.time_ms) return a.time_ms < b.time_ms;
        return a.code < b.code;
    });
    const std::size_t keep = phase1_keep_count(entries.size(), percentile);
    // the kept prefix is ordered by (time, code), so a strict ssim improvement
    // scan realizes the phase-2 tie rules for free
    std::size_t best = 0;
    for (std::size_t i = 1; i < keep; ++i) {
        if (entries[i].ssim > entries[best].ssim) best = i;
    }
    return entries[best].code;
}

std::uint8_t code_bit_width(std::uint32_t total) {
    if (total == 0) {
        throw ValidationError("bit width undefined for an empty code set");
    }
    return static_cast<std::uint8_t>(std::max(1, static_cast<int>(std::bit_width(total - 1))));
}

std::uint32_t LookupTable::total_combinations() const {
    return static_cast<std::uint32_t>(dims_product(dimensions, "lookup table"));
}

std::uint32_t LookupTable::entry(std::size_t cell) const {
    if (cell >= cell_count()) {
        throw ValidationError("cell " + std::to_string(cell) + " out of range");
    }
    std::uint32_t code = 0;
    std::size_t pos = cell * bit_width;
    for (std::uint8_t b = 0; b < bit_width; ++b, ++pos) {
        code = (code << 1) | ((packed[pos >> 3] >> (7 - (pos & 7))) & 1u);
    }
    return code;
}

bool LookupTable::operator==(const LookupTable& other) const {
    auto dims_equal = [](const std::vector<ParameterDimension>& a, const std::vector<ParameterDimension>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].name != b[i].name || a[i].values != b[i].values) return false;
        }
        return true;
    };
    return dims_equal(dimensions, other.dimensions) && lod_thresholds == other.lod_thresholds &&
           cpu_bins_mhz == other.cpu_bins_mhz && gpu_bins_mhz == other.gpu_bins_mhz &&
           time_percentile == other.time_percentile && phi_fingerprint == other.phi_fingerprint &&
           psi_fingerprint == other.psi_fingerprint && bit_width == other.bit_width &&
           packed == other.packed;
}

LookupTable assemble_table(const ParameterSpace& space, const LodSet& lods, const HardwareGrid& grid,
                           double percentile, std::uint64_t phi_fp, std::uint64_t psi_fp,
                           std::span<const std::uint32_t> codes) {
    LookupTable t;
    t.dimensions.reserve(space.dimension_count());
    for (const auto& d : space.dimensions) {
        ParameterDimension narrowed;
        narrowed.name = d.name;
        narrowed.values.reserve(d.values.size());
        for (double v : d.values) {
            narrowed.values.push_back(static_cast<double>(static_cast<float>(v)));
        }
        t.dimensions.push_back(std::move(narrowed));
    }
    t.lod_thresholds.reserve(lods.level_count());
    for (const auto& l : lods.levels) {
        t.lod_thresholds.push_back(static_cast<float>(l.threshold));
    }
    t.cpu_bins_mhz = grid.cpu_bins_mhz;
    t.gpu_bins_mhz = grid.gpu_bins_mhz;
    t.time_percentile = static_cast<float>(percentile);
    t.phi_fingerprint = phi_fp;
    t.psi_fingerprint = psi_fp;

    const std::uint32_t total = t.total_combinations();
    if (codes.size() != t.cell_count()) {
        throw ValidationError("entry count does not match the cell grid");
    }
    for (std::uint32_t code : codes) {
        if (code >= total) {
            throw ValidationError("stored code " + std::to_string(code) + " out of range");
        }
    }
    t.bit_width = code_bit_width(total);
    t.packed = pack_codes(codes, t.bit_width);
    return t;
}

LookupTable build_lut(const LutBuildConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const std::uint32_t total = cfg.space.total_combinations();
    const std::size_t k = cfg.space.dimension_count();
    const std::size_t n_lod = cfg.lods.level_count();
    const std::size_t n_cpu = cfg.grid.cpu_bins_mhz.size();
    const std::size_t n_gpu = cfg.grid.gpu_bins_mhz.size();
    const std::size_t n_cells = n_lod * n_cpu * n_gpu;

    // Parameter-index columns are identical for every cell; each worker
    // rewrites only the lod/cpu/gpu columns of its private copy.
    FeatureMatrix base;
    base.n_features = k + 3;
    base.values.reserve(static_cast<std::size_t>(total) * base.n_features);
    for (const auto& p : enumerate_space(cfg.space)) {
        for (std::uint32_t idx : p.indices) {
            base.values.push_back(static_cast<double>(idx));
        }
        base.values.insert(base.values.end(), {0.0, 0.0, 0.0});
    }

    std::vector<std::uint32_t> codes(n_cells, 0);
    auto process_cells = [&](std::size_t begin, std::size_t end) {
        FeatureMatrix feats = base;
        std::vector<PredictedEntry> entries(total);
        for (std::size_t cell = begin; cell < end; ++cell) {
            const std::size_t g = cell % n_gpu;
            const std::size_t c = (cell / n_gpu) % n_cpu;
            const std::size_t l = cell / (n_gpu * n_cpu);
            for (std::uint32_t code = 0; code < total; ++code) {
                double* row = feats.values.data() + static_cast<std::size_t>(code) * feats.n_features + k;
                row[0] = static_cast<double>(l);
                row[1] = static_cast<double>(cfg.grid.cpu_bins_mhz[c]);
                row[2] = static_cast<double>(cfg.grid.gpu_bins_mhz[g]);
            }
            for (std::uint32_t code = 0; code < total; ++code) {
                auto row = feats.row(code);
                entries[code] = PredictedEntry{code, cfg.phi.predict_row(row), cfg.psi.predict_row(row)};
            }
            codes[cell] = two_phase_search(entries, cfg.time_percentile);
        }
    };

    const unsigned n_threads =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>((n_cells + 15) / 16)));
    if (n_threads <= 1) {
        process_cells(0, n_cells);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_cells + n_threads - 1) / n_threads;
        for (unsigned t = 0; t < n_threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(n_cells, begin + chunk);
            if (begin < end) pool.emplace_back(process_cells, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    LookupTable table = assemble_table(cfg.space, cfg.lods, cfg.grid, cfg.time_percentile,
                                       model_fingerprint(cfg.phi), model_fingerprint(cfg.psi), codes);
    table.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return table;
}

void save_lut(const LookupTable& table, const std::string& path) {
    if (table.dimensions.empty() || table.dimensions.size() > 255) {
        throw ValidationError("lookup table must have 1..255 dimensions");
    }
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u16(kFormatVersion);
    w.u8(table.bit_width);
    w.u8(0);  // reserved
    w.u8(static_cast<std::uint8_t>(table.dimensions.size()));
    for (const auto& d : table.dimensions) {
        if (d.name.size() > 255) {
            throw ValidationError("dimension name longer than 255 bytes");
        }
        if (d.values.empty() || d.values.size() > 65535) {
            throw ValidationError("dimension level count out of range");
        }
        w.u8(static_cast<std::uint8_t>(d.name.size()));
        w.raw(d.name.data(), d.name.size());
        w.u16(static_cast<std::uint16_t>(d.values.size()));
        for (double v : d.values) w.f32(static_cast<float>(v));
    }
    if (table.lod_thresholds.empty() || table.lod_thresholds.size() > 255) {
        throw ValidationError("LOD count out of range");
    }
    w.u8(static_cast<std::uint8_t>(table.lod_thresholds.size()));
    for (float t : table.lod_thresholds) w.f32(t);
    if (table.cpu_bins_mhz.empty() || table.cpu_bins_mhz.size() > 65535 || table.gpu_bins_mhz.empty() ||
        table.gpu_bins_mhz.size() > 65535) {
        throw ValidationError("bin count out of range");
    }
    w.u16(static_cast<std::uint16_t>(table.cpu_bins_mhz.size()));
    for (std::uint32_t b : table.cpu_bins_mhz) w.u32(b);
    w.u16(static_cast<std::uint16_t>(table.gpu_bins_mhz.size()));
    for (std::uint32_t b : table.gpu_bins_mhz) w.u32(b);
    w.f32(table.time_percentile);
    w.u64(table.phi_fingerprint);
    w.u64(table.psi_fingerprint);
    w.u32(static_cast<std::uint32_t>(table.packed.size()));
    w.raw(table.packed.data(), table.packed.size());
    w.u32(crc_of(w.bytes));

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
    if (!out) {
        throw FormatError("write failed for '" + path + "'");
    }
}

LookupTable load_lut(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16) {
        throw FormatError(path + ": file too small to be a lookup table");
    }
    const std::size_t body_len = bytes.size() - 4;
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i) stored_crc |= static_cast<std::uint32_t>(bytes[body_len + i]) << (8 * i);
    if (crc_of(std::span<const std::uint8_t>(bytes.data(), body_len)) != stored_crc) {
        throw FormatError(path + ": checksum mismatch");
    }

    ByteReader r{std::span<const std::uint8_t>(bytes.data(), body_len), 0, path};
    char magic[4];
    for (char& ch : magic) ch = static_cast<char>(r.u8());
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError(path + ": bad magic");
    }
    if (r.u16() != kFormatVersion) {
        throw FormatError(path + ": unsupported format version");
    }
    LookupTable t;
    t.bit_width = r.u8();
    r.u8();  // reserved
    if (t.bit_width < 1 || t.bit_width > 32) {
        throw FormatError(path + ": bit width out of range");
    }
    const std::size_t n_dims = r.u8();
    if (n_dims == 0) {
        throw FormatError(path + ": no dimensions");
    }
    for (std::size_t d = 0; d < n_dims; ++d) {
        ParameterDimension dim;
        dim.name = r.str(r.u8());
        const std::size_t n_levels = r.u16();
        if (n_levels == 0) {
            throw FormatError(path + ": dimension with no levels");
        }
        dim.values.reserve(n_levels);
        for (std::size_t i = 0; i < n_levels; ++i) {
            dim.values.push_back(static_cast<double>(r.f32()));
        }
        t.dimensions.push_back(std::move(dim));
    }
    const std::size_t n_lods = r.u8();
    if (n_lods == 0) {
        throw FormatError(path + ": no LOD levels");
    }
    for (std::size_t i = 0; i < n_lods; ++i) t.lod_thresholds.push_back(r.f32());
    const std::size_t n_cpu = r.u16();
    for (std::size_t i = 0; i < n_cpu; ++i) t.cpu_bins_mhz.push_back(r.u32());
    const std::size_t n_gpu = r.u16();
    for (std::size_t i = 0; i < n_gpu; ++i) t.gpu_bins_mhz.push_back(r.u32());
    if (t.cpu_bins_mhz.empty() || t.gpu_bins_mhz.empty()) {
        throw FormatError(path + ": empty bin list");
    }
    t.time_percentile = r.f32();
    t.phi_fingerprint = r.u64();
    t.psi_fingerprint = r.u64();
    const std::size_t payload_len = r.u32();
    const std::size_t expected_len = (t.cell_count() * t.bit_width + 7) / 8;
    if (payload_len != expected_len) {
        throw FormatError(path + ": payload length " + std::to_string(payload_len) + " does not match " +
                          std::to_string(expected_len));
    }
    r.need(payload_len);
    t.packed.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(r.pos + payload_len));
    r.pos += payload_len;
    if (r.pos != body_len) {
        throw FormatError(path + ": trailing bytes after payload");
    }

    std::uint64_t total = 1;
    for (const auto& d : t.dimensions) total *= d.values.size();
    if (total > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError(path + ": combination count exceeds 32 bits");
    }
    for (std::size_t cell = 0; cell < t.cell_count(); ++cell) {
        if (t.entry(cell) >= total) {
            throw FormatError(path + ": entry out of range at cell " + std::to_string(cell));
        }
    }
    return t;
}

}  // namespace rtune
