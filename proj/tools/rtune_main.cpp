// Command-line front-end for the tuning pipeline: dataset generation, model
// training, table pre-computation, per-frame queries, and the evaluation
// protocols, all driven by one JSON configuration document.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rtune/config.hpp"
#include "rtune/core.hpp"
#include "rtune/errors.hpp"
#include "rtune/gbdt.hpp"
#include "rtune/harness.hpp"
#include "rtune/lut.hpp"
#include "rtune/oracle.hpp"
#include "rtune/runtime.hpp"
#include "rtune/textio.hpp"

namespace {

std::string pick(const std::string& flag_value, const std::string& config_value,
                 const rtune::PipelineConfig& cfg, const char* what) {
    if (!flag_value.empty()) return flag_value;
    if (config_value.empty()) {
        throw rtune::ConfigError(std::string("no path for ") + what + " (flag or config)");
    }
    return cfg.resolve(config_value);
}

void ensure_parent_dir(const std::string& path) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rtune: rendering-parameter tuning via boosted-tree models distilled into lookup tables"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, phi_path, psi_path, lut_path, target;
    std::size_t n_samples = 0;
    std::size_t lod = 0;
    double cpu_mhz = 0.0, gpu_mhz = 0.0;
    std::size_t iters = 1000000;
    double sweep_from = 0.0, sweep_to = 0.0, sweep_step = 0.0;
    double sweep_cpu = 0.0;

    auto* gen = app.add_subcommand("generate-data", "Sample the synthetic renderer into a training CSV");
    gen->add_option("--config", config_path, "pipeline config JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--samples", n_samples, "number of samples")->required()->check(CLI::PositiveNumber);
    gen->add_option("--out", out_path, "output CSV (default: paths.dataset from the config)");
    gen->callback([&]() {
        auto cfg = rtune::load_pipeline_config(config_path);
        std::string out = pick(out_path, cfg.paths.dataset, cfg, "dataset");
        rtune::Dataset data = rtune::generate_dataset(cfg.oracle, n_samples);
        ensure_parent_dir(out);
        rtune::save_dataset_csv(data, out);
        std::cout << "wrote " << data.samples.size() << " samples (seed " << data.seed << ") to " << out
                  << "\n";
    });

    auto* train_cmd = app.add_subcommand("train", "Train one regressor (quality or time) on a dataset CSV");
    train_cmd->add_option("--config", config_path, "pipeline config JSON")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--data", data_path, "dataset CSV (default: paths.dataset)");
    train_cmd->add_option("--target", target, "regression target: ssim | time")
        ->required()
        ->check(CLI::IsMember({"ssim", "time"}));
    train_cmd->add_option("--out", out_path, "output model JSON (default: paths.phi_model/psi_model)");
    train_cmd->callback([&]() {
        auto cfg = rtune::load_pipeline_config(config_path);
        const std::string target_name = target == "time" ? "time_ms" : "ssim";
        std::string in = pick(data_path, cfg.paths.dataset, cfg, "dataset");
        std::string out = pick(out_path, target == "time" ? cfg.paths.psi_model : cfg.paths.phi_model, cfg,
                               "model output");
        rtune::Dataset data = rtune::load_dataset_csv(in, cfg.space);
        rtune::GbdtModel model = rtune::train(data, target_name, cfg.train);
        ensure_parent_dir(out);
        rtune::save_model(model, out);
        std::cout << "target " << model.target << ": selected depth " << model.max_depth
                  << ", validation MAE " << rtune::format_double(model.validation_mae) << ", wrote " << out
                  << "\n";
    });

    auto* build = app.add_subcommand("build-lut", "Distill the two models into a bit-packed lookup table");
    build->add_option("--config", config_path, "pipeline config JSON")->required()->check(CLI::ExistingFile);
    build->add_option("--phi", phi_path, "quality model JSON (default: paths.phi_model)");
    build->add_option("--psi", psi_path, "time model JSON (default: paths.psi_model)");
    build->add_option("--out", out_path, "output table (default: paths.lut)");
    build->callback([&]() {
        auto cfg = rtune::load_pipeline_config(config_path);
        rtune::LutBuildConfig bc;
        bc.space = cfg.space;
        bc.lods = cfg.lods;
        bc.grid = cfg.grid;
        bc.time_percentile = cfg.lut_time_percentile;
        bc.phi = rtune::load_model(pick(phi_path, cfg.paths.phi_model, cfg, "phi model"));
        bc.psi = rtune::load_model(pick(psi_path, cfg.paths.psi_model, cfg, "psi model"));
        rtune::LookupTable table = rtune::build_lut(bc);
        std::string out = pick(out_path, cfg.paths.lut, cfg, "lut output");
        ensure_parent_dir(out);
        rtune::save_lut(table, out);
        std::cout << table.cell_count() << " cells, " << table.packed.size() << "-byte payload ("
                  << static_cast<int>(table.bit_width) << " bits/entry), built in "
                  << rtune::format_double(table.build_seconds) << " s, wrote " << out << "\n";
    });

    auto* query_cmd = app.add_subcommand("query", "Look up the stored parameters for one hardware state");
    query_cmd->add_option("--lut", lut_path, "lookup table file")->required()->check(CLI::ExistingFile);
    query_cmd->add_option("--lod", lod, "LOD index")->required();
    query_cmd->add_option("--cpu", cpu_mhz, "observed CPU frequency, MHz")->required()->check(CLI::PositiveNumber);
    query_cmd->add_option("--gpu", gpu_mhz, "observed GPU frequency, MHz")->required()->check(CLI::PositiveNumber);
    query_cmd->callback([&]() {
        rtune::LookupTable table = rtune::load_lut(lut_path);
        rtune::QueryResult q = rtune::query(table, lod, cpu_mhz, gpu_mhz);
        std::cout << "cell lod=" << q.lod << " cpu_bin=" << q.cpu_bin << " ("
                  << table.cpu_bins_mhz[q.cpu_bin] << " MHz) gpu_bin=" << q.gpu_bin << " ("
                  << table.gpu_bins_mhz[q.gpu_bin] << " MHz) code=" << q.code << "\n";
        for (std::size_t d = 0; d < table.dimensions.size(); ++d) {
            const auto& dim = table.dimensions[d];
            std::cout << "  " << dim.name << " = " << rtune::format_double(dim.values[q.params.indices[d]])
                      << " (level " << q.params.indices[d] << ")\n";
        }
    });

    auto* bench = app.add_subcommand("bench", "Measure per-query latency on a lookup table");
    bench->add_option("--lut", lut_path, "lookup table file")->required()->check(CLI::ExistingFile);
    bench->add_option("--iters", iters, "iterations (default 1000000)")->check(CLI::PositiveNumber);
    bench->callback([&]() {
        rtune::LookupTable table = rtune::load_lut(lut_path);
        rtune::LatencyStats s = rtune::bench_query_latency(table, iters);
        std::printf(
            "queries=%zu min=%.0f ns median=%.0f ns p99=%.0f ns max=%.0f ns mean=%.1f ns"
            " (median %.6f ms)\n",
            s.iterations, s.min_ns, s.median_ns, s.p99_ns, s.max_ns, s.mean_ns, s.median_ns / 1e6);
    });

    auto* eval = app.add_subcommand("evaluate", "Run the configured scenario against the noiseless oracle");
    eval->add_option("--config", config_path, "pipeline config JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--lut", lut_path, "lookup table (default: paths.lut)");
    eval->add_option("--out", out_path, "report directory (default: paths.report_dir)");
    eval->callback([&]() {
        auto cfg = rtune::load_pipeline_config(config_path);
        rtune::LookupTable table = rtune::load_lut(pick(lut_path, cfg.paths.lut, cfg, "lut"));
        rtune::Scenario scenario = rtune::materialize_scenario(cfg);
        rtune::EvalReport report = rtune::evaluate(table, cfg.oracle, scenario);
        std::string dir = pick(out_path, cfg.paths.report_dir, cfg, "report directory");
        std::filesystem::create_directories(dir);
        rtune::save_frames_csv(report, (std::filesystem::path(dir) / "frames.csv").string());
        rtune::save_summary_csv(report, (std::filesystem::path(dir) / "summary.csv").string());
        std::cout << report.frames.size() << " frames: time reduction "
                  << rtune::format_double(report.time_reduction_pct) << "%, image error "
                  << rtune::format_double(report.image_error_pct) << "%, " << report.adaptivity_count
                  << " parameter changes, reports in " << dir << "\n";
    });

    auto* sweep = app.add_subcommand("sweep", "Fixed-frequency evaluations across a GPU frequency range");
    sweep->add_option("--config", config_path, "pipeline config JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--lut", lut_path, "lookup table (default: paths.lut)");
    sweep->add_option("--from", sweep_from, "first GPU frequency, MHz")->required()->check(CLI::PositiveNumber);
    sweep->add_option("--to", sweep_to, "last GPU frequency, MHz")->required()->check(CLI::PositiveNumber);
    sweep->add_option("--step", sweep_step, "step, MHz")->required()->check(CLI::PositiveNumber);
    sweep->add_option("--cpu", sweep_cpu, "fixed CPU frequency, MHz (default: oracle range midpoint)");
    sweep->add_option("--out", out_path, "output CSV (default: paths.report_dir/sweep.csv)");
    sweep->callback([&]() {
        auto cfg = rtune::load_pipeline_config(config_path);
        if (sweep_to < sweep_from) {
            throw rtune::ValidationError("sweep range is empty (--to below --from)");
        }
        rtune::LookupTable table = rtune::load_lut(pick(lut_path, cfg.paths.lut, cfg, "lut"));
        std::vector<double> freqs;
        for (double f = sweep_from; f <= sweep_to + 1e-9; f += sweep_step) {
            freqs.push_back(f);
        }
        const double cpu = sweep_cpu > 0.0 ? sweep_cpu : cfg.oracle.cpu_freq_range.midpoint();
        rtune::Scenario scenario = rtune::materialize_scenario(cfg);
        auto reports = rtune::sweep_gpu_frequency(table, cfg.oracle, freqs, scenario.lod_schedule, cpu);
        std::string out = out_path.empty()
                              ? (std::filesystem::path(cfg.resolve(cfg.paths.report_dir)) / "sweep.csv").string()
                              : out_path;
        ensure_parent_dir(out);
        rtune::save_sweep_csv(reports, freqs, out);
        std::cout << reports.size() << " frequencies swept (" << rtune::format_double(sweep_from) << ".."
                  << rtune::format_double(sweep_to) << " MHz step " << rtune::format_double(sweep_step)
                  << "), cpu " << rtune::format_double(cpu) << " MHz, wrote " << out << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const rtune::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
