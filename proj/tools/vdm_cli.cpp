// Command-line front end: run, sweep, decode, codebook, demo-sync.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vdm/errors.hpp"
#include "vdm/harness.hpp"
#include "vdm/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDecode = 2;
constexpr int kExitIo = 3;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
};

vdm::ExperimentConfig load_config(const CommonOpts& opts) {
    std::map<std::string, std::string> kv;
    if (!opts.config_path.empty()) kv = vdm::read_config_file(opts.config_path);
    for (const auto& assignment : opts.overrides) vdm::apply_override(kv, assignment);
    vdm::ExperimentConfig cfg = vdm::parse_config(kv);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--set", opts.overrides, "override a config key, key=value");
    cmd->add_option("--seed", opts.seed, "random seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--out", opts.out_dir, "output directory");
}

std::vector<double> parse_values(const std::string& list) {
    std::vector<double> values;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        values.push_back(std::stod(tok));
    }
    return values;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-sensor backscatter PWM multiplexing simulator"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    CLI::App* run = app.add_subcommand("run", "single end-to-end experiment");
    add_common(run, run_opts);

    CommonOpts sweep_opts;
    std::string sweep_param, sweep_values;
    int sweep_reps = 1;
    bool emit_svg = false;
    CLI::App* sweep = app.add_subcommand("sweep", "sweep one parameter");
    add_common(sweep, sweep_opts);
    sweep->add_option("--param", sweep_param, "config key to sweep")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep->add_option("--reps", sweep_reps, "repetitions per value");
    sweep->add_flag("--emit-svg", emit_svg, "write an aggregate SNR plot");

    CommonOpts decode_opts;
    std::string iq_path;
    CLI::App* decode = app.add_subcommand("decode", "decode a capture file");
    add_common(decode, decode_opts);
    decode->add_option("--iq", iq_path, "VDMIQ1 capture file")->required();

    CommonOpts cb_opts;
    CLI::App* codebook = app.add_subcommand("codebook", "emit the level table");
    add_common(codebook, cb_opts);

    CommonOpts sync_opts;
    double sync_offset = 0.0;
    CLI::App* demo_sync = app.add_subcommand("demo-sync", "inter-channel delay recovery");
    add_common(demo_sync, sync_opts);
    demo_sync->add_option("--offset", sync_offset, "inter-channel delay, seconds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const vdm::ExperimentConfig cfg = load_config(run_opts);
            const vdm::RunReport report = vdm::run_once(cfg);
            std::cout << report.to_json() << "\n";
            return report.diagnostics.periods_total == 0 ? kExitDecode : kExitOk;
        }
        if (*sweep) {
            vdm::ExperimentConfig cfg = load_config(sweep_opts);
            vdm::SweepSpec spec;
            spec.parameter = sweep_param;
            spec.values = parse_values(sweep_values);
            spec.repetitions = sweep_reps;
            const std::string csv = vdm::run_sweep(cfg, spec, emit_svg);
            std::cout << csv << "\n";
            return kExitOk;
        }
        if (*decode) {
            const vdm::ExperimentConfig cfg = load_config(decode_opts);
            const vdm::DecodeResult result = vdm::decode_file(iq_path, cfg);
            std::cout << result.to_json() << "\n";
            return kExitOk;
        }
        if (*codebook) {
            const vdm::ExperimentConfig cfg = load_config(cb_opts);
            vdm::VdmConfig vc = cfg.vdm;
            vc.n_sensors = cfg.n_sensors;
            vc.v_s = cfg.v_s;
            const vdm::VdmCodebook book(vc, cfg.vco);
            std::filesystem::create_directories(cfg.out_dir);
            const std::string path =
                (std::filesystem::path(cfg.out_dir) / "codebook.csv").string();
            book.write_csv(path);
            std::ifstream is(path);
            std::cout << is.rdbuf();
            return kExitOk;
        }
        if (*demo_sync) {
            const vdm::ExperimentConfig cfg = load_config(sync_opts);
            const vdm::PhaseAlignmentReport report =
                vdm::demo_phase_alignment(cfg, sync_offset);
            std::cout << report.to_json() << "\n";
            return kExitOk;
        }
    } catch (const vdm::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const vdm::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const vdm::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const vdm::SyncFailureError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDecode;
    } catch (const vdm::InsufficientSignalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDecode;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDecode;
    }
    return kExitOk;
}
