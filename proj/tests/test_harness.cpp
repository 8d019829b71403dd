#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "doctest.h"
#include "vdm/harness.hpp"
#include "vdm/io.hpp"

using namespace vdm;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "vdm_test_harness" / leaf;
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
}

ExperimentConfig small_config(const std::string& out_leaf) {
    ExperimentConfig cfg;
    cfg.duration = 5e-3;
    cfg.out_dir = temp_dir(out_leaf).string();
    return cfg;
}
} // namespace

TEST_CASE("config parsing covers nested keys and overrides") {
    std::map<std::string, std::string> kv{
        {"n_sensors", "2"},
        {"f_env", "20e3"},
        {"duration", "4e-3"},
        {"sensor.1.kind", "constant"},
        {"sensor.1.amplitude", "1.25"},
        {"sensor.2.kind", "sine"},
        {"sensor.2.frequency", "1500"},
        {"channel.snr_db", "25"},
        {"seed", "77"},
    };
    apply_override(kv, "f_env=15e3");
    const ExperimentConfig cfg = parse_config(kv);
    CHECK(cfg.n_sensors == 2);
    CHECK(cfg.f_env == 15e3);
    CHECK(cfg.seed == 77);
    REQUIRE(cfg.sensors.size() == 2);
    CHECK(cfg.sensors[0].kind == WaveformKind::Constant);
    CHECK(cfg.sensors[0].amplitude == 1.25);
    CHECK(cfg.sensors[1].kind == WaveformKind::Sine);
    CHECK(cfg.sensors[1].frequency == 1500.0);
    CHECK(cfg.channel.noise_snr_db == 25.0);

    std::map<std::string, std::string> bad{{"no_such_key", "1"}};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    std::map<std::string, std::string> out_of_range{{"n_sensors", "9"}};
    CHECK_THROWS_AS(parse_config(out_of_range), ConfigError);
}

TEST_CASE("config files accept comments and blank lines") {
    const fs::path path = temp_dir("cfg") / "exp.cfg";
    std::ofstream(path) << "# experiment\n\nn_sensors=3\nf_env=10e3\n";
    const auto kv = read_config_file(path.string());
    CHECK(kv.at("n_sensors") == "3");
    CHECK(kv.at("f_env") == "10e3");
    CHECK_THROWS_AS(read_config_file((temp_dir("cfg") / "nope.cfg").string()), IoError);
}

TEST_CASE("sensor waveform generators honor their spec") {
    Rng rng(1);
    SensorSpec spec;
    spec.kind = WaveformKind::Constant;
    spec.amplitude = 2.5;
    const SampleSeries c = gen_sensor_waveform(spec, 1e-3, 1e6, 3.3, rng);
    CHECK(c.size() == 1000);
    CHECK(c.samples.minCoeff() == 2.5);
    CHECK(c.samples.maxCoeff() == 2.5);

    spec.kind = WaveformKind::Sine;
    spec.amplitude = 1.0;
    spec.frequency = 2e3;
    spec.phase = 0.5;
    const SampleSeries s = gen_sensor_waveform(spec, 1e-3, 1e6, 3.3, rng);
    CHECK(s.samples[0] ==
          doctest::Approx(3.3 / 2.0 + std::sin(0.5)).epsilon(1e-12));
    CHECK(s.samples.maxCoeff() <= 3.3 / 2.0 + 1.0 + 1e-9);
    CHECK(s.samples.minCoeff() >= 3.3 / 2.0 - 1.0 - 1e-9);

    spec.kind = WaveformKind::PulseTrain;
    spec.amplitude = 3.0;
    spec.frequency = 1e3;
    spec.phase = 0.0;
    spec.width = 0.2e-3;
    const SampleSeries p = gen_sensor_waveform(spec, 2e-3, 1e6, 3.3, rng);
    CHECK(p.samples[0] == 3.0);
    CHECK(p.samples[150] == 3.0);
    CHECK(p.samples[500] == 0.0);
    CHECK(p.samples[1100] == 3.0);
}

TEST_CASE("run_once emits the advertised artifacts and decodes well") {
    ExperimentConfig cfg = small_config("run");
    const RunReport report = run_once(cfg);
    CHECK(fs::exists(report.iq_path));
    CHECK(fs::exists(report.codebook_path));
    CHECK(fs::exists(report.json_path));
    REQUIRE(report.sensor_csv_paths.size() == 3);
    for (const auto& p : report.sensor_csv_paths) CHECK(fs::exists(p));
    REQUIRE(report.sensor_snr_db.size() == 3);
    // Noiseless default channel: reconstruction is clean.
    for (double snr : report.sensor_snr_db) CHECK(snr > 20.0);
    CHECK(report.diagnostics.periods_total > 0);
}

TEST_CASE("identical configuration and seed reproduce byte-identical outputs") {
    ExperimentConfig cfg = small_config("det_a");
    cfg.channel.noise_snr_db = 20.0;
    const RunReport a = run_once(cfg);
    cfg.out_dir = temp_dir("det_b").string();
    const RunReport b = run_once(cfg);
    CHECK(slurp(a.iq_path) == slurp(b.iq_path));
    for (std::size_t i = 0; i < a.sensor_csv_paths.size(); ++i)
        CHECK(slurp(a.sensor_csv_paths[i]) == slurp(b.sensor_csv_paths[i]));
    CHECK(a.mean_snr_db == b.mean_snr_db);

    cfg.seed = cfg.seed + 1;
    cfg.out_dir = temp_dir("det_c").string();
    const RunReport c = run_once(cfg);
    CHECK(slurp(a.iq_path) != slurp(c.iq_path));
}

TEST_CASE("decode_file reproduces the in-memory decode exactly") {
    ExperimentConfig cfg = small_config("decfile");
    cfg.channel.noise_snr_db = 25.0;
    DecodeResult live;
    const RunReport report = run_once(cfg, &live);
    (void)report;

    cfg.out_dir = temp_dir("decfile_out").string();
    const DecodeResult from_file = decode_file(report.iq_path, cfg);
    REQUIRE(from_file.periods.size() == live.periods.size());
    REQUIRE(from_file.duty_samples.rows() == live.duty_samples.rows());
    CHECK((from_file.duty_samples - live.duty_samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK((from_file.voltages - live.voltages).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t p = 0; p < live.periods.size(); ++p) {
        CHECK(from_file.periods[p].start == live.periods[p].start);
        CHECK(from_file.periods[p].chain == live.periods[p].chain);
    }
}

TEST_CASE("sweep writes one detail row per repetition and aggregates") {
    ExperimentConfig cfg = small_config("sweep");
    SweepSpec sweep;
    sweep.parameter = "channel.snr_db";
    sweep.values = {30.0, 15.0};
    sweep.repetitions = 2;
    const std::string csv = run_sweep(cfg, sweep);
    CHECK(fs::exists(csv));
    const std::string text = slurp(csv);
    int rows = 0;
    for (char ch : text)
        if (ch == '\n') ++rows;
    // Header + 2 values x 2 reps detail + 2 aggregate rows.
    CHECK(rows == 1 + 4 + 2);
    CHECK(text.find("channel.snr_db") != std::string::npos);
}

TEST_CASE("identical inputs stay sample aligned through the demo") {
    ExperimentConfig cfg = small_config("sync");
    const PhaseAlignmentReport rep = demo_phase_alignment(cfg, 0.0);
    CHECK(std::abs(rep.measured_offset_s) <= rep.resolution_s);
    CHECK(std::abs(rep.error_s) <= rep.resolution_s);
}

TEST_CASE("validate rejects inconsistent experiments") {
    ExperimentConfig cfg;
    cfg.n_sensors = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.duration = 1e-5; // under three reference periods
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.sensors.resize(1);
    cfg.sensors[0].amplitude = 10.0; // beyond v_max
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
