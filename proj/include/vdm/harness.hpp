// Experiment orchestration: configuration, sensor waveform generation, the
// end-to-end pipeline, parameter sweeps, and report emission.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdm/codebook.hpp"
#include "vdm/modem.hpp"
#include "vdm/rng.hpp"
#include "vdm/rx.hpp"
#include "vdm/sample_series.hpp"
#include "vdm/tag_frontend.hpp"

namespace vdm {

enum class WaveformKind { Constant, Sine, PulseTrain, File };

struct SensorSpec {
    WaveformKind kind = WaveformKind::Sine;
    double amplitude = 1.0;  // volts; constant level for Constant kind
    double frequency = 1e3;  // Hz
    double phase = 0.0;      // radians
    double width = 0.0;      // seconds, pulse width for PulseTrain
    std::string path;        // CSV path for File kind
};

enum class TimingPath { Envelope, Passband };

struct ExperimentConfig {
    int n_sensors = 3;
    std::vector<SensorSpec> sensors;  // resized to n_sensors when shorter
    double f_env = 10e3;              // Hz
    double v_max = 3.3;               // volts
    double v_s = 3.3;                 // volts
    double sample_rate = 4e6;         // Hz
    double duration = 20e-3;          // seconds
    double epsilon = 0.0;             // seconds
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    TimingPath timing_path = TimingPath::Envelope;
    double two_tone_base = 0.0;  // Hz; passband path: f1 = base, f2 = base + f_env

    VdmConfig vdm;
    VcoModel vco;
    ChannelModel channel;
    SawtoothGeneratorModel sawtooth;
    std::optional<CztPlan> plan;  // derived from geometry when unset
    DecodeParams decode;
    bool harmonics = false;

    void validate() const;
    CztPlan effective_plan() const;
};

// Flat key=value config file; '#' starts a comment. CLI --set overrides use
// the same key paths.
ExperimentConfig parse_config(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_config_file(const std::string& path);
void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment);

SampleSeries gen_sensor_waveform(const SensorSpec& spec, double duration,
                                 double sample_rate, double v_max, Rng& rng);

struct RunReport {
    std::vector<double> sensor_snr_db;  // aligned, capped for serialization
    double mean_snr_db = 0.0;
    DecodeDiagnostics diagnostics;
    std::vector<std::string> warnings;
    std::string iq_path;
    std::string codebook_path;
    std::vector<std::string> sensor_csv_paths;
    std::string json_path;

    std::string to_json() const;
};

// tag frontend -> multiplexing -> modem -> channel -> receiver. Emits the IQ
// capture, the codebook table, per-sensor CSV traces, and a JSON report into
// cfg.out_dir. The decode runs on the storage-quantized capture so re-decoding
// the emitted file reproduces the in-memory result exactly.
RunReport run_once(const ExperimentConfig& cfg);

// Variant that also exposes the decode result (used by the demos and tests).
RunReport run_once(const ExperimentConfig& cfg, DecodeResult* decode_out);

struct SweepSpec {
    std::string parameter;       // config key path
    std::vector<double> values;
    int repetitions = 1;
};

// One detail row per (value, repetition) and one aggregate row per value.
// Repetition r runs with seed cfg.seed + r. Returns the CSV path.
std::string run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep,
                      bool emit_svg = false);

// Offline decode of a VDMIQ1 file; writes JSON and per-sensor CSVs next to
// out_dir. The plan is rescaled when the file's sample rate differs from the
// configured one.
DecodeResult decode_file(const std::string& iq_path, const ExperimentConfig& cfg);

struct PhaseAlignmentReport {
    double configured_offset_s = 0.0;
    double measured_offset_s = 0.0;
    double error_s = 0.0;
    double resolution_s = 0.0;  // one reconstructed sample

    std::string to_json() const;
};

// Feeds the same tone to >= 2 channels with a configured inter-channel time
// offset and measures the recovered delay from the reconstructed series.
PhaseAlignmentReport demo_phase_alignment(const ExperimentConfig& cfg,
                                          double offset_seconds);

} // namespace vdm
