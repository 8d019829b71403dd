#include "vdm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "vdm/io.hpp"
#include "vdm/metrics.hpp"

namespace vdm {

namespace fs = std::filesystem;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has non-numeric value '" + value + "'");
    }
}

int sensor_index_of_key(const std::string& key) {
    // sensor.<i>.<field>
    const auto dot1 = key.find('.');
    const auto dot2 = key.find('.', dot1 + 1);
    if (dot2 == std::string::npos)
        throw ConfigError("config: malformed sensor key '" + key + "'");
    const int idx = std::stoi(key.substr(dot1 + 1, dot2 - dot1 - 1));
    if (idx < 1 || idx > 8)
        throw ConfigError("config: sensor index out of range in '" + key + "'");
    return idx;
}
} // namespace

void ExperimentConfig::validate() const {
    if (n_sensors < 1 || n_sensors > 8)
        throw ConfigError("config: n_sensors must be in 1..8");
    if (f_env <= 0.0) throw ConfigError("config: f_env must be positive");
    if (v_max <= 0.0) throw ConfigError("config: v_max must be positive");
    if (v_s <= 0.0) throw ConfigError("config: v_s must be positive");
    if (sample_rate <= 0.0) throw ConfigError("config: sample_rate must be positive");
    if (duration < 3.0 / f_env)
        throw ConfigError("config: duration must cover at least 3 reference periods");
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        if (sensors[i].amplitude > v_max)
            throw ConfigError("config: sensor." + std::to_string(i + 1) +
                              ".amplitude exceeds v_max");
    }
    vdm.validate();
    vco.validate();
}

CztPlan ExperimentConfig::effective_plan() const {
    if (plan) return *plan;
    VdmConfig vc = vdm;
    vc.n_sensors = n_sensors;
    vc.v_s = v_s;
    const VdmCodebook book(vc, vco);
    return auto_plan(sample_rate, f_env, book);
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at line " + std::to_string(line_no) +
                              " of " + path);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    kv[assignment.substr(0, eq)] = assignment.substr(eq + 1);
}

ExperimentConfig parse_config(const std::map<std::string, std::string>& kv) {
    ExperimentConfig cfg;
    auto sensor_at = [&cfg](int idx) -> SensorSpec& {
        if (static_cast<int>(cfg.sensors.size()) < idx) cfg.sensors.resize(idx);
        return cfg.sensors[static_cast<std::size_t>(idx - 1)];
    };

    for (const auto& [key, value] : kv) {
        if (key == "n_sensors") cfg.n_sensors = static_cast<int>(to_double(key, value));
        else if (key == "f_env") cfg.f_env = to_double(key, value);
        else if (key == "v_max") cfg.v_max = to_double(key, value);
        else if (key == "v_s") cfg.v_s = to_double(key, value);
        else if (key == "sample_rate") cfg.sample_rate = to_double(key, value);
        else if (key == "duration") cfg.duration = to_double(key, value);
        else if (key == "epsilon") cfg.epsilon = to_double(key, value);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_double(key, value));
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "harmonics") cfg.harmonics = to_double(key, value) != 0.0;
        else if (key == "timing.path") {
            if (value == "envelope") cfg.timing_path = TimingPath::Envelope;
            else if (value == "passband") cfg.timing_path = TimingPath::Passband;
            else throw ConfigError("config: timing.path must be envelope or passband");
        } else if (key == "timing.two_tone_base") cfg.two_tone_base = to_double(key, value);
        else if (key.rfind("sensor.", 0) == 0) {
            SensorSpec& s = sensor_at(sensor_index_of_key(key));
            const std::string field = key.substr(key.find('.', 7) + 1);
            if (field == "kind") {
                if (value == "constant") s.kind = WaveformKind::Constant;
                else if (value == "sine") s.kind = WaveformKind::Sine;
                else if (value == "pulse-train") s.kind = WaveformKind::PulseTrain;
                else if (value == "file") s.kind = WaveformKind::File;
                else throw ConfigError("config: unknown waveform kind '" + value + "'");
            } else if (field == "amplitude") s.amplitude = to_double(key, value);
            else if (field == "frequency") s.frequency = to_double(key, value);
            else if (field == "phase") s.phase = to_double(key, value);
            else if (field == "width") s.width = to_double(key, value);
            else if (field == "path") s.path = value;
            else throw ConfigError("config: unknown sensor field '" + key + "'");
        } else if (key == "vdm.v_target_max") cfg.vdm.v_target_max = to_double(key, value);
        else if (key == "vdm.r_f") cfg.vdm.r_f = to_double(key, value);
        else if (key == "vco.f_at_zero") cfg.vco.f_at_zero = to_double(key, value);
        else if (key == "vco.f_at_vset") cfg.vco.f_at_vset = to_double(key, value);
        else if (key == "vco.v_set") cfg.vco.v_set = to_double(key, value);
        else if (key == "vco.n_div") cfg.vco.n_div = to_double(key, value);
        else if (key == "vco.f_min_abs") cfg.vco.f_min_abs = to_double(key, value);
        else if (key == "vco.f_max_abs") cfg.vco.f_max_abs = to_double(key, value);
        else if (key == "channel.gain_re") cfg.channel.gain.real(to_double(key, value));
        else if (key == "channel.gain_im") cfg.channel.gain.imag(to_double(key, value));
        else if (key == "channel.snr_db") cfg.channel.noise_snr_db = to_double(key, value);
        else if (key == "channel.dc_re") cfg.channel.dc_leak.real(to_double(key, value));
        else if (key == "channel.dc_im") cfg.channel.dc_leak.imag(to_double(key, value));
        else if (key == "channel.cfo_hz") cfg.channel.cfo_hz = to_double(key, value);
        else if (key == "channel.seed")
            cfg.channel.seed = static_cast<std::uint64_t>(to_double(key, value));
        else if (key == "sawtooth.v_sup") cfg.sawtooth.v_sup = to_double(key, value);
        else if (key == "sawtooth.v_z") cfg.sawtooth.v_z = to_double(key, value);
        else if (key == "sawtooth.v_be") cfg.sawtooth.v_be = to_double(key, value);
        else if (key == "sawtooth.c") cfg.sawtooth.c = to_double(key, value);
        else if (key.rfind("czt.", 0) == 0) {
            if (!cfg.plan) cfg.plan = CztPlan{};
            const std::string field = key.substr(4);
            if (field == "window") cfg.plan->window_len = static_cast<Index>(to_double(key, value));
            else if (field == "bins") cfg.plan->bins = static_cast<int>(to_double(key, value));
            else if (field == "hop") cfg.plan->hop = static_cast<Index>(to_double(key, value));
            else if (field == "f_start") cfg.plan->f_start = to_double(key, value);
            else if (field == "f_end") cfg.plan->f_end = to_double(key, value);
            else if (field == "taper") {
                if (value == "rect") cfg.plan->taper = Taper::Rect;
                else if (value == "hann") cfg.plan->taper = Taper::Hann;
                else throw ConfigError("config: czt.taper must be rect or hann");
            } else throw ConfigError("config: unknown key '" + key + "'");
        } else if (key == "decode.peak_frac") cfg.decode.peak_frac = to_double(key, value);
        else if (key == "decode.grad_frac") cfg.decode.grad_frac = to_double(key, value);
        else if (key == "decode.min_drop_frac") cfg.decode.min_drop_frac = to_double(key, value);
        else if (key == "decode.floor_frac") cfg.decode.floor_frac = to_double(key, value);
        else if (key == "decode.avg_frames")
            cfg.decode.avg_frames = static_cast<int>(to_double(key, value));
        else throw ConfigError("config: unknown key '" + key + "'");
    }

    cfg.vdm.n_sensors = cfg.n_sensors;
    cfg.vdm.v_s = cfg.v_s;
    cfg.sensors.resize(static_cast<std::size_t>(cfg.n_sensors));
    cfg.validate();
    return cfg;
}

SampleSeries gen_sensor_waveform(const SensorSpec& spec, double duration,
                                 double sample_rate, double v_max, Rng& rng) {
    const auto n = static_cast<Index>(std::llround(duration * sample_rate));
    Eigen::ArrayXd out(n);
    switch (spec.kind) {
        case WaveformKind::Constant:
            out.setConstant(spec.amplitude);
            break;
        case WaveformKind::Sine: {
            // Offset to midscale so the waveform stays inside [0, v_max].
            const double mid = v_max / 2.0;
            for (Index i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / sample_rate;
                out[i] = mid + spec.amplitude *
                                   std::sin(kTwoPi * spec.frequency * t + spec.phase);
            }
            break;
        }
        case WaveformKind::PulseTrain: {
            const double width = spec.width > 0.0 ? spec.width : 0.1 / spec.frequency;
            const double period = 1.0 / spec.frequency;
            const double phase_t = spec.phase / (kTwoPi * spec.frequency);
            for (Index i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / sample_rate + phase_t;
                const double in_period = t - std::floor(t / period) * period;
                out[i] = in_period < width ? spec.amplitude : 0.0;
            }
            break;
        }
        case WaveformKind::File: {
            const SampleSeries raw = read_series_csv(spec.path, sample_rate);
            const SampleSeries held = resample_hold(raw, sample_rate);
            for (Index i = 0; i < n; ++i)
                out[i] = held.samples[std::min<Index>(i, held.size() - 1)];
            break;
        }
    }
    (void)rng;
    return SampleSeries(std::move(out), sample_rate);
}

namespace {

struct PipelineOutput {
    IqCapture capture;            // storage-quantized received baseband
    std::vector<SampleSeries> sensor_inputs;
    VdmCodebook book;
    CztPlan plan;
    std::vector<std::string> warnings;
};

PipelineOutput run_tag_and_channel(const ExperimentConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    std::vector<SampleSeries> sensors;
    double max_sensor_freq = 0.0;
    for (int i = 0; i < cfg.n_sensors; ++i) {
        // Configs built in code may specify fewer sensors than n_sensors;
        // missing entries get the default waveform.
        const SensorSpec spec = static_cast<std::size_t>(i) < cfg.sensors.size()
                                    ? cfg.sensors[static_cast<std::size_t>(i)]
                                    : SensorSpec{};
        sensors.push_back(
            gen_sensor_waveform(spec, cfg.duration, cfg.sample_rate, cfg.v_max, rng));
        if (spec.kind == WaveformKind::Sine || spec.kind == WaveformKind::PulseTrain)
            max_sensor_freq = std::max(max_sensor_freq, spec.frequency);
    }

    std::vector<std::string> warnings;
    if (cfg.f_env < 2.0 * max_sensor_freq)
        warnings.push_back("reference frequency below twice the fastest sensor input; "
                           "expect aliasing in the reconstruction");

    // Timing chain: envelope -> square -> pulses -> sawtooth.
    SampleSeries env;
    if (cfg.timing_path == TimingPath::Passband) {
        TwoToneConfig tt;
        tt.amplitude = 1.0;
        tt.f1 = cfg.two_tone_base > 0.0 ? cfg.two_tone_base : 20.0 * cfg.f_env;
        tt.f2 = tt.f1 + cfg.f_env;
        tt.alpha1 = 1.0;
        tt.alpha2 = 0.6;
        const SampleSeries r = synth_two_tone(tt, cfg.duration, cfg.sample_rate);
        const double cutoff = std::min(4.0 * cfg.f_env, 1.8 * tt.f1);
        env = envelope_detect(r, cutoff);
    } else {
        TwoToneConfig tt;
        tt.amplitude = 1.0;
        tt.f1 = cfg.f_env;
        tt.f2 = 2.0 * cfg.f_env;
        tt.alpha1 = 1.0;
        tt.alpha2 = 0.6;
        env = envelope_closed_form(tt, cfg.duration, cfg.sample_rate);
    }
    const SampleSeries square = square_from_envelope(env, cfg.v_s);
    const TimingReference timing = reset_pulses(square);

    SawtoothGeneratorModel saw = cfg.sawtooth;
    saw.v_max = cfg.v_max;
    saw.r_set = required_rset(saw, cfg.f_env);
    const SampleSeries sawtooth = sawtooth_from_pulses(timing, saw, cfg.sample_rate);

    std::vector<SampleSeries> trimmed;
    for (auto& s : sensors) trimmed.push_back(s.slice(0, sawtooth.size()));
    const std::vector<PwmStream> pwms =
        pwm_encode(trimmed, sawtooth, cfg.v_s, cfg.epsilon);

    VdmConfig vc = cfg.vdm;
    vc.n_sensors = cfg.n_sensors;
    vc.v_s = cfg.v_s;
    VdmCodebook book(vc, cfg.vco);
    const SampleSeries summed = sum_streams(pwms, book);

    const IqCapture clean = modulate(summed, cfg.vco, cfg.harmonics);
    ChannelModel ch = cfg.channel;
    if (ch.seed == 0) ch.seed = cfg.seed * 0x9E3779B97F4A7C15ull + 1ull;
    IqCapture received = apply_channel(clean, ch);

    CztPlan plan = cfg.plan ? *cfg.plan : auto_plan(cfg.sample_rate, cfg.f_env, book);

    return PipelineOutput{quantize_to_storage(received), std::move(sensors),
                          std::move(book), plan, std::move(warnings)};
}

// Reference series matching a decoded per-period trace. The comparator
// samples a sensor at the instant its stream falls, so each period's
// reference value is the input at period start plus that sensor's decoded
// high time, not at a uniform grid point.
SampleSeries reference_at_decoded_times(const SampleSeries& input,
                                        const SampleSeries& decoded,
                                        const DecodeResult& result, int sensor) {
    Eigen::ArrayXd out(decoded.size());
    for (Index k = 0; k < decoded.size(); ++k) {
        double t = decoded.t0 + static_cast<double>(k) / decoded.sample_rate;
        if (k < static_cast<Index>(result.periods.size()) &&
            result.periods[static_cast<std::size_t>(k)].ok) {
            const double start =
                static_cast<double>(result.periods[static_cast<std::size_t>(k)].start);
            t = (start + result.duty_samples(k, sensor)) / input.sample_rate;
        }
        Index idx = static_cast<Index>(std::llround(t * input.sample_rate));
        idx = std::clamp<Index>(idx, 0, input.size() - 1);
        out[k] = input.samples[idx];
    }
    return SampleSeries(std::move(out), decoded.sample_rate, decoded.t0);
}

double sensor_snr(const SampleSeries& input, const SampleSeries& decoded,
                  const DecodeResult& result, int sensor) {
    const SampleSeries ref = reference_at_decoded_times(input, decoded, result, sensor);
    try {
        return aligned_snr_db(ref, decoded, std::min<Index>(3, decoded.size() - 1));
    } catch (const AlignmentError&) {
        // constant inputs: no alignment needed, score the deviation directly
        return snr_db(ref, decoded);
    }
}

} // namespace

RunReport run_once(const ExperimentConfig& cfg) { return run_once(cfg, nullptr); }

RunReport run_once(const ExperimentConfig& cfg, DecodeResult* decode_out) {
    PipelineOutput pipe = run_tag_and_channel(cfg);

    fs::create_directories(cfg.out_dir);
    RunReport report;
    report.warnings = pipe.warnings;
    report.iq_path = (fs::path(cfg.out_dir) / "capture.iq").string();
    write_iq(report.iq_path, pipe.capture);
    report.codebook_path = (fs::path(cfg.out_dir) / "codebook.csv").string();
    pipe.book.write_csv(report.codebook_path);

    DecodeResult result = demultiplex(pipe.capture, pipe.book, pipe.plan, cfg.f_env,
                                      cfg.v_max, cfg.epsilon, cfg.decode);
    report.diagnostics = result.diagnostics;

    double snr_sum = 0.0;
    for (int i = 0; i < cfg.n_sensors; ++i) {
        double snr;
        try {
            snr = capped_snr_db(
                sensor_snr(pipe.sensor_inputs[static_cast<std::size_t>(i)],
                           result.sensor_series[static_cast<std::size_t>(i)], result, i));
        } catch (const UndefinedMetricError&) {
            snr = capped_snr_db(std::numeric_limits<double>::infinity());
            report.warnings.push_back("sensor " + std::to_string(i + 1) +
                                      ": all-zero reference; SNR undefined");
        }
        report.sensor_snr_db.push_back(snr);
        snr_sum += snr;

        const std::string csv =
            (fs::path(cfg.out_dir) / ("sensor_" + std::to_string(i + 1) + ".csv")).string();
        write_series_csv(csv, result.sensor_series[static_cast<std::size_t>(i)]);
        report.sensor_csv_paths.push_back(csv);
    }
    report.mean_snr_db = snr_sum / static_cast<double>(cfg.n_sensors);

    report.json_path = (fs::path(cfg.out_dir) / "report.json").string();
    {
        std::ofstream os(report.json_path);
        os << report.to_json() << "\n";
    }
    {
        std::ofstream os(fs::path(cfg.out_dir) / "decode.json");
        os << result.to_json() << "\n";
    }
    if (decode_out) *decode_out = std::move(result);
    return report;
}

std::string RunReport::to_json() const {
    nlohmann::json j;
    j["sensor_snr_db"] = sensor_snr_db;
    j["mean_snr_db"] = mean_snr_db;
    j["warnings"] = warnings;
    j["diagnostics"] = {{"periods_total", diagnostics.periods_total},
                        {"periods_discarded", diagnostics.periods_discarded},
                        {"ambiguous_transitions", diagnostics.ambiguous_transitions},
                        {"mean_period_samples", diagnostics.mean_period_samples},
                        {"timing_quantum", diagnostics.timing_quantum},
                        {"warnings", diagnostics.warnings}};
    j["artifacts"] = {{"iq", iq_path},
                      {"codebook", codebook_path},
                      {"sensor_csv", sensor_csv_paths},
                      {"report", json_path}};
    return j.dump(2);
}

namespace {

void set_swept_value(ExperimentConfig& cfg, const std::string& key, double value) {
    if (key == "f_env") cfg.f_env = value;
    else if (key == "n_sensors") {
        cfg.n_sensors = static_cast<int>(value);
        cfg.vdm.n_sensors = cfg.n_sensors;
        cfg.sensors.resize(static_cast<std::size_t>(cfg.n_sensors));
    } else if (key == "sample_rate") cfg.sample_rate = value;
    else if (key == "duration") cfg.duration = value;
    else if (key == "epsilon") cfg.epsilon = value;
    else if (key == "channel.snr_db") cfg.channel.noise_snr_db = value;
    else if (key == "channel.cfo_hz") cfg.channel.cfo_hz = value;
    else if (key == "sensor.all.frequency") {
        for (auto& s : cfg.sensors) s.frequency = value;
    } else if (key == "sensor.all.amplitude") {
        for (auto& s : cfg.sensors) s.amplitude = value;
    } else
        throw ConfigError("sweep: parameter '" + key + "' is not sweepable");
}

void write_sweep_svg(const std::string& path, const std::string& param,
                     const std::vector<double>& xs, const std::vector<double>& ys) {
    const double w = 640, h = 400, ml = 60, mr = 20, mt = 20, mb = 50;
    double x_lo = *std::min_element(xs.begin(), xs.end());
    double x_hi = *std::max_element(xs.begin(), xs.end());
    double y_lo = *std::min_element(ys.begin(), ys.end());
    double y_hi = *std::max_element(ys.begin(), ys.end());
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb); };

    std::ofstream os(path);
    if (!os) throw IoError("sweep: cannot open " + path);
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
       << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    os << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='"
       << h - mb << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
       << "' stroke='black'/>\n";
    os << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
    for (std::size_t i = 0; i < xs.size(); ++i) os << px(xs[i]) << "," << py(ys[i]) << " ";
    os << "'/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << "<circle cx='" << px(xs[i]) << "' cy='" << py(ys[i])
           << "' r='3' fill='steelblue'/>\n";
    os << "<text x='" << (w / 2) << "' y='" << h - 12 << "' text-anchor='middle'>" << param
       << "</text>\n";
    os << "<text x='16' y='" << (h / 2)
       << "' transform='rotate(-90 16 " << (h / 2) << ")' text-anchor='middle'>mean SNR (dB)"
       << "</text>\n</svg>\n";
}

} // namespace

std::string run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep, bool emit_svg) {
    if (sweep.values.empty()) throw ConfigError("sweep: need at least one value");
    if (sweep.repetitions < 1) throw ConfigError("sweep: repetitions must be >= 1");

    fs::create_directories(cfg.out_dir);
    const std::string csv_path =
        (fs::path(cfg.out_dir) / ("sweep_" + sweep.parameter + ".csv")).string();
    std::ofstream os(csv_path);
    if (!os) throw IoError("sweep: cannot open " + csv_path);
    os.precision(12);
    os << "parameter,value,rep,seed,sensor_snrs_db,mean_snr_db,decode_failures\n";

    std::vector<double> agg_x, agg_y;
    for (std::size_t vi = 0; vi < sweep.values.size(); ++vi) {
        const double value = sweep.values[vi];
        double value_sum = 0.0;
        for (int rep = 0; rep < sweep.repetitions; ++rep) {
            ExperimentConfig run_cfg = cfg;
            set_swept_value(run_cfg, sweep.parameter, value);
            run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(rep);
            run_cfg.channel.seed = 0; // derive from the per-rep seed
            run_cfg.out_dir =
                (fs::path(cfg.out_dir) /
                 ("sweep_" + sweep.parameter + "_" + std::to_string(vi) + "_" +
                  std::to_string(rep)))
                    .string();
            const RunReport report = run_once(run_cfg);

            os << sweep.parameter << "," << value << "," << rep << "," << run_cfg.seed << ",";
            for (std::size_t i = 0; i < report.sensor_snr_db.size(); ++i)
                os << (i ? "|" : "") << report.sensor_snr_db[i];
            os << "," << report.mean_snr_db << ","
               << report.diagnostics.periods_discarded << "\n";
            value_sum += report.mean_snr_db;
        }
        const double agg = value_sum / sweep.repetitions;
        os << sweep.parameter << "," << value << ",agg,," << "" << "," << agg << ",\n";
        agg_x.push_back(value);
        agg_y.push_back(agg);
    }
    os.flush();

    if (emit_svg) {
        write_sweep_svg(
            (fs::path(cfg.out_dir) / ("sweep_" + sweep.parameter + ".svg")).string(),
            sweep.parameter, agg_x, agg_y);
    }
    return csv_path;
}

DecodeResult decode_file(const std::string& iq_path, const ExperimentConfig& cfg) {
    const IqCapture capture = read_iq(iq_path);

    VdmConfig vc = cfg.vdm;
    vc.n_sensors = cfg.n_sensors;
    vc.v_s = cfg.v_s;
    const VdmCodebook book(vc, cfg.vco);

    CztPlan plan = cfg.plan ? *cfg.plan : auto_plan(cfg.sample_rate, cfg.f_env, book);
    if (capture.sample_rate != cfg.sample_rate) {
        std::cerr << "decode_file: capture sample rate " << capture.sample_rate
                  << " Hz differs from configured " << cfg.sample_rate
                  << " Hz; re-deriving the analysis plan\n";
        plan = auto_plan(capture.sample_rate, cfg.f_env, book);
    }

    DecodeResult result = demultiplex(capture, book, plan, cfg.f_env, cfg.v_max,
                                      cfg.epsilon, cfg.decode);

    fs::create_directories(cfg.out_dir);
    {
        std::ofstream os(fs::path(cfg.out_dir) / "decode.json");
        os << result.to_json() << "\n";
    }
    for (std::size_t i = 0; i < result.sensor_series.size(); ++i)
        write_series_csv(
            (fs::path(cfg.out_dir) / ("sensor_" + std::to_string(i + 1) + ".csv")).string(),
            result.sensor_series[i]);
    return result;
}

PhaseAlignmentReport demo_phase_alignment(const ExperimentConfig& cfg,
                                          double offset_seconds) {
    if (cfg.n_sensors < 2)
        throw ConfigError("demo-sync: need at least 2 channels with the same tone");

    ExperimentConfig run_cfg = cfg;
    run_cfg.sensors.resize(static_cast<std::size_t>(run_cfg.n_sensors));
    const SensorSpec base = cfg.sensors.empty() ? SensorSpec{} : cfg.sensors.front();
    for (int i = 0; i < run_cfg.n_sensors; ++i) {
        SensorSpec& s = run_cfg.sensors[static_cast<std::size_t>(i)];
        s.kind = WaveformKind::Sine;
        s.frequency = base.frequency;
        s.amplitude = base.amplitude;
        s.phase = base.phase;
    }
    // Channel 2 carries the delayed copy.
    run_cfg.sensors[1].phase -=
        kTwoPi * run_cfg.sensors[1].frequency * offset_seconds;

    DecodeResult result;
    run_once(run_cfg, &result);

    const SampleSeries& a = result.sensor_series[0];
    const SampleSeries& b = result.sensor_series[1];
    const auto max_lag = std::min<Index>(
        a.size() - 1,
        static_cast<Index>(std::llround(std::abs(offset_seconds) * cfg.f_env)) + 3);
    const AlignResult align = align_and_lag(a, b, max_lag);

    PhaseAlignmentReport rep;
    rep.configured_offset_s = offset_seconds;
    rep.measured_offset_s = static_cast<double>(align.lag) / cfg.f_env;
    rep.error_s = rep.measured_offset_s - offset_seconds;
    rep.resolution_s = 1.0 / cfg.f_env;
    return rep;
}

std::string PhaseAlignmentReport::to_json() const {
    nlohmann::json j;
    j["configured_offset_s"] = configured_offset_s;
    j["measured_offset_s"] = measured_offset_s;
    j["error_s"] = error_s;
    j["resolution_s"] = resolution_s;
    return j.dump(2);
}

} // namespace vdm
