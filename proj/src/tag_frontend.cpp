#include "vdm/tag_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace vdm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

Index sample_count(double duration, double sample_rate) {
    return static_cast<Index>(std::llround(duration * sample_rate));
}
} // namespace

void TwoToneConfig::validate() const {
    if (f1 == f2) throw ConfigError("TwoToneConfig: f1 must differ from f2");
    if (f1 <= 0.0 || f2 <= 0.0) throw ConfigError("TwoToneConfig: tone frequencies must be positive");
    if (alpha1 < 0.0 || alpha2 < 0.0)
        throw ConfigError("TwoToneConfig: attenuations must be non-negative");
    if (amplitude <= 0.0) throw ConfigError("TwoToneConfig: amplitude must be positive");
}

void SawtoothGeneratorModel::validate() const {
    if (headroom() <= 0.0)
        throw ConfigError("SawtoothGeneratorModel: V_sup - V_Z - V_BE must be positive");
    if (c <= 0.0) throw ConfigError("SawtoothGeneratorModel: C must be positive");
    if (r_set <= 0.0) throw ConfigError("SawtoothGeneratorModel: R_set must be positive");
    if (v_max <= 0.0) throw ConfigError("SawtoothGeneratorModel: V_max must be positive");
}

SampleSeries synth_two_tone(const TwoToneConfig& cfg, double duration, double sample_rate) {
    cfg.validate();
    if (sample_rate <= 4.0 * std::max(cfg.f1, cfg.f2))
        throw ConfigError("synth_two_tone: sample_rate must exceed 4x the highest tone");
    const Index n = sample_count(duration, sample_rate);
    Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)) / sample_rate;
    Eigen::ArrayXd r = cfg.alpha1 * cfg.amplitude * (kTwoPi * cfg.f1 * t + cfg.phi1).cos() +
                       cfg.alpha2 * cfg.amplitude * (kTwoPi * cfg.f2 * t + cfg.phi2).cos();
    return SampleSeries(std::move(r), sample_rate);
}

SampleSeries envelope_closed_form(const TwoToneConfig& cfg, double duration,
                                  double sample_rate) {
    cfg.validate();
    if (sample_rate <= 0.0)
        throw ConfigError("envelope_closed_form: sample_rate must be positive");
    const Index n = sample_count(duration, sample_rate);
    const double w_diff = kTwoPi * (cfg.f1 - cfg.f2);
    const double phi_diff = cfg.phi1 - cfg.phi2;
    const double a1 = cfg.alpha1, a2 = cfg.alpha2;
    Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)) / sample_rate;
    Eigen::ArrayXd env =
        cfg.amplitude *
        (a1 * a1 + a2 * a2 + 2.0 * a1 * a2 * (w_diff * t + phi_diff).cos()).sqrt();
    return SampleSeries(std::move(env), sample_rate);
}

SampleSeries envelope_detect(const SampleSeries& r, double cutoff) {
    r.require_valid("envelope_detect");
    if (cutoff <= 0.0 || cutoff >= r.sample_rate / 2.0)
        throw ConfigError("envelope_detect: cutoff out of range");

    // Ideal rectifier followed by a single-pole IIR low-pass:
    //   y[n] = y[n-1] + a * (|x[n]| - y[n-1]),  a = 1 - exp(-2*pi*fc/fs)
    const double a = 1.0 - std::exp(-kTwoPi * cutoff / r.sample_rate);
    Eigen::ArrayXd out(r.size());
    double y = std::abs(r.samples[0]);
    for (Index i = 0; i < r.size(); ++i) {
        y += a * (std::abs(r.samples[i]) - y);
        out[i] = y;
    }
    return SampleSeries(std::move(out), r.sample_rate, r.t0);
}

SampleSeries square_from_envelope(const SampleSeries& env, double v_s) {
    env.require_valid("square_from_envelope");

    // First pass: global mean subtraction to find the fundamental period from
    // zero crossings, then a sliding mean over four periods as the actual DC
    // reference.
    const double global_mean = env.samples.mean();
    Index crossings = 0;
    Index first_cross = -1, last_cross = -1;
    for (Index i = 1; i < env.size(); ++i) {
        const bool was = env.samples[i - 1] >= global_mean;
        const bool now = env.samples[i] >= global_mean;
        if (was != now) {
            ++crossings;
            if (first_cross < 0) first_cross = i;
            last_cross = i;
        }
    }
    if (crossings < 4)
        throw InsufficientSignalError(
            "square_from_envelope: need at least two envelope periods");
    // Two crossings per period.
    const double period_samples =
        2.0 * static_cast<double>(last_cross - first_cross) / static_cast<double>(crossings - 1);
    const Index window = std::max<Index>(4, static_cast<Index>(std::llround(4.0 * period_samples)));

    // Centered sliding mean, clamped at the edges.
    Eigen::ArrayXd prefix(env.size() + 1);
    prefix[0] = 0.0;
    for (Index i = 0; i < env.size(); ++i) prefix[i + 1] = prefix[i] + env.samples[i];

    Eigen::ArrayXd out(env.size());
    const Index half = window / 2;
    for (Index i = 0; i < env.size(); ++i) {
        const Index lo = std::max<Index>(0, i - half);
        const Index hi = std::min<Index>(env.size(), i + half + 1);
        const double mean = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
        out[i] = env.samples[i] >= mean ? v_s : 0.0;
    }
    return SampleSeries(std::move(out), env.sample_rate, env.t0);
}

TimingReference reset_pulses(const SampleSeries& square) {
    square.require_valid("reset_pulses");
    const double high = square.samples.maxCoeff();
    const double low = square.samples.minCoeff();
    if (high == low)
        throw InsufficientSignalError("reset_pulses: constant input has no edges");
    const double mid = 0.5 * (high + low);

    std::vector<Index> edges;
    for (Index i = 1; i < square.size(); ++i)
        if (square.samples[i - 1] < mid && square.samples[i] >= mid) edges.push_back(i);
    if (edges.size() < 2)
        throw InsufficientSignalError("reset_pulses: fewer than two rising edges");

    std::vector<double> spacing;
    for (std::size_t i = 1; i < edges.size(); ++i)
        spacing.push_back(static_cast<double>(edges[i] - edges[i - 1]));
    std::vector<double> sorted = spacing;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];

    // Debounce: drop edges closer than 25% of the median spacing.
    std::vector<Index> pulses{edges.front()};
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (static_cast<double>(edges[i] - pulses.back()) >= 0.25 * median)
            pulses.push_back(edges[i]);
    if (pulses.size() < 2)
        throw InsufficientSignalError("reset_pulses: fewer than two pulses after debounce");

    std::vector<double> clean;
    for (std::size_t i = 1; i < pulses.size(); ++i)
        clean.push_back(static_cast<double>(pulses[i] - pulses[i - 1]));
    std::nth_element(clean.begin(), clean.begin() + clean.size() / 2, clean.end());
    const double med_clean = clean[clean.size() / 2];

    TimingReference ref;
    ref.pulse_indices = std::move(pulses);
    ref.sample_rate = square.sample_rate;
    ref.f_env = square.sample_rate / med_clean;
    return ref;
}

double required_rset(const SawtoothGeneratorModel& model, double f_env) {
    if (model.headroom() <= 0.0)
        throw ConfigError("required_rset: V_sup - V_Z - V_BE must be positive");
    if (f_env <= 0.0 || model.v_max <= 0.0 || model.c <= 0.0)
        throw ConfigError("required_rset: f_env, V_max and C must be positive");
    return model.headroom() / (f_env * model.v_max * model.c);
}

SampleSeries sawtooth_from_pulses(const TimingReference& ref,
                                  const SawtoothGeneratorModel& model,
                                  double sample_rate) {
    model.validate();
    if (ref.pulse_indices.size() < 2)
        throw InsufficientSignalError("sawtooth_from_pulses: need at least two pulses");

    const double i_ch = model.headroom() / model.r_set;
    const double slope_per_sample = i_ch / model.c / sample_rate; // volts per sample
    const double clip = 2.0 * model.v_max;
    const double period = sample_rate / ref.f_env;
    if (slope_per_sample * period > clip + model.v_max)
        std::cerr << "sawtooth_from_pulses: warning: ramp exceeds 2*V_max between pulses; "
                     "clipping at supply limit\n";

    const Index n = ref.pulse_indices.back() + 1;
    Eigen::ArrayXd out(n);
    Index last_reset = 0;
    std::size_t next_pulse = 0;
    for (Index i = 0; i < n; ++i) {
        if (next_pulse < ref.pulse_indices.size() && i == ref.pulse_indices[next_pulse]) {
            last_reset = i;
            ++next_pulse;
        }
        out[i] = std::min(slope_per_sample * static_cast<double>(i - last_reset), clip);
    }
    return SampleSeries(std::move(out), sample_rate);
}

std::vector<PwmStream> pwm_encode(const std::vector<SampleSeries>& sensors,
                                  const SampleSeries& sawtooth, double v_s,
                                  double epsilon) {
    sawtooth.require_valid("pwm_encode");
    if (sensors.empty()) throw DimensionError("pwm_encode: no sensor channels");
    if (v_s <= 0.0) throw ConfigError("pwm_encode: v_s must be positive");
    if (epsilon < 0.0) throw ConfigError("pwm_encode: epsilon must be non-negative");
    for (const auto& s : sensors) {
        if (s.size() != sawtooth.size() || s.sample_rate != sawtooth.sample_rate)
            throw DimensionError("pwm_encode: sensor/sawtooth length or rate mismatch");
    }

    // Reconstruct period boundaries from the sawtooth resets.
    const double peak = sawtooth.samples.maxCoeff();
    std::vector<Index> resets;
    for (Index i = 1; i < sawtooth.size(); ++i)
        if (sawtooth.samples[i] - sawtooth.samples[i - 1] < -0.5 * peak) resets.push_back(i);
    if (sawtooth.samples[0] == 0.0 && (resets.empty() || resets.front() != 0))
        resets.insert(resets.begin(), 0);
    if (resets.size() < 2)
        throw InsufficientSignalError("pwm_encode: sawtooth contains no full period");

    const Index eps_samples =
        static_cast<Index>(std::llround(epsilon * sawtooth.sample_rate));

    bool warned_clip = false;
    std::vector<PwmStream> out;
    out.reserve(sensors.size());
    for (const auto& sensor : sensors) {
        PwmStream stream;
        stream.v_s = v_s;
        Eigen::ArrayXd levels = Eigen::ArrayXd::Zero(sawtooth.size());
        for (std::size_t p = 0; p + 1 < resets.size(); ++p) {
            const Index start = resets[p];
            const Index end = resets[p + 1];
            Index fall = end;
            for (Index i = start; i < end; ++i) {
                double v = sensor.samples[i];
                if (v < 0.0 || v > peak) {
                    if (!warned_clip) {
                        std::cerr << "pwm_encode: warning: sensor value outside [0, V_max]; "
                                     "clipping at comparator rails\n";
                        warned_clip = true;
                    }
                    v = std::clamp(v, 0.0, peak);
                }
                if (sawtooth.samples[i] >= v) {
                    fall = i;
                    break;
                }
            }
            fall = std::min(fall + eps_samples, end);
            for (Index i = start; i < fall; ++i) levels[i] = v_s;
            stream.period_starts.push_back(start);
            stream.fall_indices.push_back(fall);
        }
        stream.levels = SampleSeries(std::move(levels), sawtooth.sample_rate, sawtooth.t0);
        out.push_back(std::move(stream));
    }
    return out;
}

} // namespace vdm
