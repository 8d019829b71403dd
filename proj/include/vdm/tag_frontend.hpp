// Tag-side signal chain: two-tone timing extraction, square-wave hardening,
// reset pulses, sawtooth synthesis, and the parallel PWM comparator bank.
#pragma once

#include <vector>

#include "vdm/sample_series.hpp"

namespace vdm {

struct TwoToneConfig {
    double amplitude = 1.0; // volts
    double f1 = 0.0;        // Hz
    double f2 = 0.0;        // Hz
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double phi1 = 0.0; // radians
    double phi2 = 0.0; // radians

    double f_env() const { return std::abs(f1 - f2); }
    void validate() const;
};

struct TimingReference {
    double f_env = 0.0;                // Hz, estimated from pulse spacing
    std::vector<Index> pulse_indices;  // sawtooth-reset sample indices
    double sample_rate = 0.0;
};

// Constant-current sawtooth generator. The ramp slope is I_ch / C with
// I_ch = (V_sup - V_Z - V_BE) / R_set.
struct SawtoothGeneratorModel {
    double v_sup = 5.0;   // volts
    double v_z = 3.3;     // volts
    double v_be = 0.7;    // volts
    double c = 500e-12;   // farads
    double r_set = 0.0;   // ohms; pick via required_rset
    double v_max = 3.3;   // volts, target peak

    double headroom() const { return v_sup - v_z - v_be; }
    void validate() const;
};

struct PwmStream {
    SampleSeries levels;               // 0 or v_s
    double v_s = 3.3;
    std::vector<Index> period_starts;  // one per full reference period
    std::vector<Index> fall_indices;   // first low sample per period; period
                                       // end if the channel saturated high
};

SampleSeries synth_two_tone(const TwoToneConfig& cfg, double duration, double sample_rate);

// Samples the closed-form beat envelope directly (analytic shortcut past the
// rectifier/filter stages).
SampleSeries envelope_closed_form(const TwoToneConfig& cfg, double duration,
                                  double sample_rate);

// |r| followed by a single-pole low-pass at `cutoff`.
SampleSeries envelope_detect(const SampleSeries& r, double cutoff);

// Sliding-window mean removal followed by a sign threshold; two-level output
// at {0, v_s} whose shape is independent of input amplitude scaling.
SampleSeries square_from_envelope(const SampleSeries& env, double v_s = 3.3);

// Rising edges of the square wave; edges closer than 25% of the median
// spacing are treated as glitches and dropped.
TimingReference reset_pulses(const SampleSeries& square);

// R_set that makes the ramp peak at v_max after one reference period.
double required_rset(const SawtoothGeneratorModel& model, double f_env);

// Linear ramp from zero, reset at each pulse; clipped at 2*v_max to emulate
// the supply rail.
SampleSeries sawtooth_from_pulses(const TimingReference& ref,
                                  const SawtoothGeneratorModel& model,
                                  double sample_rate);

// Parallel comparator bank. Each channel is high from the period start until
// the first sample where the shared sawtooth reaches its input, then low for
// the remainder of the period. `epsilon` extends the high time by a constant
// number of whole samples.
std::vector<PwmStream> pwm_encode(const std::vector<SampleSeries>& sensors,
                                  const SampleSeries& sawtooth, double v_s,
                                  double epsilon = 0.0);

} // namespace vdm
