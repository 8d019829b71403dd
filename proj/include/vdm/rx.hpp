// Receiver: zoom spectrogram, transition detection, FSM decoding of the
// ascending frequency staircase, and per-sensor reconstruction.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vdm/codebook.hpp"
#include "vdm/czt.hpp"
#include "vdm/sample_series.hpp"

namespace vdm {

enum class Taper { Rect, Hann };

struct CztPlan {
    Index window_len = 256;  // N
    int bins = 512;          // M
    double f_start = 100e3;  // Hz
    double f_end = 1e6;      // Hz
    Taper taper = Taper::Rect;
    Index hop = 8;           // H

    void validate(double sample_rate) const;
    double bin_spacing() const {
        return (f_end - f_start) / static_cast<double>(bins - 1);
    }
    int bin_of_freq(double f) const;
};

// Derives a plan from the codebook geometry: the window is long enough to
// separate adjacent levels but short relative to the reference period.
CztPlan auto_plan(double sample_rate, double f_env, const VdmCodebook& book);

struct ZoomSpectrogram {
    Eigen::MatrixXd frames;          // num_frames x M magnitudes
    std::vector<Index> frame_times;  // start sample of each frame
    Eigen::ArrayXcd samples;         // the analyzed capture; period decoding
                                     // fits the tone model on it directly
    CztPlan plan;
    double sample_rate = 0.0;

    Index num_frames() const { return frames.rows(); }
};

ZoomSpectrogram sliding_spectrogram(const IqCapture& iq, const CztPlan& plan);

// Algorithm: differentiate the trace, find peaks of the negated derivative
// above peak_height (the steepest falls), then from each peak walk backward
// while the signal keeps falling faster than gradient_threshold. Returns the
// index of the last sample before each fall, strictly increasing.
std::vector<Index> find_decrease_points(const Eigen::ArrayXd& trace, double peak_height,
                                        double gradient_threshold);

struct DecodeParams {
    double peak_frac = 0.35;     // of the max negated derivative
    double grad_frac = 0.05;     // of the max negated derivative
    double min_drop_frac = 0.4;  // of the expected one-level magnitude step
    double floor_frac = 0.05;    // successor magnitude floor vs period peak
    int avg_frames = 3;          // frames averaged for successor scoring
};

// Period boundaries from the onset of the full-set (lowest) frequency level.
std::vector<std::pair<Index, Index>> segment_periods(const ZoomSpectrogram& spec,
                                                     const VdmCodebook& book,
                                                     const DecodeParams& params = {});

struct PeriodDecode {
    Index start = 0, end = 0;  // sample indices
    // Ordered (bitmask, duration in samples); durations sum to end - start.
    std::vector<std::pair<std::uint32_t, Index>> chain;
    bool ok = true;
    std::string note;
};

// One period of FSM decoding over the spectrogram.
PeriodDecode decode_period(const ZoomSpectrogram& spec, Index start, Index end,
                           const VdmCodebook& book, const DecodeParams& params = {});

struct DecodeDiagnostics {
    int periods_total = 0;
    int periods_discarded = 0;
    int ambiguous_transitions = 0;
    double mean_period_samples = 0.0;
    Index timing_quantum = 0;  // hop size; timing error scales with it
    std::vector<std::string> warnings;
};

struct DecodeResult {
    std::vector<PeriodDecode> periods;
    Eigen::MatrixXd duty_samples;  // periods x sensors, high-time in samples
    Eigen::MatrixXd voltages;      // periods x sensors, reconstructed volts
    std::vector<SampleSeries> sensor_series;  // rate f_s, one value per period
    DecodeDiagnostics diagnostics;

    std::string to_json() const;
};

// Inverts the PWM encoding for decoded chains: per-sensor high time from the
// duty matrix, then V = (T_d - epsilon) * V_max * f_s clamped to [0, V_max].
void reconstruct(DecodeResult& result, const VdmCodebook& book, double f_s, double v_max,
                 double sample_rate, double epsilon = 0.0);

// Full receiver: segment, decode each period, reconstruct.
DecodeResult demultiplex(const IqCapture& iq, const VdmCodebook& book, const CztPlan& plan,
                         double f_s, double v_max, double epsilon = 0.0,
                         const DecodeParams& params = {});

} // namespace vdm
