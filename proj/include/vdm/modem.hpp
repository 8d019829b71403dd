// Voltage-to-frequency conversion, baseband synthesis, and the channel
// impairment model.
#pragma once

#include <complex>
#include <limits>

#include "vdm/sample_series.hpp"

namespace vdm {

// Affine voltage->frequency map of the backscatter oscillator. The hardware
// equation couples two resistors and a divider; only the two calibration
// endpoints are observable, so the model is parameterized by them and the
// divider. The mapping decreases with voltage and the output is clamped to
// the device's absolute range.
struct VcoModel {
    double f_at_zero = 1e6;   // Hz at v = 0
    double f_at_vset = 100e3; // Hz at v = V_SET
    double v_set = 1.0;       // volts
    double n_div = 1.0;
    double f_min_abs = 488.0; // Hz
    double f_max_abs = 1e6;   // Hz

    void validate() const;
};

// Throws on negative voltage; clamps the result to [f_min_abs, f_max_abs].
double volts_to_hz(const VcoModel& vco, double volts);

// Static composite channel: complex gain, AWGN at a target SNR, carrier
// leakage at DC, and residual CFO. Noise is seed-deterministic.
struct ChannelModel {
    std::complex<double> gain{1.0, 0.0};
    double noise_snr_db = std::numeric_limits<double>::infinity();
    std::complex<double> dc_leak{0.0, 0.0};
    double cfo_hz = 0.0;
    std::uint64_t seed = 0;
};

// Phase-continuous complex exponential at the instantaneous VCO frequency.
// With harmonics enabled, odd harmonics that stay inside the configured band
// are added at 1/k amplitude (square-wave switch model).
IqCapture modulate(const SampleSeries& v_out, const VcoModel& vco, bool harmonics = false);

IqCapture apply_channel(const IqCapture& iq, const ChannelModel& channel);

} // namespace vdm
