#include "vdm/modem.hpp"

#include <cmath>

#include "vdm/rng.hpp"

namespace vdm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void VcoModel::validate() const {
    if (v_set <= 0.0) throw ConfigError("VcoModel: V_SET must be positive");
    if (n_div <= 0.0) throw ConfigError("VcoModel: N_DIV must be positive");
    if (!(f_at_vset < f_at_zero))
        throw ConfigError("VcoModel: mapping must decrease with voltage");
    if (!(0.0 < f_min_abs && f_min_abs < f_max_abs))
        throw ConfigError("VcoModel: invalid absolute frequency range");
}

double volts_to_hz(const VcoModel& vco, double volts) {
    vco.validate();
    if (volts < 0.0) throw ConfigError("volts_to_hz: negative voltage");
    double f = (vco.f_at_zero + (vco.f_at_vset - vco.f_at_zero) * (volts / vco.v_set)) / vco.n_div;
    return std::clamp(f, vco.f_min_abs, vco.f_max_abs);
}

IqCapture modulate(const SampleSeries& v_out, const VcoModel& vco, bool harmonics) {
    v_out.require_valid("modulate");
    vco.validate();
    const double fs = v_out.sample_rate;
    if (fs < 2.2 * vco.f_max_abs)
        throw ConfigError("modulate: sample_rate below 2.2x the maximum output frequency");

    const Index n = v_out.size();
    Eigen::ArrayXd phase(n);
    double theta = 0.0;
    Eigen::ArrayXd inst_f(n);
    for (Index i = 0; i < n; ++i) {
        inst_f[i] = volts_to_hz(vco, std::max(0.0, v_out.samples[i]));
        phase[i] = theta;
        theta += kTwoPi * inst_f[i] / fs;
    }

    IqCapture capture;
    capture.sample_rate = fs;
    capture.band_low = vco.f_min_abs;
    capture.band_high = vco.f_max_abs;
    capture.samples.resize(n);
    for (Index i = 0; i < n; ++i)
        capture.samples[i] = std::polar(1.0, phase[i]);

    if (harmonics) {
        // Odd harmonics of the fundamental, phase locked, kept only while
        // they remain inside the configured band.
        for (int k = 3;; k += 2) {
            bool any = false;
            for (Index i = 0; i < n; ++i) {
                const double fk = k * inst_f[i];
                if (fk <= capture.band_high && fk < fs / 2.0) {
                    capture.samples[i] += std::polar(1.0 / k, k * phase[i]);
                    any = true;
                }
            }
            if (!any) break;
        }
    }
    return capture;
}

IqCapture apply_channel(const IqCapture& iq, const ChannelModel& channel) {
    iq.require_valid("apply_channel");
    if (std::abs(channel.gain) <= 0.0)
        throw ConfigError("apply_channel: |gain| must be positive");

    const Index n = iq.size();
    IqCapture out = iq;
    const double fs = iq.sample_rate;

    for (Index i = 0; i < n; ++i) {
        std::complex<double> y = channel.gain * iq.samples[i];
        if (channel.cfo_hz != 0.0)
            y *= std::polar(1.0, kTwoPi * channel.cfo_hz * static_cast<double>(i) / fs);
        out.samples[i] = y + channel.dc_leak;
    }

    if (std::isfinite(channel.noise_snr_db)) {
        const double sig_power =
            out.samples.abs2().sum() / static_cast<double>(n);
        const double noise_power = sig_power / std::pow(10.0, channel.noise_snr_db / 10.0);
        const double sigma = std::sqrt(noise_power / 2.0);
        Rng rng(channel.seed);
        for (Index i = 0; i < n; ++i)
            out.samples[i] += std::complex<double>(sigma * rng.gaussian(), sigma * rng.gaussian());
    }
    return out;
}

} // namespace vdm
