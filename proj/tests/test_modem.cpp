#include <cmath>
#include <complex>

#include "doctest.h"
#include "vdm/czt.hpp"
#include "vdm/modem.hpp"

using namespace vdm;

namespace {
constexpr double kPi = 3.14159265358979323846;

double measured_freq(const IqCapture& iq, Index from, Index to) {
    // Mean phase increment over [from, to).
    double acc = 0.0;
    Index count = 0;
    for (Index i = from + 1; i < to; ++i) {
        acc += std::arg(iq.samples[i] * std::conj(iq.samples[i - 1]));
        ++count;
    }
    return acc / static_cast<double>(count) * iq.sample_rate / (2.0 * kPi);
}
} // namespace

TEST_CASE("voltage to frequency map is affine with clamps") {
    VcoModel vco;
    CHECK(volts_to_hz(vco, 0.0) == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(volts_to_hz(vco, 1.0) == doctest::Approx(100e3).epsilon(1e-12));
    CHECK(volts_to_hz(vco, 0.5) == doctest::Approx(550e3).epsilon(1e-12));
    // Beyond V_SET the line continues down until the absolute floor.
    CHECK(volts_to_hz(vco, 5.0) == doctest::Approx(vco.f_min_abs).epsilon(1e-12));
    CHECK_THROWS_AS(volts_to_hz(vco, -0.1), ConfigError);
}

TEST_CASE("modulate emits the mapped tone with phase continuity") {
    const double fs = 4e6;
    const Index half = 2000;
    Eigen::ArrayXd v(2 * half);
    v.head(half).setConstant(0.0); // 1 MHz
    v.tail(half).setConstant(1.0); // 100 kHz
    VcoModel vco;
    const IqCapture iq = modulate(SampleSeries(v, fs), vco);

    CHECK(std::abs(measured_freq(iq, 10, half) - 1e6) < 1.0);
    CHECK(std::abs(measured_freq(iq, half + 10, 2 * half) - 100e3) < 1.0);
    // Unit-modulus oscillator and no phase jump at the switch: the step from
    // sample half-1 to half advances by one of the two tone increments.
    for (Index i : {Index(1), half - 1, half, half + 1})
        CHECK(std::abs(iq.samples[i]) == doctest::Approx(1.0).epsilon(1e-12));
    const double jump = std::arg(iq.samples[half] * std::conj(iq.samples[half - 1]));
    const double inc_low = 2.0 * kPi * 100e3 / fs;
    const double inc_high = 2.0 * kPi * 1e6 / fs;
    CHECK((std::abs(jump - inc_low) < 1e-9 || std::abs(jump - inc_high) < 1e-9));
}

TEST_CASE("odd harmonics appear only inside the configured band") {
    const double fs = 8e6;
    Eigen::ArrayXd v = Eigen::ArrayXd::Constant(8192, 1.0); // fundamental 100 kHz
    VcoModel vco;
    const IqCapture iq = modulate(SampleSeries(v, fs), vco, true);
    const Eigen::ArrayXcd spec = czt(iq.samples, 1001, 50e3, 1.05e6, fs);
    auto mag_at = [&](double f) {
        const int bin = static_cast<int>(std::llround((f - 50e3) / 1e3));
        return std::abs(spec[bin]);
    };
    const double fund = mag_at(100e3);
    CHECK(mag_at(300e3) > 0.2 * fund);  // 3rd at 1/3 amplitude
    CHECK(mag_at(500e3) > 0.1 * fund);  // 5th at 1/5
    CHECK(mag_at(200e3) < 0.02 * fund); // even harmonics absent
}

TEST_CASE("channel applies gain, leakage and CFO deterministically") {
    const double fs = 4e6;
    Eigen::ArrayXcd x(4000);
    for (Index i = 0; i < x.size(); ++i)
        x[i] = std::polar(1.0, 2.0 * kPi * 250e3 * static_cast<double>(i) / fs);
    IqCapture iq;
    iq.samples = x;
    iq.sample_rate = fs;
    iq.band_low = 100e3;
    iq.band_high = 1e6;

    ChannelModel ch;
    ch.gain = {0.5, 0.5};
    ch.dc_leak = {0.25, 0.0};
    ch.cfo_hz = 1e3;
    ch.seed = 9;
    const IqCapture out = apply_channel(iq, ch);
    // Noiseless: y[n] = gain * x[n] * exp(j*2*pi*cfo*n/fs) + dc.
    for (Index i : {Index(0), Index(1), Index(1234), Index(3999)}) {
        const std::complex<double> expect =
            ch.gain * x[i] *
                std::polar(1.0, 2.0 * kPi * ch.cfo_hz * static_cast<double>(i) / fs) +
            ch.dc_leak;
        CHECK(std::abs(out.samples[i] - expect) < 1e-12);
    }
}

TEST_CASE("noise hits the target SNR and is seed deterministic") {
    const double fs = 4e6;
    Eigen::ArrayXcd x(200000);
    for (Index i = 0; i < x.size(); ++i)
        x[i] = std::polar(1.0, 2.0 * kPi * 250e3 * static_cast<double>(i) / fs);
    IqCapture iq;
    iq.samples = x;
    iq.sample_rate = fs;
    iq.band_low = 100e3;
    iq.band_high = 1e6;

    ChannelModel ch;
    ch.noise_snr_db = 20.0;
    ch.seed = 4;
    const IqCapture a = apply_channel(iq, ch);
    const IqCapture b = apply_channel(iq, ch);
    ch.seed = 5;
    const IqCapture c = apply_channel(iq, ch);

    bool identical = true, differs = false;
    double noise_power = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        identical = identical && (a.samples[i] == b.samples[i]);
        differs = differs || (a.samples[i] != c.samples[i]);
        noise_power += std::norm(a.samples[i] - x[i]);
    }
    CHECK(identical);
    CHECK(differs);
    const double snr = 10.0 * std::log10(static_cast<double>(x.size()) / noise_power);
    CHECK(snr == doctest::Approx(20.0).epsilon(0.01));
}

TEST_CASE("model validation rejects inverted calibration") {
    VcoModel vco;
    vco.f_at_vset = 2e6; // above f_at_zero: map must decrease
    CHECK_THROWS_AS(vco.validate(), ConfigError);
    vco = VcoModel{};
    vco.v_set = 0.0;
    CHECK_THROWS_AS(vco.validate(), ConfigError);
}
