#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracle.hpp"
#include "vdm/codebook.hpp"
#include "vdm/modem.hpp"
#include "vdm/rx.hpp"
#include "vdm/tag_frontend.hpp"

using namespace vdm;

namespace {
constexpr double kPi = 3.14159265358979323846;

struct TinyPipeline {
    VdmCodebook book;
    IqCapture iq;
    std::vector<PwmStream> pwms;
    CztPlan plan;
    double f_env;
};

// Constant-input end-to-end chain without noise, built from the public tag
// primitives.
TinyPipeline build_pipeline(const std::vector<double>& volts, double f_env, double fs,
                            int periods) {
    const double v_max = 3.3;
    TimingReference ref;
    ref.sample_rate = fs;
    ref.f_env = f_env;
    const Index period = static_cast<Index>(std::llround(fs / f_env));
    for (int p = 0; p <= periods; ++p)
        ref.pulse_indices.push_back(static_cast<Index>(p) * period);
    SawtoothGeneratorModel saw;
    saw.r_set = required_rset(saw, f_env);
    const SampleSeries ramp = sawtooth_from_pulses(ref, saw, fs);

    std::vector<SampleSeries> sensors;
    for (double v : volts)
        sensors.emplace_back(Eigen::ArrayXd::Constant(ramp.size(), v), fs);
    std::vector<PwmStream> pwms = pwm_encode(sensors, ramp, v_max);

    VdmConfig vc;
    vc.n_sensors = static_cast<int>(volts.size());
    VcoModel vco;
    VdmCodebook book(vc, vco);
    const SampleSeries summed = sum_streams(pwms, book);
    TinyPipeline out{book, modulate(summed, vco), std::move(pwms),
                     auto_plan(fs, f_env, book), f_env};
    return out;
}
} // namespace

TEST_CASE("find_decrease_points locates the last sample before a fall") {
    Eigen::ArrayXd trace(9);
    trace << 1.0, 1.0, 1.0, 1.0, 0.7, 0.3, 0.0, 0.0, 0.0;
    const std::vector<Index> pts = find_decrease_points(trace, 0.2, 0.1);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0] == 3);
}

TEST_CASE("find_decrease_points input validation") {
    Eigen::ArrayXd tiny(2);
    tiny << 1.0, 0.0;
    CHECK_THROWS_AS(find_decrease_points(tiny, 0.1, 0.1), DimensionError);
    Eigen::ArrayXd t(4);
    t << 1, 1, 0, 0;
    CHECK_THROWS_AS(find_decrease_points(t, -0.1, 0.1), ConfigError);
}

TEST_CASE("auto plan separates adjacent levels and fits inside a period") {
    VdmConfig vc;
    vc.n_sensors = 3;
    const VdmCodebook book(vc, VcoModel{});
    const CztPlan plan = auto_plan(4e6, 5e3, book);
    CHECK_NOTHROW(plan.validate(4e6));
    CHECK(plan.window_len >= 16);
    CHECK(plan.window_len <= static_cast<Index>(0.5 * 4e6 / 5e3));
    CHECK(plan.hop >= 1);
    CHECK(plan.f_start <= book.freq_of_level(book.level_count() - 1));
    CHECK(plan.f_end >= book.freq_of_level(0));
    // Window long enough that adjacent level tones are resolvable.
    const double df = book.freq_of_level(0) - book.freq_of_level(1);
    CHECK(static_cast<double>(plan.window_len) >= 0.9 * 4e6 / df);
}

TEST_CASE("sliding spectrogram tracks a pure tone") {
    const double fs = 4e6, f_tone = 700e3;
    IqCapture iq;
    iq.sample_rate = fs;
    iq.band_low = 100e3;
    iq.band_high = 1e6;
    iq.samples.resize(4096);
    for (Index i = 0; i < iq.samples.size(); ++i)
        iq.samples[i] = std::polar(1.0, 2.0 * kPi * f_tone * static_cast<double>(i) / fs);

    CztPlan plan;
    plan.window_len = 256;
    plan.bins = 451;
    plan.hop = 16;
    const ZoomSpectrogram spec = sliding_spectrogram(iq, plan);
    REQUIRE(spec.num_frames() > 0);
    CHECK(spec.frame_times[1] - spec.frame_times[0] == plan.hop);
    for (Index f = 0; f < spec.num_frames(); ++f) {
        Index peak = 0;
        spec.frames.row(f).maxCoeff(&peak);
        const double peak_freq =
            plan.f_start + static_cast<double>(peak) * plan.bin_spacing();
        CHECK(std::abs(peak_freq - f_tone) <= 2.0 * plan.bin_spacing());
    }
    // The capture rides along for time-domain fitting.
    CHECK(spec.samples.size() == iq.samples.size());
}

TEST_CASE("period segmentation finds every reference period") {
    const TinyPipeline pipe = build_pipeline({0.8, 1.9, 2.6}, 10e3, 4e6, 12);
    const ZoomSpectrogram spec = sliding_spectrogram(pipe.iq, pipe.plan);
    const auto periods = segment_periods(spec, pipe.book);
    // 12 encoded periods; the first and last may fall outside the usable
    // spectrogram span.
    CHECK(periods.size() >= 10);
    const Index expect = static_cast<Index>(std::llround(4e6 / 10e3));
    for (const auto& [a, b] : periods) {
        CHECK(std::abs((b - a) - expect) <= 2 * pipe.plan.hop + 4);
    }
}

TEST_CASE("decoded chains match the comparator truth") {
    const std::vector<double> volts{0.6, 1.7, 2.8};
    const TinyPipeline pipe = build_pipeline(volts, 10e3, 4e6, 12);
    const DecodeResult dec =
        demultiplex(pipe.iq, pipe.book, pipe.plan, pipe.f_env, 3.3);
    REQUIRE(dec.periods.size() >= 10);

    const Index tol = 2 * pipe.plan.hop + pipe.plan.window_len / 8;
    for (std::size_t p = 0; p < dec.periods.size(); ++p) {
        const PeriodDecode& pd = dec.periods[p];
        REQUIRE(pd.ok);
        // Masks along the chain only ever lose sensors.
        std::uint32_t prev = pd.chain.front().first;
        CHECK(prev == (1u << volts.size()) - 1u);
        for (const auto& [mask, len] : pd.chain) {
            CHECK((mask & ~prev) == 0u);
            CHECK(len > 0);
            prev = mask;
        }
        CHECK(pd.chain.back().first == 0u);

        // Duty against the encoder's own fall indices.
        for (std::size_t i = 0; i < volts.size(); ++i) {
            const PwmStream& st = pipe.pwms[i];
            bool matched = false;
            for (std::size_t q = 0; q < st.period_starts.size(); ++q) {
                if (std::llabs(st.period_starts[q] - pd.start) <= 100) {
                    const double truth =
                        static_cast<double>(st.fall_indices[q] - st.period_starts[q]);
                    CHECK(std::abs(dec.duty_samples(static_cast<Index>(p),
                                                    static_cast<int>(i)) -
                                   truth) <= static_cast<double>(tol));
                    matched = true;
                    break;
                }
            }
            CHECK(matched);
        }
    }
}

TEST_CASE("reconstruction inverts the PWM map") {
    const std::vector<double> volts{0.5, 1.6, 2.9};
    const TinyPipeline pipe = build_pipeline(volts, 5e3, 4e6, 20);
    const DecodeResult dec =
        demultiplex(pipe.iq, pipe.book, pipe.plan, pipe.f_env, 3.3);
    REQUIRE(dec.periods.size() >= 15);
    const double tol =
        2.0 * 3.3 * pipe.f_env * static_cast<double>(pipe.plan.hop) / 4e6 + 0.01;
    for (Index p = 0; p < dec.voltages.rows(); ++p)
        for (std::size_t i = 0; i < volts.size(); ++i)
            CHECK(std::abs(dec.voltages(p, static_cast<int>(i)) - volts[i]) <= tol);
    // One reconstructed value per period at the reference rate.
    REQUIRE(dec.sensor_series.size() == volts.size());
    CHECK(dec.sensor_series[0].sample_rate == doctest::Approx(pipe.f_env));
    CHECK(dec.sensor_series[0].size() == dec.voltages.rows());
}

TEST_CASE("degenerate periods are flagged instead of decoded") {
    const TinyPipeline pipe = build_pipeline({1.0, 2.0}, 10e3, 4e6, 8);
    const ZoomSpectrogram spec = sliding_spectrogram(pipe.iq, pipe.plan);
    const PeriodDecode bad = decode_period(spec, 100, 104, pipe.book);
    CHECK_FALSE(bad.ok);
    CHECK(bad.chain.size() == 1);
    CHECK(bad.chain.front().second == 4);
    const PeriodDecode outside =
        decode_period(spec, spec.samples.size() - 10, spec.samples.size() + 400, pipe.book);
    CHECK_FALSE(outside.ok);
}

TEST_CASE("diagnostics reflect the decode") {
    const TinyPipeline pipe = build_pipeline({0.9, 2.1, 3.0}, 10e3, 4e6, 12);
    const DecodeResult dec =
        demultiplex(pipe.iq, pipe.book, pipe.plan, pipe.f_env, 3.3);
    CHECK(dec.diagnostics.periods_total == static_cast<int>(dec.periods.size()));
    CHECK(dec.diagnostics.timing_quantum == pipe.plan.hop);
    CHECK(dec.diagnostics.mean_period_samples ==
          doctest::Approx(4e6 / 10e3).epsilon(0.05));
}
