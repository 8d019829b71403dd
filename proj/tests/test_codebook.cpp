#include <cmath>
#include <cstdint>
#include <set>

#include "doctest.h"
#include "vdm/codebook.hpp"
#include "vdm/tag_frontend.hpp"

using namespace vdm;

namespace {
VdmCodebook make_book(int n) {
    VdmConfig cfg;
    cfg.n_sensors = n;
    return VdmCodebook(cfg, VcoModel{});
}
} // namespace

TEST_CASE("weights are binary with the heaviest sensor first") {
    const VdmCodebook book = make_book(5);
    const double denom = static_cast<double>((1 << 5) - 1);
    for (int i = 0; i < 5; ++i) {
        const double expect = 1.0 * static_cast<double>(1 << (5 - 1 - i)) / denom;
        CHECK(book.weights()[i] == doctest::Approx(expect).epsilon(1e-15));
    }
    CHECK(book.weights()[0] > book.weights()[4]);
}

TEST_CASE("levels are distinct and uniformly spaced for every sensor count") {
    for (int n = 1; n <= 8; ++n) {
        const VdmCodebook book = make_book(n);
        REQUIRE(book.level_count() == (1 << n));
        const double step = book.level_volts(1) - book.level_volts(0);
        REQUIRE(step > 0.0);
        for (int k = 0; k + 1 < book.level_count(); ++k) {
            const double gap = book.level_volts(k + 1) - book.level_volts(k);
            CHECK(std::abs(gap - step) <= 1e-12 * step);
        }
        CHECK(book.level_volts(0) == 0.0);
        CHECK(book.level_volts(book.level_count() - 1) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("mask and level index are a bijection") {
    for (int n : {2, 5, 8}) {
        const VdmCodebook book = make_book(n);
        std::set<std::uint32_t> seen;
        for (int k = 0; k < book.level_count(); ++k) {
            const std::uint32_t mask = book.mask_of_level(k);
            CHECK(seen.insert(mask).second);
            CHECK(book.level_of_mask(mask) == k);
            // The level index is the binary number formed by the weights:
            // sensor i (bit i-1) contributes 2^(n-i).
            int expect = 0;
            for (int i = 0; i < n; ++i)
                if (mask & (1u << i)) expect += 1 << (n - 1 - i);
            CHECK(k == expect);
        }
    }
}

TEST_CASE("frequency map is monotone decreasing over the configured band") {
    const VdmCodebook book = make_book(5);
    CHECK(book.freq_of_level(0) == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(book.freq_of_level(book.level_count() - 1) ==
          doctest::Approx(100e3).epsilon(1e-12));
    for (int k = 0; k + 1 < book.level_count(); ++k)
        CHECK(book.freq_of_level(k) > book.freq_of_level(k + 1));
    // Uniform voltage spacing maps to uniform frequency spacing through the
    // affine oscillator model.
    const double df = book.freq_of_level(0) - book.freq_of_level(1);
    for (int k = 0; k + 1 < book.level_count(); ++k)
        CHECK(book.freq_of_level(k) - book.freq_of_level(k + 1) ==
              doctest::Approx(df).epsilon(1e-9));
}

TEST_CASE("preset coefficient makes the full set hit the target") {
    for (int n : {1, 3, 6}) {
        VdmConfig cfg;
        cfg.n_sensors = n;
        const double expect = (cfg.v_s / cfg.v_target_max) *
                              (static_cast<double>((1 << n) - 1) /
                               static_cast<double>(1 << (n - 1)));
        CHECK(cfg.alpha() == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("duty matrix rows mirror the level masks") {
    const VdmCodebook book = make_book(3);
    const Eigen::MatrixXd duty = book.duty_matrix();
    REQUIRE(duty.rows() == 8);
    REQUIRE(duty.cols() == 3);
    for (int k = 0; k < 8; ++k) {
        const std::uint32_t mask = book.mask_of_level(k);
        for (int i = 0; i < 3; ++i)
            CHECK(duty(k, i) == ((mask >> i) & 1u ? 1.0 : 0.0));
    }
}

TEST_CASE("summed streams land exactly on codebook levels") {
    const int n = 4;
    const VdmCodebook book = make_book(n);
    const double v_s = 3.3;
    const Index len = 64;

    // Hand-built PWM patterns with distinct fall times.
    std::vector<PwmStream> pwms;
    for (int i = 0; i < n; ++i) {
        PwmStream st;
        st.v_s = v_s;
        Eigen::ArrayXd lv = Eigen::ArrayXd::Zero(len);
        const Index fall = 8 + 12 * i;
        for (Index k = 0; k < fall; ++k) lv[k] = v_s;
        st.levels = SampleSeries(lv, 1e6);
        st.period_starts = {0};
        st.fall_indices = {fall};
        pwms.push_back(std::move(st));
    }

    const SampleSeries sum = sum_streams(pwms, book);
    REQUIRE(sum.size() == len);
    for (Index k = 0; k < len; ++k) {
        std::uint32_t mask = 0;
        for (int i = 0; i < n; ++i)
            if (pwms[static_cast<std::size_t>(i)].levels.samples[k] > 0.0)
                mask |= 1u << i;
        CHECK(sum.samples[k] == book.level_volts(book.level_of_mask(mask)));
    }
}

TEST_CASE("configuration bounds are enforced") {
    VdmConfig cfg;
    cfg.n_sensors = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.n_sensors = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.n_sensors = 4;
    CHECK_NOTHROW(cfg.validate());
}
