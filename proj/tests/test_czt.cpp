#include <cmath>
#include <complex>

#include "doctest.h"
#include "vdm/czt.hpp"
#include "vdm/rng.hpp"

using namespace vdm;

namespace {
constexpr double kPi = 3.14159265358979323846;

Eigen::ArrayXcd random_block(Rng& rng, Eigen::Index n) {
    Eigen::ArrayXcd x(n);
    for (Eigen::Index i = 0; i < n; ++i)
        x[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    return x;
}

Eigen::ArrayXcd dft(const Eigen::ArrayXcd& x) {
    const Eigen::Index n = x.size();
    Eigen::ArrayXcd out(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        std::complex<double> acc{0.0, 0.0};
        for (Eigen::Index k = 0; k < n; ++k)
            acc += x[k] * std::polar(1.0, -2.0 * kPi * static_cast<double>(m) *
                                              static_cast<double>(k) /
                                              static_cast<double>(n));
        out[m] = acc;
    }
    return out;
}

double rel_err(const Eigen::ArrayXcd& a, const Eigen::ArrayXcd& b) {
    return std::sqrt((a - b).abs2().sum() / std::max(1e-300, b.abs2().sum()));
}
} // namespace

TEST_CASE("degenerate arc reproduces the DFT") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 8 + static_cast<Eigen::Index>(rng.uniform() * 500.0);
        const Eigen::ArrayXcd x = random_block(rng, n);
        const double fs = 1e6;
        // Bins at k*fs/n, inclusive endpoints 0 .. fs*(n-1)/n.
        const Eigen::ArrayXcd via_czt =
            czt(x, static_cast<int>(n), 0.0, fs * static_cast<double>(n - 1) / n, fs);
        CHECK(rel_err(via_czt, dft(x)) <= 1e-9);
    }
}

TEST_CASE("Bluestein path matches direct evaluation on arbitrary arcs") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 16 + static_cast<Eigen::Index>(rng.uniform() * 2032.0);
        const int bins = 32 + static_cast<int>(rng.uniform() * 480.0);
        const double fs = 4e6;
        const double f0 = rng.uniform(0.0, 1e6);
        const double f1 = f0 + rng.uniform(50e3, 1.5e6);
        const Eigen::ArrayXcd x = random_block(rng, n);

        const CztPlanExec plan(n, bins, f0, f1, fs);
        CHECK(rel_err(plan.transform(x), czt_direct(x, bins, f0, f1, fs)) <= 1e-9);
    }
}

TEST_CASE("plans are reusable across blocks") {
    Rng rng(3);
    const CztPlanExec plan(300, 128, 100e3, 1e6, 4e6);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::ArrayXcd x = random_block(rng, 300);
        CHECK(rel_err(plan.transform(x), czt_direct(x, 128, 100e3, 1e6, 4e6)) <= 1e-9);
    }
    CHECK(plan.bin_freq(0) == doctest::Approx(100e3));
    CHECK(plan.bin_freq(127) == doctest::Approx(1e6));
    CHECK(plan.bin_spacing() == doctest::Approx(900e3 / 127.0));
}

TEST_CASE("a pure tone peaks at its own bin") {
    const double fs = 4e6, f_tone = 430e3;
    const Eigen::Index n = 1024;
    Eigen::ArrayXcd x(n);
    for (Eigen::Index i = 0; i < n; ++i)
        x[i] = std::polar(1.0, 2.0 * kPi * f_tone * static_cast<double>(i) / fs);
    const int bins = 451;
    const Eigen::ArrayXcd spec = czt(x, bins, 100e3, 1e6, fs);
    Eigen::Index peak = 0;
    spec.abs().maxCoeff(&peak);
    const double peak_freq = 100e3 + static_cast<double>(peak) * 900e3 / (bins - 1);
    CHECK(std::abs(peak_freq - f_tone) <= 900e3 / (bins - 1));
}
