// Brute-force reference implementations used to cross-check the library.
#pragma once

#include <vector>

#include "vdm/sample_series.hpp"

namespace vdm::oracle {

struct PwmTruth {
    std::vector<Index> period_starts;
    // falls[p][i]: first sample of period p where the ramp reaches sensor i's
    // value (period end when it never does).
    std::vector<std::vector<Index>> falls;
};

// Independent comparator model: scan the ramp sample by sample per period.
inline PwmTruth pwm_falls(const std::vector<SampleSeries>& sensors,
                          const SampleSeries& ramp) {
    const double peak = ramp.samples.maxCoeff();
    std::vector<Index> resets;
    for (Index i = 1; i < ramp.size(); ++i)
        if (ramp.samples[i] - ramp.samples[i - 1] < -0.5 * peak) resets.push_back(i);
    if (ramp.samples[0] == 0.0 && (resets.empty() || resets.front() != 0))
        resets.insert(resets.begin(), 0);

    PwmTruth truth;
    for (std::size_t p = 0; p + 1 < resets.size(); ++p) {
        const Index start = resets[p];
        const Index end = resets[p + 1];
        truth.period_starts.push_back(start);
        std::vector<Index> row;
        for (const auto& sensor : sensors) {
            Index fall = end;
            for (Index i = start; i < end; ++i) {
                double v = sensor.samples[i];
                if (v < 0.0) v = 0.0;
                if (v > peak) v = peak;
                if (ramp.samples[i] >= v) {
                    fall = i;
                    break;
                }
            }
            row.push_back(fall);
        }
        truth.falls.push_back(std::move(row));
    }
    return truth;
}

} // namespace vdm::oracle
