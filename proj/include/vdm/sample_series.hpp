// Core sample containers: real-valued uniformly sampled waveforms and
// complex baseband captures.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <string>

#include "vdm/errors.hpp"

namespace vdm {

using Index = Eigen::Index;

// Uniformly sampled real waveform. Slicing preserves the sample rate and
// shifts t0 so absolute time is consistent.
struct SampleSeries {
    Eigen::ArrayXd samples;
    double sample_rate = 0.0; // Hz
    double t0 = 0.0;          // seconds

    SampleSeries() = default;
    SampleSeries(Eigen::ArrayXd s, double rate, double start = 0.0)
        : samples(std::move(s)), sample_rate(rate), t0(start) {}

    Index size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
    double time_of(Index i) const { return t0 + static_cast<double>(i) / sample_rate; }

    void require_valid(const char* who) const {
        if (sample_rate <= 0.0)
            throw ConfigError(std::string(who) + ": sample_rate must be positive");
        if (samples.size() == 0)
            throw DimensionError(std::string(who) + ": empty series");
    }

    SampleSeries slice(Index start, Index count) const {
        if (start < 0 || count < 0 || start + count > samples.size())
            throw DimensionError("SampleSeries::slice: range out of bounds");
        return SampleSeries(samples.segment(start, count), sample_rate,
                            t0 + static_cast<double>(start) / sample_rate);
    }
};

// Complex baseband capture with band metadata.
struct IqCapture {
    Eigen::ArrayXcd samples;
    double sample_rate = 0.0; // Hz
    double band_low = 0.0;    // Hz
    double band_high = 0.0;   // Hz
    std::map<std::string, std::string> meta;

    Index size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

    void require_valid(const char* who) const {
        if (sample_rate <= 0.0)
            throw ConfigError(std::string(who) + ": sample_rate must be positive");
        if (!(band_low < band_high && band_high <= sample_rate))
            throw ConfigError(std::string(who) +
                              ": band must satisfy band_low < band_high <= sample_rate");
    }
};

} // namespace vdm
