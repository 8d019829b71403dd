#include "vdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vdm {

double snr_db(const SampleSeries& reference, const SampleSeries& estimate) {
    reference.require_valid("snr_db");
    estimate.require_valid("snr_db");
    if (reference.size() != estimate.size())
        throw DimensionError("snr_db: length mismatch");
    if (reference.sample_rate != estimate.sample_rate)
        throw DimensionError("snr_db: sample_rate mismatch");

    const double ref_power = reference.samples.square().sum();
    if (ref_power == 0.0)
        throw UndefinedMetricError("snr_db: all-zero reference");
    const double res_power = (reference.samples - estimate.samples).square().sum();
    if (res_power == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(ref_power / res_power);
}

double capped_snr_db(double snr) {
    return std::min(snr, kSnrReportCapDb);
}

SampleSeries resample_hold(const SampleSeries& series, double new_rate) {
    series.require_valid("resample_hold");
    if (new_rate <= 0.0)
        throw ConfigError("resample_hold: new_rate must be positive");

    const auto n_in = series.size();
    const double ratio = series.sample_rate / new_rate;
    const auto n_out = static_cast<Index>(
        std::floor(static_cast<double>(n_in) * new_rate / series.sample_rate + 1e-9));
    Eigen::ArrayXd out(std::max<Index>(n_out, 1));
    for (Index k = 0; k < out.size(); ++k) {
        auto src = static_cast<Index>(std::floor(static_cast<double>(k) * ratio + 1e-9));
        src = std::min(src, n_in - 1);
        out[k] = series.samples[src];
    }
    return SampleSeries(std::move(out), new_rate, series.t0);
}

AlignResult align_and_lag(const SampleSeries& reference, const SampleSeries& estimate,
                          Index max_lag) {
    reference.require_valid("align_and_lag");
    estimate.require_valid("align_and_lag");
    if (max_lag < 0 || max_lag >= estimate.size())
        throw DimensionError("align_and_lag: max_lag must be in [0, len(estimate))");

    const auto& x = reference.samples;
    const auto& y = estimate.samples;

    double best_score = -std::numeric_limits<double>::infinity();
    Index best_lag = 0;
    bool any_defined = false;

    for (Index lag = -max_lag; lag <= max_lag; ++lag) {
        // overlap: n in reference coordinates, y index n + lag
        const Index n_lo = std::max<Index>(0, -lag);
        const Index n_hi = std::min<Index>(x.size(), y.size() - lag);
        const Index len = n_hi - n_lo;
        if (len < 2) continue;

        auto xs = x.segment(n_lo, len);
        auto ys = y.segment(n_lo + lag, len);
        const double mx = xs.mean();
        const double my = ys.mean();
        const double vx = (xs - mx).square().sum();
        const double vy = (ys - my).square().sum();
        if (vx == 0.0 || vy == 0.0) continue;
        const double score = ((xs - mx) * (ys - my)).sum() / std::sqrt(vx * vy);
        any_defined = true;
        if (score > best_score) {
            best_score = score;
            best_lag = lag;
        }
    }
    if (!any_defined)
        throw AlignmentError("align_and_lag: degenerate (constant) input");

    const Index n_lo = std::max<Index>(0, -best_lag);
    const Index n_hi = std::min<Index>(x.size(), y.size() - best_lag);
    AlignResult result;
    result.lag = best_lag;
    result.ref_start = n_lo;
    result.aligned = SampleSeries(y.segment(n_lo + best_lag, n_hi - n_lo).eval(),
                                  estimate.sample_rate,
                                  reference.t0 + static_cast<double>(n_lo) / reference.sample_rate);
    return result;
}

double aligned_snr_db(const SampleSeries& reference, const SampleSeries& estimate,
                      Index max_lag) {
    const AlignResult a = align_and_lag(reference, estimate, max_lag);
    const SampleSeries ref_overlap = reference.slice(a.ref_start, a.aligned.size());
    return snr_db(ref_overlap, a.aligned);
}

} // namespace vdm
