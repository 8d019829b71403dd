// Reconstruction quality metric and the alignment/resampling helpers that
// feed it.
#pragma once

#include "vdm/sample_series.hpp"

namespace vdm {

// 10*log10(||x||^2 / ||x - xhat||^2). Returns +infinity when the residual is
// exactly zero. Throws UndefinedMetricError for an all-zero reference and
// DimensionError on length or rate mismatch.
double snr_db(const SampleSeries& reference, const SampleSeries& estimate);

// Cap used when an SNR value is serialized, keeping CSV/JSON finite.
inline constexpr double kSnrReportCapDb = 300.0;
double capped_snr_db(double snr);

// Zero-order-hold resampling; output sample k holds the most recent input
// sample at or before its time.
SampleSeries resample_hold(const SampleSeries& series, double new_rate);

struct AlignResult {
    Index lag = 0;        // estimate[n] ~ reference[n - lag]
    SampleSeries aligned; // estimate shifted by lag, truncated to the overlap
    Index ref_start = 0;  // first reference index covered by `aligned`
};

// Integer-lag alignment by maximum normalized cross-correlation over
// [-max_lag, max_lag]. Constant inputs throw AlignmentError.
AlignResult align_and_lag(const SampleSeries& reference, const SampleSeries& estimate,
                          Index max_lag);

// snr_db after align_and_lag, evaluated on the overlapping region.
double aligned_snr_db(const SampleSeries& reference, const SampleSeries& estimate,
                      Index max_lag);

} // namespace vdm
