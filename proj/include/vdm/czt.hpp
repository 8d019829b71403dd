// Chirp-Z transform over a frequency arc: direct evaluation and the
// Bluestein three-convolution method with precomputed state.
#pragma once

#include <Eigen/Dense>
#include <complex>

#include "vdm/errors.hpp"

namespace vdm {

// Evaluates X[m] = sum_n x[n] * exp(-j*2*pi*f_m*n/fs) at M uniformly spaced
// points f_m from f_start to f_end inclusive. O(N*M); the oracle path.
Eigen::ArrayXcd czt_direct(const Eigen::Ref<const Eigen::ArrayXcd>& block, int bins,
                           double f_start, double f_end, double sample_rate);

// Same evaluation via Bluestein's algorithm. Reusable across blocks of the
// same length and arc; sliding spectrogram computation keeps one instance.
class CztPlanExec {
public:
    CztPlanExec(Eigen::Index window_len, int bins, double f_start, double f_end,
                double sample_rate);

    Eigen::ArrayXcd transform(const Eigen::Ref<const Eigen::ArrayXcd>& block) const;

    Eigen::Index window_len() const { return n_; }
    int bins() const { return m_; }
    double bin_freq(int m) const { return f_start_ + m * bin_spacing_; }
    double bin_spacing() const { return bin_spacing_; }

private:
    Eigen::Index n_;
    int m_;
    double f_start_, f_end_, sample_rate_, bin_spacing_;
    Eigen::Index fft_len_;
    Eigen::ArrayXcd chirp_a_;      // a^-n * w^(n^2/2), n in [0, N)
    Eigen::ArrayXcd chirp_out_;    // w^(m^2/2), m in [0, M)
    Eigen::ArrayXcd filter_fft_;   // FFT of w^(-k^2/2), k in (-N, M)
};

// Convenience single-shot wrapper.
Eigen::ArrayXcd czt(const Eigen::Ref<const Eigen::ArrayXcd>& block, int bins,
                    double f_start, double f_end, double sample_rate);

} // namespace vdm
