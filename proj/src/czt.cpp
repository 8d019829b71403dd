#include "vdm/czt.hpp"

#include <cmath>
#include <unsupported/Eigen/FFT>
#include <vector>

namespace vdm {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;

void check_arc(int bins, double f_start, double f_end, double sample_rate) {
    if (bins < 2) throw ConfigError("czt: need at least 2 bins");
    if (sample_rate <= 0.0) throw ConfigError("czt: sample_rate must be positive");
    if (!(0.0 <= f_start && f_start < f_end && f_end <= sample_rate))
        throw ConfigError("czt: frequency arc outside [0, sample_rate]");
}

Eigen::Index next_pow2(Eigen::Index n) {
    Eigen::Index p = 1;
    while (p < n) p <<= 1;
    return p;
}
} // namespace

Eigen::ArrayXcd czt_direct(const Eigen::Ref<const Eigen::ArrayXcd>& block, int bins,
                           double f_start, double f_end, double sample_rate) {
    check_arc(bins, f_start, f_end, sample_rate);
    if (block.size() < 1) throw DimensionError("czt_direct: empty block");

    const double spacing = (f_end - f_start) / static_cast<double>(bins - 1);
    Eigen::ArrayXcd out(bins);
    for (int m = 0; m < bins; ++m) {
        const double f = f_start + m * spacing;
        std::complex<double> acc(0.0, 0.0);
        for (Eigen::Index n = 0; n < block.size(); ++n) {
            const double angle = -2.0 * kPi * f * static_cast<double>(n) / sample_rate;
            acc += block[n] * std::polar(1.0, angle);
        }
        out[m] = acc;
    }
    return out;
}

CztPlanExec::CztPlanExec(Eigen::Index window_len, int bins, double f_start, double f_end,
                         double sample_rate)
    : n_(window_len), m_(bins), f_start_(f_start), f_end_(f_end), sample_rate_(sample_rate) {
    check_arc(bins, f_start, f_end, sample_rate);
    if (window_len < 1) throw DimensionError("CztPlanExec: empty window");

    bin_spacing_ = (f_end - f_start) / static_cast<double>(bins - 1);
    fft_len_ = next_pow2(n_ + m_ - 1);

    // X[m] = w^(m^2/2) * sum_n (x[n] a^n w^(n^2/2)) w^(-(m-n)^2/2)
    // with a = exp(-j*2*pi*f_start/fs) and w = exp(-j*2*pi*spacing/fs).
    chirp_a_.resize(n_);
    for (Eigen::Index n = 0; n < n_; ++n) {
        const double nn = static_cast<double>(n);
        const double angle =
            -(2.0 * kPi * f_start_ * nn + kPi * bin_spacing_ * nn * nn) / sample_rate_;
        chirp_a_[n] = std::polar(1.0, angle);
    }
    chirp_out_.resize(m_);
    for (int m = 0; m < m_; ++m) {
        const double mm = static_cast<double>(m);
        chirp_out_[m] = std::polar(1.0, -kPi * bin_spacing_ * mm * mm / sample_rate_);
    }

    std::vector<std::complex<double>> filt(static_cast<std::size_t>(fft_len_),
                                           std::complex<double>(0.0, 0.0));
    for (Eigen::Index k = 0; k < std::max<Eigen::Index>(n_, m_); ++k) {
        const double kk = static_cast<double>(k);
        const std::complex<double> v =
            std::polar(1.0, kPi * bin_spacing_ * kk * kk / sample_rate_);
        if (k < m_) filt[static_cast<std::size_t>(k)] = v;
        if (k > 0 && k < n_) filt[static_cast<std::size_t>(fft_len_ - k)] = v;
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> filt_fft;
    fft.fwd(filt_fft, filt);
    filter_fft_ = Eigen::Map<const Eigen::ArrayXcd>(filt_fft.data(), fft_len_);
}

Eigen::ArrayXcd CztPlanExec::transform(const Eigen::Ref<const Eigen::ArrayXcd>& block) const {
    if (block.size() != n_)
        throw DimensionError("CztPlanExec::transform: block length mismatch");

    std::vector<std::complex<double>> y(static_cast<std::size_t>(fft_len_),
                                        std::complex<double>(0.0, 0.0));
    for (Eigen::Index n = 0; n < n_; ++n)
        y[static_cast<std::size_t>(n)] = block[n] * chirp_a_[n];

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> y_fft;
    fft.fwd(y_fft, y);
    for (Eigen::Index i = 0; i < fft_len_; ++i)
        y_fft[static_cast<std::size_t>(i)] *= filter_fft_[i];
    std::vector<std::complex<double>> conv;
    fft.inv(conv, y_fft);

    Eigen::ArrayXcd out(m_);
    for (int m = 0; m < m_; ++m)
        out[m] = conv[static_cast<std::size_t>(m)] * chirp_out_[m];
    return out;
}

Eigen::ArrayXcd czt(const Eigen::Ref<const Eigen::ArrayXcd>& block, int bins,
                    double f_start, double f_end, double sample_rate) {
    // Direct evaluation is cheaper for tiny blocks and doubles as a second
    // algebraic route in tests.
    if (block.size() * static_cast<Eigen::Index>(bins) <= 4096)
        return czt_direct(block, bins, f_start, f_end, sample_rate);
    return CztPlanExec(block.size(), bins, f_start, f_end, sample_rate).transform(block);
}

} // namespace vdm
