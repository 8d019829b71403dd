#include "vdm/codebook.hpp"

#include <cmath>
#include <fstream>

#include "vdm/tag_frontend.hpp"

namespace vdm {

void VdmConfig::validate() const {
    if (n_sensors < 1 || n_sensors > 8)
        throw ConfigError("VdmConfig: n_sensors must be in 1..8");
    if (v_s <= 0.0) throw ConfigError("VdmConfig: v_s must be positive");
    if (r_f <= 0.0) throw ConfigError("VdmConfig: r_f must be positive");
    if (v_target_max <= 0.0)
        throw ConfigError("VdmConfig: v_target_max must be positive");
}

double VdmConfig::alpha() const {
    const double full = static_cast<double>((1u << n_sensors) - 1u);
    const double top = std::pow(2.0, n_sensors - 1);
    return (v_s / v_target_max) * full / top;
}

VdmCodebook::VdmCodebook(const VdmConfig& cfg, const VcoModel& vco)
    : cfg_(cfg), vco_(vco), n_(cfg.n_sensors) {
    cfg_.validate();
    vco_.validate();

    const int levels = 1 << n_;
    const double denom = static_cast<double>(levels - 1);
    const double step = cfg_.v_target_max / denom;

    weights_.resize(n_);
    for (int i = 1; i <= n_; ++i)
        weights_[i - 1] = step * static_cast<double>(1 << (n_ - i));

    level_volts_.resize(levels);
    level_hz_.resize(levels);
    for (int k = 0; k < levels; ++k) {
        level_volts_[k] = step * static_cast<double>(k);
        level_hz_[k] = volts_to_hz(vco_, level_volts_[k]);
    }

    // Construction-time verification of the scheme's guarantees.
    for (int k = 1; k < levels; ++k) {
        const double gap = level_volts_[k] - level_volts_[k - 1];
        if (!(gap > 0.0))
            throw ConfigError("VdmCodebook: levels not strictly increasing");
        if (std::abs(gap - step) > 1e-12 * step)
            throw ConfigError("VdmCodebook: level spacing not uniform");
        if (level_hz_[k] >= level_hz_[k - 1])
            throw ConfigError(
                "VdmCodebook: level frequencies collide; spacing below the VCO "
                "resolution floor");
    }
}

double VdmCodebook::level_volts(int level_index) const {
    if (level_index < 0 || level_index >= level_count())
        throw DimensionError("VdmCodebook: level index out of range");
    return level_volts_[level_index];
}

double VdmCodebook::freq_of_level(int level_index) const {
    if (level_index < 0 || level_index >= level_count())
        throw DimensionError("VdmCodebook: level index out of range");
    return level_hz_[level_index];
}

std::uint32_t VdmCodebook::mask_of_level(int level_index) const {
    if (level_index < 0 || level_index >= level_count())
        throw DimensionError("VdmCodebook: level index out of range");
    // Sensor i contributes 2^(N-i) to the level index.
    std::uint32_t mask = 0;
    for (int i = 1; i <= n_; ++i)
        if (level_index & (1 << (n_ - i))) mask |= 1u << (i - 1);
    return mask;
}

int VdmCodebook::level_of_mask(std::uint32_t mask) const {
    if (mask >= (1u << n_))
        throw DimensionError("VdmCodebook: mask out of range");
    int k = 0;
    for (int i = 1; i <= n_; ++i)
        if (mask & (1u << (i - 1))) k |= 1 << (n_ - i);
    return k;
}

Eigen::MatrixXd VdmCodebook::duty_matrix() const {
    const int levels = level_count();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(levels, n_);
    for (int k = 0; k < levels; ++k) {
        const std::uint32_t mask = mask_of_level(k);
        for (int i = 0; i < n_; ++i)
            if (mask & (1u << i)) m(k, i) = 1.0;
    }
    return m;
}

void VdmCodebook::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("VdmCodebook::write_csv: cannot open " + path);
    os << "level_index,bitmask,volts,hertz\n";
    os.precision(17);
    for (int k = 0; k < level_count(); ++k)
        os << k << "," << mask_of_level(k) << "," << level_volts_[k] << ","
           << level_hz_[k] << "\n";
    if (!os) throw IoError("VdmCodebook::write_csv: write failed for " + path);
}

VdmCodebook build_codebook(const VdmConfig& cfg, const VcoModel& vco) {
    return VdmCodebook(cfg, vco);
}

std::uint32_t decode_level(const VdmCodebook& book, int level_index) {
    return book.mask_of_level(level_index);
}

SampleSeries sum_streams(const std::vector<PwmStream>& pwms, const VdmCodebook& book) {
    if (static_cast<int>(pwms.size()) != book.sensor_count())
        throw DimensionError("sum_streams: channel count does not match codebook");
    const Index n = pwms.front().levels.size();
    const double rate = pwms.front().levels.sample_rate;
    for (const auto& p : pwms) {
        if (p.levels.size() != n || p.levels.sample_rate != rate)
            throw DimensionError("sum_streams: length or rate mismatch across channels");
    }

    const int n_sensors = book.sensor_count();
    Eigen::ArrayXd out(n);
    const double step = book.v_target_max() / static_cast<double>(book.level_count() - 1);
    for (Index t = 0; t < n; ++t) {
        int k = 0;
        for (int i = 0; i < n_sensors; ++i)
            if (pwms[i].levels.samples[t] > 0.0) k |= 1 << (n_sensors - 1 - i);
        out[t] = step * static_cast<double>(k);
    }
    return SampleSeries(std::move(out), rate, pwms.front().levels.t0);
}

} // namespace vdm
