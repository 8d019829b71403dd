// Voltage-division multiplexing codebook: binary-weighted per-sensor
// contributions, the 2^N subset-sum levels, and their frequency mapping.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vdm/modem.hpp"
#include "vdm/sample_series.hpp"

namespace vdm {

struct PwmStream; // tag_frontend.hpp

struct VdmConfig {
    int n_sensors = 3;          // 1..8
    double v_s = 3.3;           // PWM high level, volts
    double r_f = 100e3;         // feedback resistor, ohms
    double v_target_max = 1.0;  // full-set summed voltage, volts

    void validate() const;
    // Preset coefficient making the all-active sum equal v_target_max:
    // alpha = (V_s / V_target_max) * (2^N - 1) / 2^(N-1).
    double alpha() const;
};

// Sensor i (1-based) carries weight w_i = V_target_max * 2^(N-i) / (2^N - 1);
// sensor 1 is the heaviest. In a bitmask, bit (i-1) marks sensor i. Level
// index k equals the integer formed by the active weights, so the ascending
// level order is simply k = 0 .. 2^N - 1 and all levels are exact multiples
// of the smallest weight.
class VdmCodebook {
public:
    VdmCodebook(const VdmConfig& cfg, const VcoModel& vco);

    int sensor_count() const { return n_; }
    int level_count() const { return 1 << n_; }
    double v_target_max() const { return cfg_.v_target_max; }
    const VdmConfig& config() const { return cfg_; }
    const VcoModel& vco() const { return vco_; }
    const Eigen::ArrayXd& weights() const { return weights_; }

    double level_volts(int level_index) const;
    double freq_of_level(int level_index) const;
    std::uint32_t mask_of_level(int level_index) const;
    int level_of_mask(std::uint32_t mask) const;

    // 2^N x N matrix; entry (L, i) is 1 iff sensor i+1 is active in level L.
    Eigen::MatrixXd duty_matrix() const;

    // level_index,bitmask,volts,hertz table.
    void write_csv(const std::string& path) const;

private:
    VdmConfig cfg_;
    VcoModel vco_;
    int n_;
    Eigen::ArrayXd weights_;
    std::vector<double> level_volts_;
    std::vector<double> level_hz_;
};

VdmCodebook build_codebook(const VdmConfig& cfg, const VcoModel& vco);

// Sample-wise weighted sum of the PWM streams; every output value is exactly
// a codebook level because the inputs are binary and the levels are computed
// from the same weights.
SampleSeries sum_streams(const std::vector<PwmStream>& pwms, const VdmCodebook& book);

std::uint32_t decode_level(const VdmCodebook& book, int level_index);

} // namespace vdm
