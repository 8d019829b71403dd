// File formats: the VDMIQ1 capture container and two-column series CSV.
#pragma once

#include <string>

#include "vdm/sample_series.hpp"

namespace vdm {

// VDMIQ1 layout:
//   magic "VDMIQ1\n"
//   u32 little-endian byte length of a UTF-8 metadata block
//   metadata block: "key=value\n" lines; sample_rate, band_low, band_high
//     are required, remaining lines populate IqCapture::meta
//   interleaved float32 little-endian (I, Q) pairs until EOF
void write_iq(const std::string& path, const IqCapture& capture);
IqCapture read_iq(const std::string& path);

// Storage is single precision; pushing a capture through the on-disk
// representation in memory makes an in-process decode bit-identical to a
// decode of the written file.
IqCapture quantize_to_storage(const IqCapture& capture);

// CSV with a "t,value" header line.
void write_series_csv(const std::string& path, const SampleSeries& series);
SampleSeries read_series_csv(const std::string& path, double default_rate = 0.0);

} // namespace vdm
