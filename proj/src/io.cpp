#include "vdm/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace vdm {
namespace {

void put_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

constexpr char kMagic[] = "VDMIQ1\n";
constexpr std::size_t kMagicLen = 7;

} // namespace

void write_iq(const std::string& path, const IqCapture& capture) {
    capture.require_valid("write_iq");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_iq: cannot open " + path);

    std::string meta;
    meta += "sample_rate=" + format_double(capture.sample_rate) + "\n";
    meta += "band_low=" + format_double(capture.band_low) + "\n";
    meta += "band_high=" + format_double(capture.band_high) + "\n";
    for (const auto& [k, v] : capture.meta)
        meta += k + "=" + v + "\n";

    os.write(kMagic, kMagicLen);
    put_u32le(os, static_cast<std::uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));

    std::vector<float> buf(static_cast<std::size_t>(capture.samples.size()) * 2);
    for (Index i = 0; i < capture.samples.size(); ++i) {
        buf[2 * static_cast<std::size_t>(i)] = static_cast<float>(capture.samples[i].real());
        buf[2 * static_cast<std::size_t>(i) + 1] = static_cast<float>(capture.samples[i].imag());
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw IoError("write_iq: write failed for " + path);
}

IqCapture read_iq(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_iq: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
        throw FormatError("read_iq: bad magic at byte offset 0 in " + path);
    std::size_t off = kMagicLen;
    if (bytes.size() < off + 4)
        throw FormatError("read_iq: truncated header length at byte offset " +
                          std::to_string(off));
    const std::uint32_t meta_len = get_u32le(bytes.data() + off);
    off += 4;
    if (bytes.size() < off + meta_len)
        throw FormatError("read_iq: truncated metadata at byte offset " + std::to_string(off));
    std::string meta(reinterpret_cast<const char*>(bytes.data() + off), meta_len);
    off += meta_len;

    IqCapture capture;
    std::istringstream ms(meta);
    std::string line;
    while (std::getline(ms, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("read_iq: malformed metadata line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "sample_rate") capture.sample_rate = std::stod(value);
        else if (key == "band_low") capture.band_low = std::stod(value);
        else if (key == "band_high") capture.band_high = std::stod(value);
        else capture.meta[key] = value;
    }

    const std::size_t payload = bytes.size() - off;
    if (payload % (2 * sizeof(float)) != 0)
        throw FormatError("read_iq: IQ payload truncated at byte offset " +
                          std::to_string(bytes.size()));
    const std::size_t n = payload / (2 * sizeof(float));
    capture.samples.resize(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        float iv, qv;
        std::memcpy(&iv, bytes.data() + off + i * 8, 4);
        std::memcpy(&qv, bytes.data() + off + i * 8 + 4, 4);
        capture.samples[static_cast<Index>(i)] = std::complex<double>(iv, qv);
    }
    capture.require_valid("read_iq");
    return capture;
}

IqCapture quantize_to_storage(const IqCapture& capture) {
    IqCapture out = capture;
    // Flat view over the interleaved components; round each through float32
    // exactly as the file writer does.
    auto* comp = reinterpret_cast<double*>(out.samples.data());
    const Index n = 2 * out.samples.size();
    for (Index i = 0; i < n; ++i) {
        volatile float narrowed = static_cast<float>(comp[i]);
        comp[i] = static_cast<double>(narrowed);
    }
    return out;
}

void write_series_csv(const std::string& path, const SampleSeries& series) {
    series.require_valid("write_series_csv");
    std::ofstream os(path);
    if (!os) throw IoError("write_series_csv: cannot open " + path);
    os << "t,value\n";
    os.precision(17);
    for (Index i = 0; i < series.size(); ++i)
        os << series.time_of(i) << "," << series.samples[i] << "\n";
    if (!os) throw IoError("write_series_csv: write failed for " + path);
}

SampleSeries read_series_csv(const std::string& path, double default_rate) {
    std::ifstream is(path);
    if (!is) throw IoError("read_series_csv: cannot open " + path);
    std::string line;
    std::vector<double> ts, vs;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line_no == 1) continue; // header
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError("read_series_csv: missing comma at line " +
                              std::to_string(line_no) + " of " + path);
        try {
            ts.push_back(std::stod(line.substr(0, comma)));
            vs.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw FormatError("read_series_csv: bad number at line " +
                              std::to_string(line_no) + " of " + path);
        }
    }
    if (vs.empty())
        throw FormatError("read_series_csv: no data rows in " + path);

    double rate = default_rate;
    if (ts.size() >= 2) {
        const double dt = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
        if (dt > 0.0) rate = 1.0 / dt;
    }
    if (rate <= 0.0)
        throw FormatError("read_series_csv: cannot infer sample rate from " + path);
    Eigen::ArrayXd samples =
        Eigen::Map<const Eigen::ArrayXd>(vs.data(), static_cast<Index>(vs.size()));
    return SampleSeries(std::move(samples), rate, ts.front());
}

} // namespace vdm
