#include "vdm/rx.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace vdm {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;

// Magnitude ratio seen at a bin `df` away from a rectangular-windowed tone.
double kernel_ratio(double df, Index window_len, double sample_rate) {
    const double x = df * static_cast<double>(window_len) / sample_rate;
    if (x == 0.0) return 1.0;
    return std::abs(std::sin(kPi * x) / (kPi * x));
}

int popcount(std::uint32_t v) { return __builtin_popcount(v); }
} // namespace

void CztPlan::validate(double sample_rate) const {
    if (window_len < 1) throw ConfigError("CztPlan: window_len must be positive");
    if (bins < 2) throw ConfigError("CztPlan: need at least 2 bins");
    if (hop < 1) throw ConfigError("CztPlan: hop must be positive");
    if (!(0.0 < f_start && f_start < f_end && f_end <= sample_rate))
        throw ConfigError("CztPlan: band must satisfy 0 < f_start < f_end <= sample_rate");
}

int CztPlan::bin_of_freq(double f) const {
    const int b = static_cast<int>(std::llround((f - f_start) / bin_spacing()));
    return std::clamp(b, 0, bins - 1);
}

CztPlan auto_plan(double sample_rate, double f_env, const VdmCodebook& book) {
    if (f_env <= 0.0) throw ConfigError("auto_plan: f_env must be positive");
    const double level_spacing = book.freq_of_level(0) - book.freq_of_level(1);
    const double period = sample_rate / f_env;

    CztPlan plan;
    plan.f_start = book.freq_of_level(book.level_count() - 1);
    plan.f_end = book.freq_of_level(0);

    // Window matched to the level spacing (one full beat of adjacent levels,
    // putting each level at the others' spectral nulls), but kept under half
    // the reference period.
    const double want = sample_rate / level_spacing;
    plan.window_len = static_cast<Index>(std::llround(std::min(want, 0.45 * period)));
    plan.window_len = std::max<Index>(plan.window_len, 16);
    // Small hop: edge timestamps quantize to one hop, and duty error maps to
    // volts at V_max * f_s per second of timing error.
    plan.hop = std::max<Index>(1, plan.window_len / 64);

    const double band = plan.f_end - plan.f_start;
    plan.bins = std::clamp(static_cast<int>(std::ceil(band / (level_spacing / 8.0))) + 1,
                           128, 1024);
    plan.validate(sample_rate);
    return plan;
}

ZoomSpectrogram sliding_spectrogram(const IqCapture& iq, const CztPlan& plan) {
    iq.require_valid("sliding_spectrogram");
    plan.validate(iq.sample_rate);
    const Index n = plan.window_len;
    if (iq.size() < n)
        throw InsufficientSignalError("sliding_spectrogram: capture shorter than one window");

    Eigen::ArrayXd taper = Eigen::ArrayXd::Ones(n);
    if (plan.taper == Taper::Hann) {
        for (Index i = 0; i < n; ++i)
            taper[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                             static_cast<double>(n - 1)));
    }

    const Index num_frames = (iq.size() - n) / plan.hop + 1;
    CztPlanExec exec(n, plan.bins, plan.f_start, plan.f_end, iq.sample_rate);

    ZoomSpectrogram spec;
    spec.plan = plan;
    spec.sample_rate = iq.sample_rate;
    spec.samples = iq.samples;
    spec.frames.resize(num_frames, plan.bins);
    spec.frame_times.resize(static_cast<std::size_t>(num_frames));
    Eigen::ArrayXcd block(n);
    for (Index f = 0; f < num_frames; ++f) {
        const Index start = f * plan.hop;
        spec.frame_times[static_cast<std::size_t>(f)] = start;
        block = iq.samples.segment(start, n) * taper;
        spec.frames.row(f) = exec.transform(block).abs().transpose();
    }
    return spec;
}

std::vector<Index> find_decrease_points(const Eigen::ArrayXd& trace, double peak_height,
                                        double gradient_threshold) {
    if (trace.size() < 3)
        throw DimensionError("find_decrease_points: trace must have at least 3 samples");
    if (peak_height < 0.0 || gradient_threshold < 0.0)
        throw ConfigError("find_decrease_points: thresholds must be non-negative");

    const Index dn = trace.size() - 1;
    Eigen::ArrayXd negd(dn);
    for (Index i = 0; i < dn; ++i) negd[i] = trace[i] - trace[i + 1];

    std::vector<Index> points;
    for (Index p = 0; p < dn; ++p) {
        if (negd[p] < peak_height) continue;
        if (p > 0 && negd[p] < negd[p - 1]) continue;
        if (p + 1 < dn && negd[p] < negd[p + 1]) continue;
        // Backtrack to where the fall began.
        Index s = p;
        while (s > 0 && negd[s - 1] >= gradient_threshold) --s;
        if (points.empty() || points.back() != s) points.push_back(s);
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    return points;
}

namespace {

// Shared detection helper: decrease points of `trace` with thresholds taken
// relative to its own derivative dynamics.
std::vector<Index> adaptive_decrease_points(const Eigen::ArrayXd& trace,
                                            const DecodeParams& params) {
    if (trace.size() < 3) return {};
    Eigen::ArrayXd negd(trace.size() - 1);
    for (Index i = 0; i + 1 < trace.size(); ++i) negd[i] = trace[i] - trace[i + 1];
    const double max_neg = negd.maxCoeff();
    if (max_neg <= 0.0) return {};
    return find_decrease_points(trace, params.peak_frac * max_neg,
                                params.grad_frac * max_neg);
}

// Frame where an edge starting at `from` levels off. A transition sweeps
// through the sliding window linearly, so the edge is a near-linear ramp from
// one plateau to the other, with the incoming tone's beat riding on it as
// roughly one ripple cycle across the ramp. A least-squares line through the
// mid-ramp averages the ripple out; the edge end is where that line meets the
// far plateau. The end of a bin's fall marks the transition sample exactly,
// for any segment length; likewise the top of a rise marks a segment start.
// sign > 0 follows falls, sign < 0 rises.
Index walk_edge_end(const Eigen::Ref<const Eigen::ArrayXd>& trace, Index from,
                    double sign, Index ramp, Index last) {
    const Index scan_last = std::min<Index>(from + ramp + 1, last);
    Index p = from;
    double steepest = 0.0;
    for (Index f = from; f < scan_last; ++f) {
        const double d = sign * (trace[f] - trace[f + 1]);
        if (d > steepest) {
            steepest = d;
            p = f;
        }
    }
    if (steepest <= 0.0) return from;

    double hi = sign * trace[from];
    for (Index f = from; f <= p; ++f) hi = std::max(hi, sign * trace[f]);
    const Index tail = std::min<Index>(from + ramp + 2, last);
    double lo = sign * trace[p];
    for (Index f = p; f <= tail; ++f) lo = std::min(lo, sign * trace[f]);
    const double span = hi - lo;
    if (span <= 0.0) return std::min<Index>(p + 1, last);

    // Fit between the last frame still near the top plateau and the first
    // frame down at the bottom one, so only this edge's flank is included.
    const double y_hi = lo + 0.85 * span, y_lo = lo + 0.15 * span;
    Index a = from;
    for (Index f = p; f >= from; --f)
        if (sign * trace[f] >= y_hi) {
            a = f;
            break;
        }
    Index b = tail;
    for (Index f = p; f <= tail; ++f)
        if (sign * trace[f] <= y_lo) {
            b = f;
            break;
        }
    double sf = 0.0, sy = 0.0, sff = 0.0, sfy = 0.0;
    const auto n = static_cast<double>(b - a + 1);
    for (Index f = a; f <= b; ++f) {
        const double x = static_cast<double>(f - a), y = sign * trace[f];
        sf += x;
        sy += y;
        sff += x * x;
        sfy += x * y;
    }
    const double det = n * sff - sf * sf;
    Index end = std::min<Index>(p + 1, last);
    if (det > 0.0) {
        const double slope = (n * sfy - sf * sy) / det;
        const double icept = (sy * sff - sf * sfy) / det;
        if (slope < 0.0) {
            const double cross = (lo - icept) / slope + static_cast<double>(a);
            end = static_cast<Index>(std::llround(cross));
        }
    }
    return std::clamp<Index>(end, p, std::min<Index>(tail, last));
}

} // namespace

std::vector<std::pair<Index, Index>> segment_periods(const ZoomSpectrogram& spec,
                                                     const VdmCodebook& book,
                                                     const DecodeParams& params) {
    const Index nf = spec.num_frames();
    if (nf < 3)
        throw InsufficientSignalError("segment_periods: spectrogram too short");

    const int full_level = book.level_count() - 1;
    const int bin = spec.plan.bin_of_freq(book.freq_of_level(full_level));
    Eigen::ArrayXd trace = spec.frames.col(bin);
    const double range = trace.maxCoeff() - trace.minCoeff();
    if (range <= 0.0)
        throw SyncFailureError("segment_periods: full-set level never appears "
                               "(flat magnitude at its bin)");

    const Index ramp = (spec.plan.window_len + spec.plan.hop - 1) / spec.plan.hop;
    const std::vector<Index> onsets_raw = adaptive_decrease_points(-trace, params);

    std::vector<Index> boundaries;
    for (Index dp : onsets_raw) {
        // Onset is genuine only if the level actually comes up afterwards.
        const Index probe = std::min<Index>(dp + ramp, nf - 1);
        if (trace[probe] - trace[dp] < 0.25 * range) continue;
        // The rise tops out when the window's leading edge leaves the reset
        // sample behind; that top is the period start.
        const Index top = walk_edge_end(trace, dp, -1.0, ramp, nf - 1);
        const Index boundary = spec.frame_times[static_cast<std::size_t>(top)];
        // The window ramp-in can split one rise into several derivative
        // peaks; onsets within two window lengths are the same reset.
        if (!boundaries.empty() &&
            boundary - boundaries.back() < 2 * spec.plan.window_len)
            continue;
        boundaries.push_back(boundary);
    }
    if (boundaries.size() < 2)
        throw SyncFailureError("segment_periods: found " +
                               std::to_string(boundaries.size()) +
                               " period onset(s); need at least 2 (no periodic "
                               "structure at the full-set level)");

    // When the full-set segment is shorter than the window its onset can be
    // missed entirely, leaving a gap spanning several reference periods.
    // The reference is near-periodic, so subdivide each gap at the median
    // period before refining.
    std::vector<Index> gaps;
    for (std::size_t i = 0; i + 1 < boundaries.size(); ++i)
        gaps.push_back(boundaries[i + 1] - boundaries[i]);
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2),
                     gaps.end());
    const Index med = gaps[gaps.size() / 2];
    std::vector<Index> filled;
    filled.push_back(boundaries.front());
    for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
        const Index gap = boundaries[i + 1] - boundaries[i];
        const Index parts = std::max<Index>(
            1, static_cast<Index>(std::llround(static_cast<double>(gap) /
                                               static_cast<double>(med))));
        for (Index m = 1; m <= parts; ++m)
            filled.push_back(boundaries[i] + gap * m / parts);
    }

    // Refine each boundary by matched filtering on the capture: just before a
    // reset the oscillator sits at the all-low tone, just after it at the
    // full-set tone. Maximize the summed normalized correlation energies of
    // those two tones over a window on each side.
    const double fs = spec.sample_rate;
    const double f_lo = book.freq_of_level(0);
    const double f_hi = book.freq_of_level(book.level_count() - 1);
    const Index w = std::max<Index>(32, spec.plan.window_len / 3);
    // The onset estimate can sit a full window early (the rise is smeared
    // over the window ramp), so the search must span at least that much.
    const Index r = spec.plan.window_len + 4 * spec.plan.hop;
    const Index n_samp = spec.samples.size();
    auto prefix = [&](double freq, Index lo, Index hi) {
        Eigen::ArrayXcd z(hi - lo + 1);
        const std::complex<double> step = std::polar(1.0, -2.0 * kPi * freq / fs);
        std::complex<double> demod = std::polar(
            1.0, -2.0 * kPi * std::fmod(freq * static_cast<double>(lo) / fs, 1.0));
        z[0] = {0.0, 0.0};
        for (Index m = lo; m < hi; ++m) {
            z[m - lo + 1] = z[m - lo] + spec.samples[m] * demod;
            demod *= step;
        }
        return z;
    };
    for (Index& b : filled) {
        const Index lo = std::max<Index>(b - r, w);
        const Index hi = std::min<Index>(b + r, n_samp - w);
        if (hi < lo) continue;
        const Eigen::ArrayXcd z_lo = prefix(f_lo, lo - w, hi);
        const Eigen::ArrayXcd z_hi = prefix(f_hi, lo, hi + w);
        double best = -1.0;
        Index best_t = b;
        for (Index t = lo; t <= hi; ++t) {
            const double s = std::norm(z_lo[t - lo + w] - z_lo[t - lo]) +
                             std::norm(z_hi[t - lo + w] - z_hi[t - lo]);
            if (s > best) {
                best = s;
                best_t = t;
            }
        }
        b = best_t;
    }
    std::sort(filled.begin(), filled.end());
    filled.erase(std::unique(filled.begin(), filled.end()), filled.end());

    std::vector<std::pair<Index, Index>> periods;
    for (std::size_t i = 0; i + 1 < filled.size(); ++i)
        if (filled[i + 1] - filled[i] > med / 2)
            periods.emplace_back(filled[i], filled[i + 1]);
    return periods;
}

PeriodDecode decode_period(const ZoomSpectrogram& spec, Index start, Index end,
                           const VdmCodebook& book, const DecodeParams& params) {
    PeriodDecode out;
    out.start = start;
    out.end = end;
    const Index period_len = end - start;
    const int n_sensors = book.sensor_count();
    const std::uint32_t full_mask = (1u << n_sensors) - 1u;

    // Every sensor's stream is high from the period start and falls exactly
    // once, so the whole period is parameterized by the n fall times, and for
    // a candidate fall vector the transmitted tone sequence is known. The
    // decoder fits the fall times by matched filtering directly on the
    // capture: per-level demodulated prefix sums make each candidate
    // segment's correlation O(1), and the per-segment magnitudes are combined
    // noncoherently so the fit does not depend on the oscillator phase at the
    // period boundary. Spectral leakage never enters; a competing level
    // hypothesis loses correlation energy exactly by its frequency distance.
    auto degenerate = [&](const std::string& why) {
        out.ok = false;
        out.note = why;
        out.chain.assign(1, {full_mask, period_len});
        return out;
    };
    if (start < 0 || end > spec.samples.size())
        return degenerate("period outside the captured range");
    if (period_len < 2 * static_cast<Index>(n_sensors) + 2)
        return degenerate("period too short to place the sensor falls");

    const int n_levels = book.level_count();
    const double fs = spec.sample_rate;

    // The segmenter's boundary can be off by a few window fractions, which
    // would shift every duty in the period by the same amount; the start
    // offset is therefore fitted alongside the fall times. `pad` samples
    // before the nominal start are included so the offset can move both ways,
    // and a short all-low "tail" segment ahead of the fitted start anchors it.
    const Index pad =
        std::min(start, std::min<Index>(std::max<Index>(32, spec.plan.window_len / 4),
                                        period_len / 4));

    // z(m, k) = sum of y * exp(-j*2*pi*f_k*x/fs) over the first m samples
    // counted from start - pad.
    const Index zbase = start - pad;
    Eigen::MatrixXcd z(pad + period_len + 1, n_levels);
    for (int k = 0; k < n_levels; ++k) {
        const double f_k = book.freq_of_level(k);
        const std::complex<double> step =
            std::polar(1.0, -2.0 * kPi * f_k / fs);
        std::complex<double> demod = std::polar(
            1.0, -2.0 * kPi * std::fmod(f_k * static_cast<double>(zbase) / fs, 1.0));
        z(0, k) = {0.0, 0.0};
        for (Index m = 0; m < pad + period_len; ++m) {
            z(m + 1, k) = z(m, k) + spec.samples[zbase + m] * demod;
            demod *= step;
        }
    }

    // Segment layout for a candidate: boundaries as offsets past the nominal
    // start (negative down to -pad) and the level active in each span.
    std::vector<Index> bounds;
    std::vector<int> levels;
    std::vector<std::pair<Index, int>> order(static_cast<std::size_t>(n_sensors));
    Index delta = 0;
    auto layout = [&](const std::vector<Index>& tau) {
        for (int i = 0; i < n_sensors; ++i)
            order[static_cast<std::size_t>(i)] = {
                std::max(tau[static_cast<std::size_t>(i)], delta), i};
        std::sort(order.begin(), order.end());
        bounds.clear();
        levels.clear();
        const Index lead = std::min<Index>(pad + delta, 48);
        if (lead > 0) {
            bounds.push_back(delta - lead);
            levels.push_back(0);
        }
        bounds.push_back(delta);
        std::uint32_t mask = full_mask;
        for (const auto& [t, i] : order) {
            levels.push_back(book.level_of_mask(mask));
            bounds.push_back(t);
            mask &= ~(1u << i);
        }
        levels.push_back(0);
        bounds.push_back(period_len);
    };

    // Sum of per-segment normalized correlation energies |<tone, y>|^2 / len:
    // the likelihood score for one tone per segment with an unknown complex
    // gain per segment.
    auto score = [&](const std::vector<Index>& tau) {
        layout(tau);
        double total = 0.0;
        for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
            const Index a = bounds[s], b = bounds[s + 1];
            if (b <= a) continue;
            const int k = levels[s];
            const std::complex<double> c = z(b + pad, k) - z(a + pad, k);
            total += std::norm(c) / static_cast<double>(b - a);
        }
        return total;
    };

    // Global initialization: dynamic programming over (boundary position on
    // a coarse grid, set of sensors still high). Segment scores are additive,
    // so this finds the best fall schedule at grid resolution and cannot get
    // trapped the way a purely local search can; the descent below only
    // refines within the winning basin.
    std::vector<Index> tau(static_cast<std::size_t>(n_sensors), period_len);
    {
        const Index grid = std::max<Index>(
            {static_cast<Index>(1), spec.plan.hop, period_len / 256});
        const Index nj = period_len / grid + 1;
        auto pos = [&](Index j) { return j + 1 == nj ? period_len : j * grid; };
        auto eseg = [&](Index a, Index b, std::uint32_t mask) {
            const int k = book.level_of_mask(mask);
            return std::norm(z(b + pad, k) - z(a + pad, k)) / static_cast<double>(b - a);
        };
        const double ninf = -std::numeric_limits<double>::infinity();
        Eigen::MatrixXd F = Eigen::MatrixXd::Constant(nj, n_levels, ninf);
        Eigen::MatrixXi par_j = Eigen::MatrixXi::Constant(nj, n_levels, -1);
        Eigen::MatrixXi par_m = Eigen::MatrixXi::Constant(nj, n_levels, -1);
        std::vector<std::uint32_t> by_pop;
        for (std::uint32_t m = 0; m <= full_mask; ++m) by_pop.push_back(m);
        std::sort(by_pop.begin(), by_pop.end(), [](std::uint32_t a, std::uint32_t b) {
            return std::popcount(a) > std::popcount(b);
        });
        F(0, static_cast<int>(full_mask)) = 0.0;
        for (Index j = 0; j < nj; ++j) {
            // Coincident falls: close out sensors at this boundary for free.
            for (std::uint32_t m : by_pop) {
                const double v = F(j, static_cast<int>(m));
                if (v == ninf) continue;
                for (std::uint32_t rest = m; rest != 0; rest &= rest - 1) {
                    const std::uint32_t sub = m & ~(rest & (0u - rest));
                    if (v > F(j, static_cast<int>(sub))) {
                        F(j, static_cast<int>(sub)) = v;
                        par_j(j, static_cast<int>(sub)) = static_cast<int>(j);
                        par_m(j, static_cast<int>(sub)) = static_cast<int>(m);
                    }
                }
            }
            if (j + 1 == nj) break;
            for (std::uint32_t m = 0; m <= full_mask; ++m) {
                const double v = F(j, static_cast<int>(m));
                if (v == ninf) continue;
                if (m == 0) {
                    // All sensors down: one all-low span to the period end.
                    const double val = v + eseg(pos(j), period_len, 0);
                    if (val > F(nj - 1, 0)) {
                        F(nj - 1, 0) = val;
                        par_j(nj - 1, 0) = static_cast<int>(j);
                        par_m(nj - 1, 0) = 0;
                    }
                    continue;
                }
                for (Index j2 = j + 1; j2 < nj; ++j2) {
                    const double val = v + eseg(pos(j), pos(j2), m);
                    for (std::uint32_t rest = m; rest != 0; rest &= rest - 1) {
                        const std::uint32_t sub = m & ~(rest & (0u - rest));
                        if (val > F(j2, static_cast<int>(sub))) {
                            F(j2, static_cast<int>(sub)) = val;
                            par_j(j2, static_cast<int>(sub)) = static_cast<int>(j);
                            par_m(j2, static_cast<int>(sub)) = static_cast<int>(m);
                        }
                    }
                }
            }
        }
        Index j = nj - 1;
        std::uint32_t m = 0;
        while (!(j == 0 && m == full_mask)) {
            const int pj = par_j(j, static_cast<int>(m));
            const int pm = par_m(j, static_cast<int>(m));
            if (pj < 0) break; // unreachable state; fall back to the defaults
            const auto prev = static_cast<std::uint32_t>(pm);
            const std::uint32_t dropped = prev ^ m;
            if (dropped != 0)
                tau[static_cast<std::size_t>(std::countr_zero(dropped))] = pos(j);
            j = static_cast<Index>(pj);
            m = prev;
        }
    }

    // Refinement: coordinate descent with exhaustive per-coordinate scans, so
    // order swaps between sensors stay reachable; explicit pair swaps handle
    // near-coincident falls that no single-coordinate move can exchange.
    double best = score(tau);
    for (int sweep = 0; sweep < 3; ++sweep) {
        for (int i = 0; i < n_sensors; ++i) {
            Index best_t = tau[static_cast<std::size_t>(i)];
            for (Index c = delta; c <= period_len; ++c) {
                tau[static_cast<std::size_t>(i)] = c;
                const double s = score(tau);
                if (s > best) {
                    best = s;
                    best_t = c;
                }
            }
            tau[static_cast<std::size_t>(i)] = best_t;
        }
        {
            Index best_d = delta;
            for (Index c = -pad; c <= pad; ++c) {
                delta = c;
                const double s = score(tau);
                if (s > best) {
                    best = s;
                    best_d = c;
                }
            }
            delta = best_d;
        }
        for (int i = 0; i < n_sensors; ++i) {
            for (int j = i + 1; j < n_sensors; ++j) {
                std::swap(tau[static_cast<std::size_t>(i)], tau[static_cast<std::size_t>(j)]);
                const double s = score(tau);
                if (s > best)
                    best = s;
                else
                    std::swap(tau[static_cast<std::size_t>(i)],
                              tau[static_cast<std::size_t>(j)]);
            }
        }
    }
    if (best <= 0.0) return degenerate("no signal energy at the level tones");

    // Emit the chain from the fitted fall times; coincident falls merge into
    // one multi-sensor transition. The fitted start offset moves this
    // period's reported start without touching the neighboring periods.
    layout(tau);
    out.start = start + delta;
    Index at = delta;
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        if (bounds[s + 1] <= delta) continue;
        const Index next = bounds[s + 1];
        if (next > at || (s + 2 == bounds.size() && out.chain.empty()))
            out.chain.emplace_back(book.mask_of_level(levels[s]), next - at);
        at = next;
    }

    // Invariant check: durations partition the period.
    Index total = 0;
    for (const auto& [mask, d] : out.chain) total += d;
    if (out.ok && total != out.end - out.start) {
        out.ok = false;
        out.note = "internal: durations do not partition the period";
    }
    (void)params;
    return out;
}

void reconstruct(DecodeResult& result, const VdmCodebook& book, double f_s, double v_max,
                 double sample_rate, double epsilon) {
    const int n_sensors = book.sensor_count();
    const auto n_periods = static_cast<Index>(result.periods.size());
    result.duty_samples = Eigen::MatrixXd::Zero(n_periods, n_sensors);
    result.voltages = Eigen::MatrixXd::Zero(n_periods, n_sensors);

    for (Index p = 0; p < n_periods; ++p) {
        const PeriodDecode& pd = result.periods[static_cast<std::size_t>(p)];
        const Index period_len = pd.end - pd.start;
        for (const auto& [mask, dur] : pd.chain) {
            for (int i = 0; i < n_sensors; ++i)
                if (mask & (1u << i)) result.duty_samples(p, i) += static_cast<double>(dur);
        }
        for (int i = 0; i < n_sensors; ++i) {
            double duty = result.duty_samples(p, i);
            if (duty > static_cast<double>(period_len + result.diagnostics.timing_quantum)) {
                result.diagnostics.warnings.push_back(
                    "period " + std::to_string(p) + " sensor " + std::to_string(i + 1) +
                    ": duty exceeds period; clamped");
                duty = static_cast<double>(period_len);
            }
            const double v = (duty / sample_rate - epsilon) * v_max * f_s;
            result.voltages(p, i) = std::clamp(v, 0.0, v_max);
        }
    }

    // Per-sensor series at the reference rate, one value per period; periods
    // that failed to decode hold the previous value.
    result.sensor_series.clear();
    if (n_periods == 0) return;
    const double t0 =
        static_cast<double>(result.periods.front().start) / sample_rate + 0.5 / f_s;
    for (int i = 0; i < n_sensors; ++i) {
        Eigen::ArrayXd vals(n_periods);
        double held = v_max / 2.0;
        bool have_held = false;
        for (Index p = 0; p < n_periods; ++p) {
            if (result.periods[static_cast<std::size_t>(p)].ok) {
                held = result.voltages(p, i);
                have_held = true;
            } else if (!have_held) {
                // leading failed periods: backfill from the first good one
                for (Index q = p; q < n_periods; ++q) {
                    if (result.periods[static_cast<std::size_t>(q)].ok) {
                        held = result.voltages(q, i);
                        break;
                    }
                }
            }
            vals[p] = held;
        }
        result.sensor_series.emplace_back(std::move(vals), f_s, t0);
    }
}

DecodeResult demultiplex(const IqCapture& iq, const VdmCodebook& book, const CztPlan& plan,
                         double f_s, double v_max, double epsilon,
                         const DecodeParams& params) {
    if (iq.size() == 0)
        throw InsufficientSignalError("demultiplex: empty capture");
    const ZoomSpectrogram spec = sliding_spectrogram(iq, plan);
    const auto periods = segment_periods(spec, book, params);

    DecodeResult result;
    result.diagnostics.timing_quantum = plan.hop;
    double len_sum = 0.0;
    for (const auto& [s, e] : periods) {
        PeriodDecode pd = decode_period(spec, s, e, book, params);
        ++result.diagnostics.periods_total;
        if (!pd.ok) {
            ++result.diagnostics.periods_discarded;
            ++result.diagnostics.ambiguous_transitions;
        }
        len_sum += static_cast<double>(e - s);
        result.periods.push_back(std::move(pd));
    }
    result.diagnostics.mean_period_samples =
        len_sum / static_cast<double>(std::max<std::size_t>(1, periods.size()));

    reconstruct(result, book, f_s, v_max, iq.sample_rate, epsilon);
    return result;
}

std::string DecodeResult::to_json() const {
    nlohmann::json j;
    j["diagnostics"] = {{"periods_total", diagnostics.periods_total},
                        {"periods_discarded", diagnostics.periods_discarded},
                        {"ambiguous_transitions", diagnostics.ambiguous_transitions},
                        {"mean_period_samples", diagnostics.mean_period_samples},
                        {"timing_quantum", diagnostics.timing_quantum},
                        {"warnings", diagnostics.warnings}};
    j["periods"] = nlohmann::json::array();
    for (std::size_t p = 0; p < periods.size(); ++p) {
        const auto& pd = periods[p];
        nlohmann::json jp;
        jp["start"] = pd.start;
        jp["end"] = pd.end;
        jp["ok"] = pd.ok;
        if (!pd.note.empty()) jp["note"] = pd.note;
        jp["chain"] = nlohmann::json::array();
        for (const auto& [mask, dur] : pd.chain)
            jp["chain"].push_back({{"mask", mask}, {"duration", dur}});
        jp["duty_samples"] = std::vector<double>(
            duty_samples.row(static_cast<Index>(p)).begin(),
            duty_samples.row(static_cast<Index>(p)).end());
        jp["voltages"] = std::vector<double>(voltages.row(static_cast<Index>(p)).begin(),
                                             voltages.row(static_cast<Index>(p)).end());
        j["periods"].push_back(std::move(jp));
    }
    return j.dump(2);
}

} // namespace vdm
