#include "vqn/measurement.hpp"

#include "vqn/error.hpp"
#include "vqn/kernels.hpp"

#include <cmath>
#include <numeric>

namespace vqn {

namespace {

std::span<const TagRecord> tags(const TagStream& s) { return s.records(); }

std::uint64_t pairs_in_window(const TagStream& a, const TagStream& b, Picoseconds center, Picoseconds width,
                              Execution exec) {
    // closed interval |d - center| <= width / 2 in integer picoseconds
    const Picoseconds half = width / 2;
    return exec == Execution::serial ? kernels::serial::count_pairs_in_range(tags(a), tags(b), center - half, center + half)
                                     : kernels::omp::count_pairs_in_range(tags(a), tags(b), center - half, center + half);
}

void check_duration(double duration_s) {
    if (!(std::isfinite(duration_s) && duration_s > 0.0)) {
        throw Error(ErrorCode::validation, "duration must be positive", "duration_s");
    }
}

} // namespace

void HistogramSpec::validate() const {
    if (bin_width_ps < 1) {
        throw Error(ErrorCode::validation, "bin_width_ps must be >= 1", "bin_width_ps");
    }
    if (n_bins < 1) {
        throw Error(ErrorCode::validation, "n_bins must be >= 1", "n_bins");
    }
}

std::uint64_t Histogram::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

void CoincidenceSpec::validate() const {
    if (window_ps < 1) {
        throw Error(ErrorCode::validation, "window_ps must be positive", "window_ps");
    }
    if (background_width_ps < 1) {
        throw Error(ErrorCode::validation, "background_width_ps must be positive", "background_width_ps");
    }
    if (background_offset_ps < 1) {
        throw Error(ErrorCode::validation, "background_offset_ps must be positive", "background_offset_ps");
    }
    // 2*offset > window + width, kept in integers
    if (2 * background_offset_ps <= window_ps + background_width_ps) {
        throw Error(ErrorCode::validation, "background windows overlap the coincidence window", "background_offset_ps");
    }
    if (peak_bin_width_ps < 1) {
        throw Error(ErrorCode::validation, "peak_bin_width_ps must be positive", "peak_bin_width_ps");
    }
    if (peak_range_ps < peak_bin_width_ps) {
        throw Error(ErrorCode::validation, "peak_range_ps must cover at least one bin", "peak_range_ps");
    }
}

std::map<ChannelIndex, double> count_rate(const ChannelStreams& streams, const std::set<ChannelIndex>& channels,
                                          double duration_s) {
    check_duration(duration_s);
    std::string missing;
    for (auto ch : channels) {
        if (!streams.contains(ch)) {
            missing += (missing.empty() ? "" : ", ") + std::to_string(ch);
        }
    }
    if (!missing.empty()) {
        throw Error(ErrorCode::unknown_channel, "no stream for channel(s): " + missing, "channels");
    }
    std::map<ChannelIndex, double> rates;
    for (auto ch : channels) {
        rates[ch] = static_cast<double>(streams.at(ch).size()) / duration_s;
    }
    return rates;
}

Histogram counter(const TagStream& stream, const HistogramSpec& spec, Picoseconds start_ps, Execution exec) {
    spec.validate();
    Histogram h{spec, start_ps, std::vector<std::uint64_t>(static_cast<std::size_t>(spec.n_bins), 0)};
    if (exec == Execution::serial) {
        kernels::serial::counter(tags(stream), start_ps, spec.bin_width_ps, h.counts);
    } else {
        kernels::omp::counter(tags(stream), start_ps, spec.bin_width_ps, h.counts);
    }
    return h;
}

Histogram delay_histogram(const TagStream& a, const TagStream& b, Picoseconds bin_width_ps, Picoseconds range_ps,
                          Picoseconds center_ps, Execution exec) {
    const auto binning = kernels::DelayBinning::make(bin_width_ps, range_ps, center_ps);
    Histogram h;
    h.spec = {bin_width_ps, static_cast<std::int64_t>(binning.n_bins())};
    h.origin_ps = center_ps - binning.half_bins * bin_width_ps - bin_width_ps / 2;
    h.counts.assign(binning.n_bins(), 0);
    if (exec == Execution::serial) {
        kernels::serial::delay_histogram(tags(a), tags(b), binning, h.counts);
    } else {
        kernels::omp::delay_histogram(tags(a), tags(b), binning, h.counts);
    }
    return h;
}

Picoseconds find_peak(const Histogram& histogram) {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < histogram.counts.size(); ++k) {
        if (histogram.counts[k] == 0) {
            continue;
        }
        if (!best || histogram.counts[k] > histogram.counts[*best]) {
            best = k;
            continue;
        }
        if (histogram.counts[k] == histogram.counts[*best]) {
            const auto c = histogram.bin_center(k);
            const auto cb = histogram.bin_center(*best);
            if (std::abs(c) < std::abs(cb) || (std::abs(c) == std::abs(cb) && c < cb)) {
                best = k;
            }
        }
    }
    if (!best) {
        throw Error(ErrorCode::no_peak, "histogram has no counts");
    }
    return histogram.bin_center(*best);
}

double car(double cc_hz, double acc_hz) {
    if (!(acc_hz > 0.0)) {
        throw Error(ErrorCode::undefined_car, "CAR undefined without accidental coincidences");
    }
    return cc_hz / acc_hz;
}

CoincidenceResult coincidence_count(const TagStream& a, const TagStream& b, const CoincidenceSpec& spec,
                                    double duration_s, Execution exec) {
    spec.validate();
    check_duration(duration_s);

    CoincidenceResult r;
    r.rate_a_hz = static_cast<double>(a.size()) / duration_s;
    r.rate_b_hz = static_cast<double>(b.size()) / duration_s;

    const auto h = delay_histogram(a, b, spec.peak_bin_width_ps, spec.peak_range_ps, 0, exec);
    r.peak_delay_ps = find_peak(h);

    r.coincidences = pairs_in_window(a, b, r.peak_delay_ps, spec.window_ps, exec);
    r.background_early =
        pairs_in_window(a, b, r.peak_delay_ps - spec.background_offset_ps, spec.background_width_ps, exec);
    r.background_late =
        pairs_in_window(a, b, r.peak_delay_ps + spec.background_offset_ps, spec.background_width_ps, exec);

    r.coincidence_rate_hz = static_cast<double>(r.coincidences) / duration_s;
    r.accidental_rate_hz =
        0.5 * static_cast<double>(r.background_early + r.background_late) / duration_s;
    if (r.accidental_rate_hz > 0.0) {
        r.car = car(r.coincidence_rate_hz, r.accidental_rate_hz);
    }
    return r;
}

void to_json(nlohmann::json& j, const Histogram& h) {
    j = nlohmann::json{{"bin_width_ps", h.spec.bin_width_ps}, {"origin_ps", h.origin_ps}, {"counts", h.counts}};
}

void to_json(nlohmann::json& j, const CoincidenceResult& r) {
    j = nlohmann::json{{"rate_a_hz", r.rate_a_hz},
                       {"rate_b_hz", r.rate_b_hz},
                       {"cc_hz", r.coincidence_rate_hz},
                       {"acc_hz", r.accidental_rate_hz},
                       {"car", r.car ? nlohmann::json(*r.car) : nlohmann::json(nullptr)},
                       {"peak_delay_ps", r.peak_delay_ps}};
}

void from_json(const nlohmann::json& j, HistogramSpec& s) {
    s.bin_width_ps = j.at("bin_width_ps").get<Picoseconds>();
    s.n_bins = j.at("n_bins").get<std::int64_t>();
}

void from_json(const nlohmann::json& j, CoincidenceSpec& s) {
    CoincidenceSpec d;
    s.window_ps = j.value("window_ps", d.window_ps);
    s.background_offset_ps = j.value("background_offset_ps", d.background_offset_ps);
    s.background_width_ps = j.value("background_width_ps", d.background_width_ps);
    s.peak_bin_width_ps = j.value("peak_bin_width_ps", d.peak_bin_width_ps);
    s.peak_range_ps = j.value("peak_range_ps", d.peak_range_ps);
}

} // namespace vqn
