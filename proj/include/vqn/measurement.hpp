#pragma once

#include "vqn/photon_source.hpp"
#include "vqn/tagcore.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace vqn {

enum class Execution { serial, parallel };

struct HistogramSpec {
    Picoseconds bin_width_ps = 1;
    std::int64_t n_bins = 1;

    void validate() const;

    friend bool operator==(const HistogramSpec&, const HistogramSpec&) = default;
};

struct Histogram {
    HistogramSpec spec;
    Picoseconds origin_ps = 0; // left edge of bin 0
    std::vector<std::uint64_t> counts;

    /// Integer centre of bin k (rounded down for odd widths).
    Picoseconds bin_center(std::size_t k) const noexcept {
        return origin_ps + static_cast<Picoseconds>(k) * spec.bin_width_ps + spec.bin_width_ps / 2;
    }
    std::uint64_t total() const noexcept;

    friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// Coincidence window geometry. Background windows sit at
/// peak +/- background_offset_ps and must not overlap the main window.
struct CoincidenceSpec {
    Picoseconds window_ps = 500;
    Picoseconds background_offset_ps = 1000;
    Picoseconds background_width_ps = 500;
    // peak search
    Picoseconds peak_bin_width_ps = 10;
    Picoseconds peak_range_ps = 100'000;

    void validate() const;
};

struct CoincidenceResult {
    double rate_a_hz = 0.0;
    double rate_b_hz = 0.0;
    double coincidence_rate_hz = 0.0;
    double accidental_rate_hz = 0.0;
    std::optional<double> car; // absent when no accidentals were seen
    Picoseconds peak_delay_ps = 0;

    std::uint64_t coincidences = 0;
    std::uint64_t background_early = 0;
    std::uint64_t background_late = 0;
};

std::map<ChannelIndex, double> count_rate(const ChannelStreams& streams, const std::set<ChannelIndex>& channels,
                                          double duration_s);

Histogram counter(const TagStream& stream, const HistogramSpec& spec, Picoseconds start_ps,
                  Execution exec = Execution::parallel);

/// Histogram of t_b - t_a over all cross pairs within range/2 of center.
/// Bins are centred on center + k * bin_width; see kernels::DelayBinning
/// for the exact membership rule.
Histogram delay_histogram(const TagStream& a, const TagStream& b, Picoseconds bin_width_ps, Picoseconds range_ps,
                          Picoseconds center_ps = 0, Execution exec = Execution::parallel);

/// Centre of the fullest bin. Ties go to the smallest |delay|, then the
/// smallest signed delay.
Picoseconds find_peak(const Histogram& histogram);

CoincidenceResult coincidence_count(const TagStream& a, const TagStream& b, const CoincidenceSpec& spec,
                                    double duration_s, Execution exec = Execution::parallel);

double car(double cc_hz, double acc_hz);

void to_json(nlohmann::json& j, const Histogram& h);
void to_json(nlohmann::json& j, const CoincidenceResult& r);
void from_json(const nlohmann::json& j, HistogramSpec& s);
void from_json(const nlohmann::json& j, CoincidenceSpec& s);

} // namespace vqn
