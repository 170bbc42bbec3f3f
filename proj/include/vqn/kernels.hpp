#pragma once

// Hot loops behind the measurement functions. Every kernel has a serial
// reference and an OpenMP version with identical results; tests pin the
// two against each other and bench/ compares their speed.

#include "vqn/tagcore.hpp"

#include <cstdint>
#include <span>

namespace vqn::kernels {

/// Bins for signed delays d = (t_b - t_a) - center. Bin j is centred on
/// (j - half_bins) * width; each delay goes to the nearest centre and an
/// exact midpoint goes to the centre closer to zero. Delays with
/// |d| > half_range are dropped. The rule is odd in d, so swapping the two
/// streams mirrors the histogram exactly.
struct DelayBinning {
    Picoseconds center = 0;
    Picoseconds width = 1;
    Picoseconds half_range = 0;
    std::int64_t half_bins = 0;

    static DelayBinning make(Picoseconds bin_width, Picoseconds range, Picoseconds center);
    std::size_t n_bins() const noexcept { return static_cast<std::size_t>(2 * half_bins + 1); }
    /// Bin index for an offset already known to satisfy |d| <= half_range.
    std::size_t bin_of(Picoseconds d) const noexcept {
        const Picoseconds h = (width - 1) / 2;
        const Picoseconds m = d >= 0 ? (d + h) / width : -((-d + h) / width);
        return static_cast<std::size_t>(m + half_bins);
    }
};

namespace serial {

/// Number of (i, j) with lo <= b[j] - a[i] <= hi.
std::uint64_t count_pairs_in_range(std::span<const TagRecord> a, std::span<const TagRecord> b, Picoseconds lo,
                                   Picoseconds hi);
void delay_histogram(std::span<const TagRecord> a, std::span<const TagRecord> b, const DelayBinning& binning,
                     std::span<std::uint64_t> counts);
/// Fixed-grid occupancy: bin k holds tags in [start + k*width, start + (k+1)*width).
void counter(std::span<const TagRecord> tags, Picoseconds start, Picoseconds width, std::span<std::uint64_t> counts);

} // namespace serial

namespace omp {

std::uint64_t count_pairs_in_range(std::span<const TagRecord> a, std::span<const TagRecord> b, Picoseconds lo,
                                   Picoseconds hi);
void delay_histogram(std::span<const TagRecord> a, std::span<const TagRecord> b, const DelayBinning& binning,
                     std::span<std::uint64_t> counts);
void counter(std::span<const TagRecord> tags, Picoseconds start, Picoseconds width, std::span<std::uint64_t> counts);

} // namespace omp

} // namespace vqn::kernels
