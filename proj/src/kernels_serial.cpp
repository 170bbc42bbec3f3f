#include "vqn/kernels.hpp"

#include "vqn/error.hpp"

#include <algorithm>

namespace vqn::kernels {

DelayBinning DelayBinning::make(Picoseconds bin_width, Picoseconds range, Picoseconds center) {
    if (bin_width < 1) {
        throw Error(ErrorCode::invalid_argument, "bin width must be at least 1 ps", "bin_width_ps");
    }
    if (range < bin_width) {
        throw Error(ErrorCode::invalid_argument, "range must be at least one bin wide", "range_ps");
    }
    DelayBinning b;
    b.center = center;
    b.width = bin_width;
    b.half_range = range / 2;
    b.half_bins = (b.half_range + bin_width - 1) / bin_width;
    return b;
}

namespace serial {

std::uint64_t count_pairs_in_range(std::span<const TagRecord> a, std::span<const TagRecord> b, Picoseconds lo,
                                   Picoseconds hi) {
    std::uint64_t total = 0;
    std::size_t first = 0;
    for (const auto& tag : a) {
        const Picoseconds lower = tag.timestamp_ps + lo;
        const Picoseconds upper = tag.timestamp_ps + hi;
        while (first < b.size() && b[first].timestamp_ps < lower) {
            ++first;
        }
        for (std::size_t j = first; j < b.size() && b[j].timestamp_ps <= upper; ++j) {
            ++total;
        }
    }
    return total;
}

void delay_histogram(std::span<const TagRecord> a, std::span<const TagRecord> b, const DelayBinning& binning,
                     std::span<std::uint64_t> counts) {
    std::fill(counts.begin(), counts.end(), 0);
    const Picoseconds lo = binning.center - binning.half_range;
    const Picoseconds hi = binning.center + binning.half_range;
    std::size_t first = 0;
    for (const auto& tag : a) {
        while (first < b.size() && b[first].timestamp_ps < tag.timestamp_ps + lo) {
            ++first;
        }
        for (std::size_t j = first; j < b.size() && b[j].timestamp_ps <= tag.timestamp_ps + hi; ++j) {
            ++counts[binning.bin_of(b[j].timestamp_ps - tag.timestamp_ps - binning.center)];
        }
    }
}

void counter(std::span<const TagRecord> tags, Picoseconds start, Picoseconds width, std::span<std::uint64_t> counts) {
    std::fill(counts.begin(), counts.end(), 0);
    const auto n = static_cast<Picoseconds>(counts.size());
    for (const auto& tag : tags) {
        const Picoseconds offset = tag.timestamp_ps - start;
        if (offset < 0) {
            continue;
        }
        const Picoseconds k = offset / width;
        if (k >= n) {
            break; // sorted input: nothing later can land in range
        }
        ++counts[static_cast<std::size_t>(k)];
    }
}

} // namespace serial

} // namespace vqn::kernels
