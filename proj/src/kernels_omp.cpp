#include "vqn/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace vqn::kernels::omp {

namespace {

// Below this many tags the threading overhead dominates.
constexpr std::size_t kMinParallelTags = 1 << 14;

std::size_t first_at_or_after(std::span<const TagRecord> b, Picoseconds t) {
    return static_cast<std::size_t>(
        std::lower_bound(b.begin(), b.end(), t, [](const TagRecord& r, Picoseconds v) { return r.timestamp_ps < v; }) -
        b.begin());
}

} // namespace

std::uint64_t count_pairs_in_range(std::span<const TagRecord> a, std::span<const TagRecord> b, Picoseconds lo,
                                   Picoseconds hi) {
    if (a.size() < kMinParallelTags) {
        return serial::count_pairs_in_range(a, b, lo, hi);
    }
    std::uint64_t total = 0;
#pragma omp parallel reduction(+ : total)
    {
        const auto n_threads = static_cast<std::size_t>(omp_get_num_threads());
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        const std::size_t begin = a.size() * tid / n_threads;
        const std::size_t end = a.size() * (tid + 1) / n_threads;
        if (begin < end) {
            const auto chunk = a.subspan(begin, end - begin);
            const std::size_t first = first_at_or_after(b, chunk.front().timestamp_ps + lo);
            total += serial::count_pairs_in_range(chunk, b.subspan(first), lo, hi);
        }
    }
    return total;
}

void delay_histogram(std::span<const TagRecord> a, std::span<const TagRecord> b, const DelayBinning& binning,
                     std::span<std::uint64_t> counts) {
    if (a.size() < kMinParallelTags) {
        serial::delay_histogram(a, b, binning, counts);
        return;
    }
    std::fill(counts.begin(), counts.end(), 0);
    const Picoseconds lo = binning.center - binning.half_range;
#pragma omp parallel
    {
        const auto n_threads = static_cast<std::size_t>(omp_get_num_threads());
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        const std::size_t begin = a.size() * tid / n_threads;
        const std::size_t end = a.size() * (tid + 1) / n_threads;
        std::vector<std::uint64_t> local(counts.size(), 0);
        if (begin < end) {
            const auto chunk = a.subspan(begin, end - begin);
            const std::size_t first = first_at_or_after(b, chunk.front().timestamp_ps + lo);
            serial::delay_histogram(chunk, b.subspan(first), binning, local);
        }
#pragma omp critical
        for (std::size_t k = 0; k < counts.size(); ++k) {
            counts[k] += local[k];
        }
    }
}

void counter(std::span<const TagRecord> tags, Picoseconds start, Picoseconds width, std::span<std::uint64_t> counts) {
    std::fill(counts.begin(), counts.end(), 0);
    // Only the tags inside the histogram span matter; locate them, then bin
    // disjoint slices per thread.
    const Picoseconds stop = start + width * static_cast<Picoseconds>(counts.size());
    const std::size_t lo = first_at_or_after(tags, start);
    const std::size_t hi = first_at_or_after(tags, stop);
    const auto inside = tags.subspan(lo, hi - lo);
    if (inside.size() < kMinParallelTags) {
        serial::counter(inside, start, width, counts);
        return;
    }
    const auto n = static_cast<std::ptrdiff_t>(inside.size());
    const auto n_bins = counts.size();
#pragma omp parallel
    {
        std::vector<std::uint64_t> local(n_bins, 0);
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            ++local[static_cast<std::size_t>((inside[i].timestamp_ps - start) / width)];
        }
#pragma omp critical
        for (std::size_t k = 0; k < n_bins; ++k) {
            counts[k] += local[k];
        }
    }
}

} // namespace vqn::kernels::omp
