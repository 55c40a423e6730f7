#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "ladr/corpus.hpp"
#include "ladr/search.hpp"
#include "ladr/types.hpp"

namespace ladr {

struct LatencyStats {
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double mean_docs_scored = 0.0;
    std::vector<double> per_query_ms;
};

namespace detail {

inline double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

/// Nearest-rank percentile.
inline double percentile(std::vector<double> values, double pct) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

template <typename R>
std::size_t docs_scored_of(const R& r) {
    if constexpr (std::is_same_v<std::decay_t<R>, SearchResult>) {
        return r.trace.docs_scored;
    } else if constexpr (std::is_same_v<std::decay_t<R>, SearchTrace>) {
        return r.docs_scored;
    } else {
        return 0;
    }
}

}  // namespace detail

/// Times `search(i)` for every query index i, one call at a time on the
/// calling thread. `warmup` untimed passes over all queries come first; then
/// each query is timed `reps` times and contributes the median of its reps.
/// Only the call itself is inside the timed region.
template <typename SearchFn>
LatencyStats bench(const QuerySet& queries, SearchFn&& search, std::size_t warmup = 1, std::size_t reps = 3) {
    if (reps == 0) throw Error(Errc::config_error, "reps must be >= 1");
    using Clock = std::chrono::steady_clock;
    for (std::size_t w = 0; w < warmup; ++w) {
        for (std::size_t i = 0; i < queries.size(); ++i) (void)search(i);
    }
    LatencyStats stats;
    stats.per_query_ms.reserve(queries.size());
    double docs_total = 0.0;
    std::vector<double> samples(reps);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::size_t docs = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto t0 = Clock::now();
            auto result = search(i);
            const auto t1 = Clock::now();
            samples[r] = std::chrono::duration<double, std::milli>(t1 - t0).count();
            docs = detail::docs_scored_of(result);
        }
        stats.per_query_ms.push_back(detail::median_of(samples));
        docs_total += static_cast<double>(docs);
    }
    if (!stats.per_query_ms.empty()) {
        double sum = 0.0;
        for (double v : stats.per_query_ms) sum += v;
        const auto count = static_cast<double>(stats.per_query_ms.size());
        stats.mean_ms = sum / count;
        stats.median_ms = detail::median_of(stats.per_query_ms);
        stats.p95_ms = detail::percentile(stats.per_query_ms, 95.0);
        stats.mean_docs_scored = docs_total / count;
    }
    return stats;
}

}  // namespace ladr
