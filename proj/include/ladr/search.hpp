#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ladr/corpus.hpp"
#include "ladr/dense.hpp"
#include "ladr/graph.hpp"
#include "ladr/lexical.hpp"
#include "ladr/types.hpp"

namespace ladr {

struct LadrParams {
    std::size_t n = 1000;     // lexical seeds
    std::size_t k = 128;      // neighbors taken per explored document
    std::size_t c = 50;       // adaptive only: how many top results are expanded
    std::size_t depth = 1000; // final list length
    Bm25Params bm25{};
    Accumulation accumulation = Accumulation::f32;
    /// Adaptive only. When exceeded the partial result is returned and
    /// `SearchTrace::timed_out` is set.
    std::optional<std::chrono::microseconds> timeout;
    /// Answer zero-seed queries with exhaustive search instead of an empty list.
    bool fallback_exhaustive = false;
};

struct SearchTrace {
    std::size_t seeds_found = 0;
    std::size_t docs_scored = 0;
    std::size_t iterations = 0;
    std::chrono::nanoseconds wall_time{0};
    bool timed_out = false;
    bool fell_back = false;

    friend bool operator==(const SearchTrace& a, const SearchTrace& b) {
        return a.seeds_found == b.seeds_found && a.docs_scored == b.docs_scored && a.iterations == b.iterations &&
               a.timed_out == b.timed_out && a.fell_back == b.fell_back;
    }
};

struct SearchResult {
    ScoredList results;
    SearchTrace trace;
};

namespace detail {

/// Epoch-stamped membership set over [0, D); clearing is O(1).
class DocMarks {
public:
    void reset(std::size_t num_docs) {
        if (marks_.size() != num_docs) {
            marks_.assign(num_docs, 0);
            epoch_ = 0;
        }
        if (++epoch_ == 0) {
            std::fill(marks_.begin(), marks_.end(), 0);
            epoch_ = 1;
        }
    }

    /// Marks `d`; true if it was not marked before.
    bool insert(DocId d) {
        if (marks_[d] == epoch_) return false;
        marks_[d] = epoch_;
        return true;
    }

    bool contains(DocId d) const { return marks_[d] == epoch_; }

private:
    std::vector<std::uint32_t> marks_;
    std::uint32_t epoch_ = 0;
};

inline DocMarks& thread_marks() {
    thread_local DocMarks marks;
    return marks;
}

inline void validate_common(const LadrParams& p, std::span<const float> qvec, const VectorStore& store) {
    if (p.n == 0) throw Error(Errc::config_error, "n must be >= 1");
    if (p.depth == 0) throw Error(Errc::config_error, "depth must be >= 1");
    p.bm25.validate();
    check_dim(qvec, store);
}

inline void validate_graph(const LadrParams& p, const ProximityGraph& graph, const VectorStore& store) {
    if (p.k == 0 || p.k > graph.k()) {
        throw Error(Errc::config_error, "k must be in [1, " + std::to_string(graph.k()) + "]");
    }
    if (graph.size() != store.size()) throw Error(Errc::input_error, "graph and vectors cover different corpora");
}

inline std::vector<DocId> seed_ids(const InvertedIndex& index, std::span<const std::string> qtokens, std::size_t n,
                                   const Bm25Params& bm25, const VectorStore& store) {
    if (index.num_docs() != store.size()) throw Error(Errc::input_error, "index and vectors cover different corpora");
    return doc_ids(lexical_top_n(index, qtokens, n, bm25));
}

template <typename Clock = std::chrono::steady_clock>
SearchResult finish(ScoredList scored, SearchTrace trace, std::size_t depth, typename Clock::time_point start) {
    rank_truncate(scored, depth);
    trace.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start);
    return SearchResult{std::move(scored), trace};
}

inline SearchResult empty_seed_result(std::span<const float> qvec, const VectorStore& store, const LadrParams& p,
                                      std::chrono::steady_clock::time_point start) {
    SearchTrace trace;
    ScoredList results;
    if (p.fallback_exhaustive) {
        results = exhaustive_search(qvec, store, p.depth, p.accumulation);
        trace.docs_scored = store.size();
        trace.fell_back = true;
    }
    trace.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
    return SearchResult{std::move(results), trace};
}

}  // namespace detail

/// Proactive expansion: score the lexical seeds together with the first k
/// neighbors of every seed, once.
inline SearchResult proactive_search(std::span<const std::string> qtokens, std::span<const float> qvec,
                                     const InvertedIndex& index, const ProximityGraph& graph, const VectorStore& store,
                                     const LadrParams& params) {
    const auto start = std::chrono::steady_clock::now();
    detail::validate_common(params, qvec, store);
    detail::validate_graph(params, graph, store);
    const auto seeds = detail::seed_ids(index, qtokens, params.n, params.bm25, store);
    if (seeds.empty()) return detail::empty_seed_result(qvec, store, params, start);

    auto& marks = detail::thread_marks();
    marks.reset(store.size());
    std::vector<DocId> candidates;
    candidates.reserve(seeds.size() * (params.k + 1));
    for (DocId s : seeds) {
        if (marks.insert(s)) candidates.push_back(s);
    }
    for (DocId s : seeds) {
        auto row = graph.row(s);
        const std::size_t take = std::min(params.k, row.size());
        for (std::size_t i = 0; i < take; ++i) {
            if (marks.insert(row[i])) candidates.push_back(row[i]);
        }
    }

    ScoredList scored;
    scored.reserve(candidates.size());
    detail::score_batch(qvec, candidates, store, params.accumulation, scored);
    SearchTrace trace;
    trace.seeds_found = seeds.size();
    trace.docs_scored = candidates.size();
    return detail::finish(std::move(scored), trace, params.depth, start);
}

/// Adaptive expansion: score the seeds, then repeatedly score the unscored
/// neighbors of the current top-c results until an iteration finds none.
inline SearchResult adaptive_search(std::span<const std::string> qtokens, std::span<const float> qvec,
                                    const InvertedIndex& index, const ProximityGraph& graph, const VectorStore& store,
                                    const LadrParams& params) {
    const auto start = std::chrono::steady_clock::now();
    detail::validate_common(params, qvec, store);
    detail::validate_graph(params, graph, store);
    if (params.c == 0 || params.c > params.n) throw Error(Errc::config_error, "c must be in [1, n]");
    const auto seeds = detail::seed_ids(index, qtokens, params.n, params.bm25, store);
    if (seeds.empty()) return detail::empty_seed_result(qvec, store, params, start);

    auto& marks = detail::thread_marks();
    marks.reset(store.size());
    for (DocId s : seeds) marks.insert(s);

    ScoredList scored;
    detail::score_batch(qvec, seeds, store, params.accumulation, scored);

    // Best-first copy of the top-c scored documents; merging each batch into
    // it yields top-c of the whole scored set.
    std::vector<Scored<float>> top(scored.begin(), scored.end());
    rank_truncate(top, params.c);
    auto merge_into_top = [&](std::span<const Scored<float>> batch) {
        for (const auto& hit : batch) {
            if (top.size() == params.c && !RankOrder{}(hit, top.back())) continue;
            top.insert(std::upper_bound(top.begin(), top.end(), hit, RankOrder{}), hit);
            if (top.size() > params.c) top.pop_back();
        }
    };

    SearchTrace trace;
    trace.seeds_found = seeds.size();
    std::vector<DocId> frontier;
    auto expand = [&] {
        frontier.clear();
        for (const auto& hit : top) {
            auto row = graph.row(hit.doc);
            const std::size_t take = std::min(params.k, row.size());
            for (std::size_t i = 0; i < take; ++i) {
                if (marks.insert(row[i])) frontier.push_back(row[i]);
            }
        }
    };

    expand();
    while (!frontier.empty()) {
        if (params.timeout && std::chrono::steady_clock::now() - start >= *params.timeout) {
            trace.timed_out = true;
            break;
        }
        ++trace.iterations;
        const std::size_t before = scored.size();
        detail::score_batch(qvec, frontier, store, params.accumulation, scored);
        merge_into_top(std::span<const Scored<float>>(scored).subspan(before));
        expand();
    }
    trace.docs_scored = scored.size();
    return detail::finish(std::move(scored), trace, params.depth, start);
}

/// Dense re-ranking of the lexical top-n; no graph expansion.
inline SearchResult rerank_search(std::span<const std::string> qtokens, std::span<const float> qvec,
                                  const InvertedIndex& index, const VectorStore& store, std::size_t n,
                                  std::size_t depth, const Bm25Params& bm25 = {},
                                  Accumulation acc = Accumulation::f32) {
    const auto start = std::chrono::steady_clock::now();
    LadrParams params;
    params.n = n;
    params.depth = depth;
    params.bm25 = bm25;
    params.accumulation = acc;
    detail::validate_common(params, qvec, store);
    const auto seeds = detail::seed_ids(index, qtokens, n, bm25, store);
    ScoredList scored;
    scored.reserve(seeds.size());
    detail::score_batch(qvec, seeds, store, acc, scored);
    SearchTrace trace;
    trace.seeds_found = seeds.size();
    trace.docs_scored = seeds.size();
    return detail::finish(std::move(scored), trace, depth, start);
}

/// Exhaustive search wrapped with a trace, for side-by-side comparisons.
inline SearchResult exhaustive_traced(std::span<const float> qvec, const VectorStore& store, std::size_t depth,
                                      Accumulation acc = Accumulation::f32) {
    const auto start = std::chrono::steady_clock::now();
    SearchResult out{exhaustive_search(qvec, store, depth, acc), {}};
    out.trace.docs_scored = store.size();
    out.trace.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
    return out;
}

enum class Algorithm { proactive, adaptive, rerank, exhaustive };

/// Everything a search needs besides the query. `graph` may be null for
/// rerank and exhaustive.
struct SearchEnv {
    const InvertedIndex* index = nullptr;
    const ProximityGraph* graph = nullptr;
    const VectorStore* store = nullptr;
};

inline SearchResult run_search(Algorithm algo, std::span<const std::string> qtokens, std::span<const float> qvec,
                               const SearchEnv& env, const LadrParams& params) {
    if (!env.store) throw Error(Errc::config_error, "document vectors are required");
    if (algo == Algorithm::exhaustive) return exhaustive_traced(qvec, *env.store, params.depth, params.accumulation);
    if (!env.index) throw Error(Errc::config_error, "a lexical index is required");
    if (algo == Algorithm::rerank) {
        return rerank_search(qtokens, qvec, *env.index, *env.store, params.n, params.depth, params.bm25,
                             params.accumulation);
    }
    if (!env.graph) throw Error(Errc::config_error, "a proximity graph is required");
    if (algo == Algorithm::proactive) return proactive_search(qtokens, qvec, *env.index, *env.graph, *env.store, params);
    return adaptive_search(qtokens, qvec, *env.index, *env.graph, *env.store, params);
}

}  // namespace ladr
