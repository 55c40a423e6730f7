#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ladr/corpus.hpp"
#include "ladr/types.hpp"

namespace ladr {

enum class Accumulation { f32, f64 };

namespace detail {

inline constexpr std::size_t kLanes = 8;

/// Inner product with eight interleaved partial sums and a fixed reduction
/// tree. Every similarity in the library goes through this function, and its
/// result is symmetric in its arguments bit for bit.
inline float dot_f32(const float* a, const float* b, std::size_t dim) noexcept {
    float acc[kLanes] = {};
    std::size_t i = 0;
    for (; i + kLanes <= dim; i += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
    }
    for (std::size_t l = 0; i + l < dim; ++l) acc[l] += a[i + l] * b[i + l];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline float dot_f64(const float* a, const float* b, std::size_t dim) noexcept {
    double acc[kLanes] = {};
    std::size_t i = 0;
    for (; i + kLanes <= dim; i += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) acc[l] += double{a[i + l]} * double{b[i + l]};
    }
    for (std::size_t l = 0; i + l < dim; ++l) acc[l] += double{a[i + l]} * double{b[i + l]};
    return static_cast<float>(((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])));
}

inline float dot(const float* a, const float* b, std::size_t dim, Accumulation acc) noexcept {
    return acc == Accumulation::f32 ? dot_f32(a, b, dim) : dot_f64(a, b, dim);
}

inline void check_dim(std::span<const float> qvec, const VectorStore& store) {
    if (qvec.size() != store.dim()) {
        throw Error(Errc::dim_error, "query has dim " + std::to_string(qvec.size()) + ", store has " +
                                         std::to_string(store.dim()));
    }
}

/// Scores `docs` into `out` (appending). Ids must already be range-checked.
inline void score_batch(std::span<const float> qvec, std::span<const DocId> docs, const VectorStore& store,
                        Accumulation acc, ScoredList& out) {
    const float* q = qvec.data();
    const float* base = store.data().data();
    const std::size_t dim = store.dim();
    const std::size_t start = out.size();
    out.resize(start + docs.size());
    Scored<float>* dst = out.data() + start;
    if (acc == Accumulation::f32) {
        for (std::size_t i = 0; i < docs.size(); ++i) {
            dst[i] = {docs[i], dot_f32(q, base + std::size_t{docs[i]} * dim, dim)};
        }
    } else {
        for (std::size_t i = 0; i < docs.size(); ++i) {
            dst[i] = {docs[i], dot_f64(q, base + std::size_t{docs[i]} * dim, dim)};
        }
    }
}

}  // namespace detail

/// Inner product of `qvec` with the vector of `doc`.
inline float dense_score(std::span<const float> qvec, DocId doc, const VectorStore& store,
                         Accumulation acc = Accumulation::f32) {
    detail::check_dim(qvec, store);
    if (doc >= store.size()) throw Error(Errc::id_error, "doc " + std::to_string(doc) + " out of range");
    return detail::dot(qvec.data(), store.row(doc).data(), store.dim(), acc);
}

/// Scores exactly the given documents and ranks them. `docs` must be duplicate-free.
inline ScoredList score_set(std::span<const float> qvec, std::span<const DocId> docs, const VectorStore& store,
                            Accumulation acc = Accumulation::f32) {
    detail::check_dim(qvec, store);
    for (DocId d : docs) {
        if (d >= store.size()) throw Error(Errc::id_error, "doc " + std::to_string(d) + " out of range");
    }
    ScoredList out;
    out.reserve(docs.size());
    detail::score_batch(qvec, docs, store, acc, out);
    std::sort(out.begin(), out.end(), RankOrder{});
    return out;
}

/// Scores every document and keeps the best `depth`. The ground truth for all
/// approximate methods.
inline ScoredList exhaustive_search(std::span<const float> qvec, const VectorStore& store, std::size_t depth,
                                    Accumulation acc = Accumulation::f32) {
    detail::check_dim(qvec, store);
    if (depth == 0) throw Error(Errc::config_error, "depth must be >= 1");
    const float* q = qvec.data();
    const float* base = store.data().data();
    const std::size_t dim = store.dim();
    thread_local std::vector<float> scores;
    scores.resize(store.size());
    if (acc == Accumulation::f32) {
        for (std::size_t d = 0; d < store.size(); ++d) scores[d] = detail::dot_f32(q, base + d * dim, dim);
    } else {
        for (std::size_t d = 0; d < store.size(); ++d) scores[d] = detail::dot_f64(q, base + d * dim, dim);
    }
    // Heap with the worst kept hit on top; a later doc with an equal score
    // ranks below every kept one, so only strictly greater scores can enter.
    const std::size_t keep = std::min(depth, store.size());
    ScoredList top;
    top.reserve(keep);
    for (std::size_t d = 0; d < keep; ++d) top.push_back({static_cast<DocId>(d), scores[d]});
    std::make_heap(top.begin(), top.end(), RankOrder{});
    for (std::size_t d = keep; d < store.size(); ++d) {
        if (scores[d] > top.front().score) {
            std::pop_heap(top.begin(), top.end(), RankOrder{});
            top.back() = {static_cast<DocId>(d), scores[d]};
            std::push_heap(top.begin(), top.end(), RankOrder{});
        }
    }
    std::sort(top.begin(), top.end(), RankOrder{});
    return top;
}

}  // namespace ladr
