#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "ladr/corpus.hpp"
#include "ladr/dense.hpp"
#include "ladr/io.hpp"
#include "ladr/lexical.hpp"
#include "ladr/types.hpp"

namespace ladr {

/// Per-document nearest-neighbor lists, stored as a D x k id matrix with a
/// length per row. Rows are best-first.
class ProximityGraph {
public:
    static constexpr std::size_t kMaxK = UINT16_MAX;

    ProximityGraph() = default;

    ProximityGraph(std::size_t num_docs, std::size_t k) : num_docs_(num_docs), k_(k) {
        if (k == 0 || k > kMaxK) throw Error(Errc::config_error, "graph k must be in [1, 65535]");
        if (num_docs >= kInvalidDoc) throw Error(Errc::config_error, "too many documents");
        ids_.assign(num_docs * k, kInvalidDoc);
        lens_.assign(num_docs, 0);
    }

    std::size_t size() const { return num_docs_; }
    std::size_t k() const { return k_; }

    std::span<const DocId> row(DocId d) const { return {ids_.data() + std::size_t{d} * k_, lens_[d]}; }

    /// Replaces row `d`. Ids must be in range, distinct, and not `d` itself.
    void set_row(DocId d, std::span<const DocId> ids) {
        if (d >= num_docs_) throw Error(Errc::id_error, "row " + std::to_string(d) + " out of range");
        if (ids.size() > k_) throw Error(Errc::config_error, "row longer than k");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] >= num_docs_) throw Error(Errc::id_error, "neighbor id out of range in row " + std::to_string(d));
            if (ids[i] == d) throw Error(Errc::input_error, "self-loop in row " + std::to_string(d));
            if (std::find(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(i), ids[i]) !=
                ids.begin() + static_cast<std::ptrdiff_t>(i)) {
                throw Error(Errc::input_error, "duplicate neighbor in row " + std::to_string(d));
            }
        }
        DocId* dst = ids_.data() + std::size_t{d} * k_;
        std::copy(ids.begin(), ids.end(), dst);
        std::fill(dst + ids.size(), dst + k_, kInvalidDoc);
        lens_[d] = static_cast<std::uint16_t>(ids.size());
    }

    friend bool operator==(const ProximityGraph&, const ProximityGraph&) = default;

private:
    friend ProximityGraph decode_graph(std::string_view);
    friend std::string encode_graph(const ProximityGraph&);

    std::size_t num_docs_ = 0;
    std::size_t k_ = 0;
    std::vector<DocId> ids_;
    std::vector<std::uint16_t> lens_;
};

enum class GraphMethod { exact, approx, bm25 };

struct GraphBuildConfig {
    GraphMethod method = GraphMethod::exact;
    std::size_t k = 128;
    std::size_t beam = 64;
    std::size_t m_terms = 32;
    std::uint64_t seed = 42;
    std::size_t threads = 1;
    Bm25Params bm25{};

    void validate() const {
        if (k == 0 || k > ProximityGraph::kMaxK) throw Error(Errc::config_error, "k must be in [1, 65535]");
        if (method == GraphMethod::approx && beam < k) throw Error(Errc::config_error, "beam must be >= k");
        if (method == GraphMethod::bm25 && m_terms == 0) throw Error(Errc::config_error, "m_terms must be >= 1");
        if (threads == 0) throw Error(Errc::config_error, "threads must be >= 1");
        bm25.validate();
    }
};

namespace detail {

inline void check_graph_size(std::size_t num_docs) {
    if (num_docs < 2) throw Error(Errc::graph_too_small, "need at least 2 documents, have " + std::to_string(num_docs));
}

/// Bounded best-k collector: a heap under RankOrder with the worst kept hit on top.
class TopK {
public:
    explicit TopK(Scored<float>* slots, std::size_t capacity) : slots_(slots), cap_(capacity) {}

    void offer(Scored<float> hit) {
        if (size_ < cap_) {
            slots_[size_++] = hit;
            std::push_heap(slots_, slots_ + size_, RankOrder{});
        } else if (RankOrder{}(hit, slots_[0])) {
            std::pop_heap(slots_, slots_ + size_, RankOrder{});
            slots_[size_ - 1] = hit;
            std::push_heap(slots_, slots_ + size_, RankOrder{});
        }
    }

    std::size_t size() const { return size_; }

private:
    Scored<float>* slots_;
    std::size_t cap_;
    std::size_t size_ = 0;
};

inline void fill_rows(ProximityGraph& graph, std::vector<Scored<float>>& slots, std::span<const std::size_t> lens,
                      std::size_t stride) {
    std::vector<DocId> ids;
    for (std::size_t d = 0; d < graph.size(); ++d) {
        auto* begin = slots.data() + d * stride;
        std::sort(begin, begin + lens[d], RankOrder{});
        ids.clear();
        for (std::size_t i = 0; i < lens[d]; ++i) ids.push_back(begin[i].doc);
        graph.set_row(static_cast<DocId>(d), ids);
    }
}

}  // namespace detail

/// Brute-force kNN graph under inner product. Tiled so each block of vectors
/// stays in cache; with one thread each pair is scored once and offered to
/// both rows.
inline ProximityGraph build_exact_graph(const VectorStore& store, std::size_t k, std::size_t threads = 1) {
    const std::size_t num_docs = store.size();
    detail::check_graph_size(num_docs);
    ProximityGraph graph(num_docs, k);
    const std::size_t row_cap = std::min(k, num_docs - 1);
    const std::size_t dim = store.dim();
    const float* base = store.data().data();

    std::vector<Scored<float>> slots(num_docs * row_cap);
    std::vector<detail::TopK> heaps;
    heaps.reserve(num_docs);
    for (std::size_t d = 0; d < num_docs; ++d) heaps.emplace_back(slots.data() + d * row_cap, row_cap);

    constexpr std::size_t kTile = 64;
    const std::size_t num_tiles = (num_docs + kTile - 1) / kTile;
    threads = std::clamp<std::size_t>(threads, 1, num_tiles);

    if (threads == 1) {
        for (std::size_t ti = 0; ti < num_tiles; ++ti) {
            const std::size_t i0 = ti * kTile, i1 = std::min(num_docs, i0 + kTile);
            for (std::size_t tj = ti; tj < num_tiles; ++tj) {
                const std::size_t j0 = tj * kTile, j1 = std::min(num_docs, j0 + kTile);
                for (std::size_t i = i0; i < i1; ++i) {
                    const float* a = base + i * dim;
                    for (std::size_t j = std::max(j0, i + 1); j < j1; ++j) {
                        const float s = detail::dot_f32(a, base + j * dim, dim);
                        heaps[i].offer({static_cast<DocId>(j), s});
                        heaps[j].offer({static_cast<DocId>(i), s});
                    }
                }
            }
        }
    } else {
        auto work = [&](std::size_t first_tile, std::size_t stride) {
            for (std::size_t ti = first_tile; ti < num_tiles; ti += stride) {
                const std::size_t i0 = ti * kTile, i1 = std::min(num_docs, i0 + kTile);
                for (std::size_t tj = 0; tj < num_tiles; ++tj) {
                    const std::size_t j0 = tj * kTile, j1 = std::min(num_docs, j0 + kTile);
                    for (std::size_t i = i0; i < i1; ++i) {
                        const float* a = base + i * dim;
                        for (std::size_t j = j0; j < j1; ++j) {
                            if (j == i) continue;
                            heaps[i].offer({static_cast<DocId>(j), detail::dot_f32(a, base + j * dim, dim)});
                        }
                    }
                }
            }
        };
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }

    std::vector<std::size_t> lens(num_docs);
    for (std::size_t d = 0; d < num_docs; ++d) lens[d] = heaps[d].size();
    detail::fill_rows(graph, slots, lens, row_cap);
    return graph;
}

/// Single-layer incremental construction: documents are inserted in a seeded
/// shuffled order; each insertion runs a best-first beam search from the first
/// inserted document, keeps the best k hits as its row, and offers itself to
/// the row of every beam hit (rows keep their k most similar).
///
/// The search walks a separate navigation adjacency in which every insertion
/// links the new document with its best k hits in both directions and nothing
/// is ever pruned, so edges made while the graph was small stay available as
/// long-range links.
inline ProximityGraph build_approx_graph(const VectorStore& store, std::size_t k, std::size_t beam,
                                         std::uint64_t seed = 42) {
    if (k == 0) throw Error(Errc::config_error, "k must be >= 1");
    if (beam < k) throw Error(Errc::config_error, "beam (" + std::to_string(beam) + ") must be >= k (" +
                                                      std::to_string(k) + ")");
    const std::size_t num_docs = store.size();
    detail::check_graph_size(num_docs);
    ProximityGraph graph(num_docs, k);
    const std::size_t dim = store.dim();
    const float* base = store.data().data();
    auto sim = [&](std::size_t a, std::size_t b) { return detail::dot_f32(base + a * dim, base + b * dim, dim); };

    // Fisher-Yates over raw mt19937_64 output.
    std::vector<DocId> order(num_docs);
    for (std::size_t i = 0; i < num_docs; ++i) order[i] = static_cast<DocId>(i);
    std::mt19937_64 rng(seed);
    for (std::size_t i = num_docs - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

    std::vector<Scored<float>> rows(num_docs * k);
    std::vector<std::size_t> lens(num_docs, 0);
    auto offer_to_row = [&](std::size_t owner, Scored<float> hit) {
        Scored<float>* row = rows.data() + owner * k;
        std::size_t& len = lens[owner];
        if (len == k && !RankOrder{}(hit, row[k - 1])) return;
        std::size_t pos = std::upper_bound(row, row + len, hit, RankOrder{}) - row;
        if (len < k) ++len;
        for (std::size_t i = len - 1; i > pos; --i) row[i] = row[i - 1];
        row[pos] = hit;
    };

    std::vector<std::vector<DocId>> links(num_docs);
    std::vector<std::uint32_t> visited(num_docs, 0);
    std::uint32_t epoch = 0;
    // Best candidate on top.
    auto worse = [](const Scored<float>& a, const Scored<float>& b) { return RankOrder{}(b, a); };
    std::vector<Scored<float>> candidates;
    std::vector<Scored<float>> results;
    const DocId entry = order[0];

    for (std::size_t t = 1; t < num_docs; ++t) {
        const DocId x = order[t];
        ++epoch;
        candidates.clear();
        results.clear();
        const Scored<float> start{entry, sim(x, entry)};
        visited[entry] = epoch;
        candidates.push_back(start);
        results.push_back(start);
        while (!candidates.empty()) {
            std::pop_heap(candidates.begin(), candidates.end(), worse);
            const Scored<float> cur = candidates.back();
            candidates.pop_back();
            if (results.size() == beam && RankOrder{}(results.front(), cur)) break;
            for (const DocId nb : links[cur.doc]) {
                if (visited[nb] == epoch) continue;
                visited[nb] = epoch;
                const Scored<float> hit{nb, sim(x, nb)};
                if (results.size() < beam || RankOrder{}(hit, results.front())) {
                    candidates.push_back(hit);
                    std::push_heap(candidates.begin(), candidates.end(), worse);
                    results.push_back(hit);
                    std::push_heap(results.begin(), results.end(), RankOrder{});
                    if (results.size() > beam) {
                        std::pop_heap(results.begin(), results.end(), RankOrder{});
                        results.pop_back();
                    }
                }
            }
        }
        std::sort(results.begin(), results.end(), RankOrder{});
        const std::size_t take = std::min(k, results.size());
        std::copy(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(take), rows.data() + std::size_t{x} * k);
        lens[x] = take;
        for (const auto& r : results) offer_to_row(r.doc, Scored<float>{x, r.score});
        for (std::size_t i = 0; i < take; ++i) {
            links[x].push_back(results[i].doc);
            links[results[i].doc].push_back(x);
        }
    }

    std::vector<DocId> ids;
    for (std::size_t d = 0; d < num_docs; ++d) {
        ids.clear();
        for (std::size_t i = 0; i < lens[d]; ++i) ids.push_back(rows[d * k + i].doc);
        graph.set_row(static_cast<DocId>(d), ids);
    }
    return graph;
}

/// The `m_terms` terms of a document with the highest tf * idf, ties by term.
inline std::vector<std::string> document_query_terms(const InvertedIndex& index, std::string_view text,
                                                     std::size_t m_terms) {
    struct Weighted {
        std::string term;
        double weight;
    };
    std::vector<Weighted> weighted;
    for (auto& [term, tf] : term_counts(text)) {
        auto id = index.term_id(term);
        if (!id) continue;
        weighted.push_back({std::move(term), static_cast<double>(tf) * index.idf(*id)});
    }
    auto by_weight = [](const Weighted& a, const Weighted& b) {
        return a.weight > b.weight || (a.weight == b.weight && a.term < b.term);
    };
    const std::size_t take = std::min(m_terms, weighted.size());
    std::partial_sort(weighted.begin(), weighted.begin() + static_cast<std::ptrdiff_t>(take), weighted.end(), by_weight);
    std::vector<std::string> terms;
    for (std::size_t i = 0; i < take; ++i) terms.push_back(std::move(weighted[i].term));
    return terms;
}

/// Row d holds the top-k BM25 hits (excluding d) for a query made of d's
/// strongest terms. Documents without tokens, or sharing no term with any
/// other document, get an empty row.
inline ProximityGraph build_bm25_graph(const InvertedIndex& index, const Corpus& corpus, std::size_t k,
                                       std::size_t m_terms, const Bm25Params& params = {}, std::size_t threads = 1) {
    if (m_terms == 0) throw Error(Errc::config_error, "m_terms must be >= 1");
    if (index.num_docs() != corpus.size()) {
        throw Error(Errc::input_error, "index and corpus disagree on document count");
    }
    params.validate();
    const std::size_t num_docs = corpus.size();
    detail::check_graph_size(num_docs);
    ProximityGraph graph(num_docs, k);
    std::vector<std::vector<DocId>> rows(num_docs);

    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t d = first; d < num_docs; d += stride) {
            const auto terms = document_query_terms(index, corpus[static_cast<DocId>(d)].text, m_terms);
            if (terms.empty()) continue;
            for (const auto& hit : lexical_top_n(index, terms, k + 1, params)) {
                if (hit.doc != d && rows[d].size() < k) rows[d].push_back(hit.doc);
            }
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, num_docs);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    std::size_t empty_rows = 0;
    for (std::size_t d = 0; d < num_docs; ++d) {
        if (rows[d].empty()) {
            ++empty_rows;
            spdlog::debug("bm25 graph: document {} ({}) has an empty row", d, corpus.external_id(static_cast<DocId>(d)));
        }
        graph.set_row(static_cast<DocId>(d), rows[d]);
    }
    if (empty_rows > 0) spdlog::info("bm25 graph: {} of {} rows are empty", empty_rows, num_docs);
    return graph;
}

inline ProximityGraph build_graph(const GraphBuildConfig& config, const VectorStore* store,
                                  const InvertedIndex* index = nullptr, const Corpus* corpus = nullptr) {
    config.validate();
    switch (config.method) {
    case GraphMethod::exact:
        if (!store) throw Error(Errc::config_error, "exact graph needs document vectors");
        return build_exact_graph(*store, config.k, config.threads);
    case GraphMethod::approx:
        if (!store) throw Error(Errc::config_error, "approx graph needs document vectors");
        return build_approx_graph(*store, config.k, config.beam, config.seed);
    case GraphMethod::bm25:
        if (!index || !corpus) throw Error(Errc::config_error, "bm25 graph needs a corpus and its index");
        return build_bm25_graph(*index, *corpus, config.k, config.m_terms, config.bm25, config.threads);
    }
    throw Error(Errc::config_error, "unknown graph method");
}

/// Union of the first `k_use` entries of each listed row, ascending and
/// deduplicated.
inline std::vector<DocId> neighbors(const ProximityGraph& graph, std::span<const DocId> docs, std::size_t k_use) {
    if (k_use > graph.k()) {
        throw Error(Errc::config_error, "k_use " + std::to_string(k_use) + " exceeds graph k " + std::to_string(graph.k()));
    }
    std::vector<DocId> out;
    for (DocId d : docs) {
        if (d >= graph.size()) throw Error(Errc::id_error, "doc " + std::to_string(d) + " out of range");
        auto row = graph.row(d);
        const std::size_t take = std::min(k_use, row.size());
        out.insert(out.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline constexpr std::string_view kGraphMagic = "LADRGRF1";

/// Magic, u32 D, u32 k, D x u16 row lengths, then the D x k id matrix with
/// unused slots set to 0xFFFFFFFF.
inline std::string encode_graph(const ProximityGraph& graph) {
    io::Writer out;
    out.bytes(kGraphMagic);
    out.put(static_cast<std::uint32_t>(graph.num_docs_));
    out.put(static_cast<std::uint32_t>(graph.k_));
    out.put_array(std::span<const std::uint16_t>(graph.lens_));
    out.put_array(std::span<const DocId>(graph.ids_));
    return std::move(out.str());
}

inline ProximityGraph decode_graph(std::string_view bytes) {
    io::Reader in(bytes);
    io::expect_magic(in, kGraphMagic, "graph file");
    const auto num_docs = in.get<std::uint32_t>();
    const auto k = in.get<std::uint32_t>();
    if (k == 0 || k > ProximityGraph::kMaxK || num_docs == kInvalidDoc) {
        throw Error(Errc::format_error, "graph file: invalid header");
    }
    ProximityGraph graph(num_docs, k);
    in.get_array(std::span<std::uint16_t>(graph.lens_));
    in.get_array(std::span<DocId>(graph.ids_));
    if (in.remaining() != 0) throw Error(Errc::format_error, "graph file: trailing bytes");
    for (std::size_t d = 0; d < num_docs; ++d) {
        if (graph.lens_[d] > k) throw Error(Errc::format_error, "graph file: row " + std::to_string(d) + " too long");
        const DocId* row = graph.ids_.data() + d * k;
        for (std::size_t i = 0; i < k; ++i) {
            const bool used = i < graph.lens_[d];
            if (used && (row[i] >= num_docs || row[i] == d)) {
                throw Error(Errc::format_error, "graph file: bad neighbor in row " + std::to_string(d));
            }
            if (!used && row[i] != kInvalidDoc) {
                throw Error(Errc::format_error, "graph file: nonzero padding in row " + std::to_string(d));
            }
        }
    }
    return graph;
}

inline void save_graph(const ProximityGraph& graph, const std::filesystem::path& path) {
    io::write_file(path, encode_graph(graph));
}

inline ProximityGraph load_graph(const std::filesystem::path& path) { return decode_graph(io::read_file(path)); }

/// Bytes of the neighbor-id payload for a full graph (4-byte ids, D x k).
constexpr std::uint64_t graph_payload_bytes(std::uint64_t num_docs, std::uint64_t k) { return num_docs * k * 4; }

}  // namespace ladr
