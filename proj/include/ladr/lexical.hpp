#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ladr/corpus.hpp"
#include "ladr/io.hpp"
#include "ladr/types.hpp"

namespace ladr {

namespace detail {

/// Decodes one UTF-8 sequence at `pos`, advancing it. Malformed input yields
/// U+FFFD and consumes one byte.
inline char32_t next_codepoint(std::string_view s, std::size_t& pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    if (pos + len > s.size()) {
        ++pos;
        return 0xFFFD;
    }
    for (std::size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    pos += len;
    return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

/// Letters and digits are word characters. Outside ASCII this is a block-level
/// approximation: punctuation, symbol, space, private-use and emoji blocks
/// separate; everything else is treated as a letter.
inline bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    }
    if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;
    if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp >= 0xE000 && cp <= 0xF8FF) return false;
    if (cp >= 0xFE30 && cp <= 0xFE6F) return false;
    if ((cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
        (cp >= 0xFF5B && cp <= 0xFF65)) {
        return false;
    }
    if (cp >= 0xFFF0 && cp <= 0xFFFF) return false;
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;
    return true;
}

/// Simple lowercase mapping for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp < 0xC0) return cp;
    if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 0x20;
    if (cp >= 0x100 && cp <= 0x17F) {
        if (cp == 0x130) return 'i';
        if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) return (cp % 2 == 1) ? cp + 1 : cp;
        if (cp == 0x178) return 0xFF;
        if (cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

}  // namespace detail

/// Lowercased runs of letters and digits; everything else separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = detail::next_codepoint(text, pos);
        if (detail::is_word_char(cp)) {
            detail::append_utf8(current, detail::to_lower(cp));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;

    void validate() const {
        if (!(k1 >= 0.0) || !std::isfinite(k1)) throw Error(Errc::config_error, "bm25 k1 must be >= 0");
        if (!(b >= 0.0 && b <= 1.0)) throw Error(Errc::config_error, "bm25 b must be in [0, 1]");
    }
};

struct Posting {
    DocId doc;
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

using TermId = std::uint32_t;

/// Term -> postings (ascending DocId) plus the statistics BM25 needs.
class InvertedIndex {
public:
    std::size_t num_docs() const { return doc_len_.size(); }
    std::size_t num_terms() const { return terms_.size(); }
    double avgdl() const { return avgdl_; }
    std::uint32_t doc_len(DocId d) const { return doc_len_[d]; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_len_; }

    std::optional<TermId> term_id(std::string_view term) const {
        auto it = lookup_.find(std::string(term));
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& term(TermId t) const { return terms_[t]; }
    std::span<const Posting> postings(TermId t) const { return postings_[t]; }
    std::size_t df(TermId t) const { return postings_[t].size(); }

    std::span<const Posting> postings(std::string_view term) const {
        auto id = term_id(term);
        if (!id) return {};
        return postings_[*id];
    }

    double idf(TermId t) const {
        const double n = static_cast<double>(num_docs());
        const double df_t = static_cast<double>(df(t));
        return std::log(1.0 + (n - df_t + 0.5) / (df_t + 0.5));
    }

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
        return a.terms_ == b.terms_ && a.postings_ == b.postings_ && a.doc_len_ == b.doc_len_;
    }

private:
    friend InvertedIndex build_lexical_index(const Corpus&, std::size_t);
    friend InvertedIndex decode_lexical_index(std::string_view, std::uint64_t);

    void finish() {
        lookup_.clear();
        lookup_.reserve(terms_.size());
        for (TermId t = 0; t < terms_.size(); ++t) lookup_.emplace(terms_[t], t);
        std::uint64_t total = 0;
        for (auto len : doc_len_) total += len;
        avgdl_ = doc_len_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(doc_len_.size());
        if (total == 0) throw Error(Errc::empty_index, "no document produced any token");
    }

    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::unordered_map<std::string, TermId> lookup_;
    std::vector<std::uint32_t> doc_len_;
    double avgdl_ = 0.0;
};

/// Term frequencies of one document, sorted by term.
inline std::vector<std::pair<std::string, std::uint32_t>> term_counts(std::string_view text) {
    auto tokens = tokenize(text);
    std::sort(tokens.begin(), tokens.end());
    std::vector<std::pair<std::string, std::uint32_t>> counts;
    for (auto& tok : tokens) {
        if (!counts.empty() && counts.back().first == tok) {
            ++counts.back().second;
        } else {
            counts.emplace_back(std::move(tok), 1);
        }
    }
    return counts;
}

/// Tokenizes documents on `threads` workers, then merges in DocId order so the
/// result does not depend on the thread count. Term ids follow first occurrence.
inline InvertedIndex build_lexical_index(const Corpus& corpus, std::size_t threads = 1) {
    const std::size_t num_docs = corpus.size();
    if (num_docs == 0) throw Error(Errc::empty_corpus, "corpus has no documents");
    std::vector<std::vector<std::pair<std::string, std::uint32_t>>> per_doc(num_docs);
    std::vector<std::uint32_t> lengths(num_docs, 0);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t d = begin; d < end; ++d) {
            per_doc[d] = term_counts(corpus[static_cast<DocId>(d)].text);
            std::uint32_t len = 0;
            for (const auto& [_, tf] : per_doc[d]) len += tf;
            lengths[d] = len;
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, num_docs);
    if (threads == 1) {
        work(0, num_docs);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (num_docs + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(num_docs, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
    }

    InvertedIndex index;
    index.doc_len_ = std::move(lengths);
    std::unordered_map<std::string, TermId> ids;
    for (std::size_t d = 0; d < num_docs; ++d) {
        for (auto& [term, tf] : per_doc[d]) {
            auto [it, inserted] = ids.try_emplace(term, static_cast<TermId>(index.terms_.size()));
            if (inserted) {
                index.terms_.push_back(term);
                index.postings_.emplace_back();
            }
            index.postings_[it->second].push_back(Posting{static_cast<DocId>(d), tf});
        }
        per_doc[d].clear();
        per_doc[d].shrink_to_fit();
    }
    index.finish();
    return index;
}

/// BM25 contribution of one posting.
inline double bm25_term_score(double idf, std::uint32_t tf, std::uint32_t doc_len, double avgdl,
                              const Bm25Params& params) {
    const double f = static_cast<double>(tf);
    const double norm = params.k1 * (1.0 - params.b + params.b * static_cast<double>(doc_len) / avgdl);
    return idf * f * (params.k1 + 1.0) / (f + norm);
}

/// Distinct known terms of a query, in first-occurrence order.
inline std::vector<TermId> resolve_terms(const InvertedIndex& index, std::span<const std::string> tokens) {
    std::vector<TermId> ids;
    for (const auto& tok : tokens) {
        auto id = index.term_id(tok);
        if (id && std::find(ids.begin(), ids.end(), *id) == ids.end()) ids.push_back(*id);
    }
    return ids;
}

/// Exact top-n by BM25, document-at-a-time over the union of the query terms'
/// postings with a bounded heap. Only documents with positive score appear.
inline LexicalList lexical_top_n(const InvertedIndex& index, std::span<const std::string> query_tokens,
                                 std::size_t n, const Bm25Params& params = {}) {
    if (n == 0) throw Error(Errc::config_error, "lexical n must be >= 1");
    params.validate();
    const auto terms = resolve_terms(index, query_tokens);

    struct Cursor {
        std::span<const Posting> list;
        std::size_t pos;
        double idf;
    };
    std::vector<Cursor> cursors;
    cursors.reserve(terms.size());
    for (TermId t : terms) cursors.push_back(Cursor{index.postings(t), 0, index.idf(t)});

    // Max-heap under RankOrder keeps the worst retained hit on top.
    std::priority_queue<Scored<double>, std::vector<Scored<double>>, RankOrder> heap;
    const double avgdl = index.avgdl();
    while (true) {
        DocId doc = kInvalidDoc;
        for (const auto& c : cursors) {
            if (c.pos < c.list.size()) doc = std::min(doc, c.list[c.pos].doc);
        }
        if (doc == kInvalidDoc) break;
        double score = 0.0;
        const auto len = index.doc_len(doc);
        for (auto& c : cursors) {
            if (c.pos < c.list.size() && c.list[c.pos].doc == doc) {
                score += bm25_term_score(c.idf, c.list[c.pos].tf, len, avgdl, params);
                ++c.pos;
            }
        }
        if (!(score > 0.0)) continue;
        Scored<double> hit{doc, score};
        if (heap.size() < n) {
            heap.push(hit);
        } else if (RankOrder{}(hit, heap.top())) {
            heap.pop();
            heap.push(hit);
        }
    }
    LexicalList out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

inline constexpr std::string_view kIndexMagic = "LADRIDX1";

/// Cache file: magic, u64 corpus checksum, u32 D, u32 terms, doc lengths,
/// then per term (u32 byte length, bytes, u32 df, df x (u32 doc, u32 tf)).
inline std::string encode_lexical_index(const InvertedIndex& index, std::uint64_t corpus_checksum) {
    io::Writer out;
    out.bytes(kIndexMagic);
    out.put(corpus_checksum);
    out.put(static_cast<std::uint32_t>(index.num_docs()));
    out.put(static_cast<std::uint32_t>(index.num_terms()));
    out.put_array(std::span<const std::uint32_t>(index.doc_lengths()));
    for (TermId t = 0; t < index.num_terms(); ++t) {
        const auto& term = index.term(t);
        out.put(static_cast<std::uint32_t>(term.size()));
        out.bytes(term);
        auto plist = index.postings(t);
        out.put(static_cast<std::uint32_t>(plist.size()));
        for (const auto& p : plist) {
            out.put(p.doc);
            out.put(p.tf);
        }
    }
    return std::move(out.str());
}

/// Decodes a cache file; a checksum different from `expected_checksum` means
/// the cache was built from another corpus.
inline InvertedIndex decode_lexical_index(std::string_view bytes, std::uint64_t expected_checksum) {
    io::Reader in(bytes);
    io::expect_magic(in, kIndexMagic, "index file");
    if (in.get<std::uint64_t>() != expected_checksum) {
        throw Error(Errc::format_error, "index file was built from a different corpus");
    }
    InvertedIndex index;
    const auto num_docs = in.get<std::uint32_t>();
    const auto num_terms = in.get<std::uint32_t>();
    index.doc_len_.resize(num_docs);
    in.get_array(std::span<std::uint32_t>(index.doc_len_));
    index.terms_.reserve(num_terms);
    index.postings_.reserve(num_terms);
    for (std::uint32_t t = 0; t < num_terms; ++t) {
        const auto len = in.get<std::uint32_t>();
        index.terms_.emplace_back(in.bytes(len));
        const auto df = in.get<std::uint32_t>();
        auto& plist = index.postings_.emplace_back();
        plist.reserve(df);
        for (std::uint32_t i = 0; i < df; ++i) {
            Posting p{in.get<DocId>(), in.get<std::uint32_t>()};
            if (p.doc >= num_docs || p.tf == 0 || (!plist.empty() && plist.back().doc >= p.doc)) {
                throw Error(Errc::format_error, "index file: invalid posting for term '" + index.terms_.back() + "'");
            }
            plist.push_back(p);
        }
    }
    if (in.remaining() != 0) throw Error(Errc::format_error, "index file: trailing bytes");
    index.finish();
    return index;
}

}  // namespace ladr
