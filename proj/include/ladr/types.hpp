#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ladr {

/// Dense ordinal of a document, assigned in corpus file order.
using DocId = std::uint32_t;

inline constexpr DocId kInvalidDoc = UINT32_MAX;

enum class Errc {
    duplicate_id,
    empty_corpus,
    parse_error,
    format_error,
    truncation_error,
    invalid_vector,
    alignment_error,
    empty_index,
    graph_too_small,
    config_error,
    dim_error,
    id_error,
    input_error,
    eval_error,
    io_error,
};

constexpr std::string_view errc_name(Errc code) {
    switch (code) {
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::parse_error: return "ParseError";
    case Errc::format_error: return "FormatError";
    case Errc::truncation_error: return "TruncationError";
    case Errc::invalid_vector: return "InvalidVector";
    case Errc::alignment_error: return "AlignmentError";
    case Errc::empty_index: return "EmptyIndex";
    case Errc::graph_too_small: return "GraphTooSmall";
    case Errc::config_error: return "ConfigError";
    case Errc::dim_error: return "DimError";
    case Errc::id_error: return "IdError";
    case Errc::input_error: return "InputError";
    case Errc::eval_error: return "EvalError";
    case Errc::io_error: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library. `where()` carries the line number
/// (ParseError) or row index (InvalidVector) when one applies.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::optional<std::size_t> where = std::nullopt)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), where_(where) {}

    Errc code() const noexcept { return code_; }
    std::optional<std::size_t> where() const noexcept { return where_; }

private:
    Errc code_;
    std::optional<std::size_t> where_;
};

template <typename Score>
struct Scored {
    DocId doc;
    Score score;

    friend bool operator==(const Scored&, const Scored&) = default;
};

/// Strict total order used for every ranking: higher score first, then lower DocId.
struct RankOrder {
    template <typename Score>
    constexpr bool operator()(const Scored<Score>& a, const Scored<Score>& b) const noexcept {
        return a.score > b.score || (a.score == b.score && a.doc < b.doc);
    }
};

template <typename Score>
using BasicScoredList = std::vector<Scored<Score>>;

/// Dense retrieval output.
using ScoredList = BasicScoredList<float>;
/// BM25 output; scores kept in double so ordering matches the formula exactly.
using LexicalList = BasicScoredList<double>;

/// Sorts `list` by RankOrder and truncates it to `depth` entries.
template <typename Score>
void rank_truncate(BasicScoredList<Score>& list, std::size_t depth) {
    if (depth < list.size()) {
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(depth), list.end(),
                          RankOrder{});
        list.resize(depth);
    } else {
        std::sort(list.begin(), list.end(), RankOrder{});
    }
}

template <typename Score>
std::vector<DocId> doc_ids(const BasicScoredList<Score>& list) {
    std::vector<DocId> ids;
    ids.reserve(list.size());
    for (const auto& e : list) ids.push_back(e.doc);
    return ids;
}

}  // namespace ladr
