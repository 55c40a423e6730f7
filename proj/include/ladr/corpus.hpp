#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ladr/io.hpp"
#include "ladr/types.hpp"

namespace ladr {

namespace detail {

/// Calls fn(line_number, line) for every line; strips a trailing '\r'.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fn(++line_no, line);
        pos = end + 1;
    }
}

inline std::pair<std::string_view, std::string_view> split_tab(std::string_view line, std::size_t line_no,
                                                               const std::string& what) {
    auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
        throw Error(Errc::parse_error, what + " line " + std::to_string(line_no) + ": expected id<TAB>text",
                    line_no);
    }
    return {line.substr(0, tab), line.substr(tab + 1)};
}

}  // namespace detail

struct Document {
    std::string external_id;
    std::string text;
};

/// Documents in file order with the external-id index.
class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
        if (docs_.empty()) throw Error(Errc::empty_corpus, "corpus has no documents");
        id_map_.reserve(docs_.size());
        for (std::size_t i = 0; i < docs_.size(); ++i) {
            auto [it, inserted] = id_map_.emplace(docs_[i].external_id, static_cast<DocId>(i));
            if (!inserted) {
                throw Error(Errc::duplicate_id, "duplicate document id '" + docs_[i].external_id + "'", i + 1);
            }
        }
    }

    std::size_t size() const { return docs_.size(); }
    const Document& operator[](DocId id) const { return docs_[id]; }
    const std::string& external_id(DocId id) const { return docs_[id].external_id; }
    const std::vector<Document>& documents() const { return docs_; }

    std::optional<DocId> find(std::string_view external_id) const {
        auto it = id_map_.find(std::string(external_id));
        if (it == id_map_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, DocId> id_map_;
};

/// Parses TSV (`id<TAB>text`) or JSONL (`{"id":..,"text":..}`) corpus content.
/// Blank lines are skipped.
inline Corpus parse_corpus(std::string_view content, bool jsonl) {
    std::vector<Document> docs;
    std::unordered_map<std::string, std::size_t> seen;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        if (line.find_first_not_of(" \t") == std::string_view::npos) return;
        Document doc;
        if (jsonl) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw Error(Errc::parse_error, "corpus line " + std::to_string(line_no) + ": " + e.what(), line_no);
            }
            if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["text"].is_string()) {
                throw Error(Errc::parse_error,
                            "corpus line " + std::to_string(line_no) + ": expected {\"id\":..., \"text\":...}",
                            line_no);
            }
            const auto& id = j["id"];
            if (id.is_string()) {
                doc.external_id = id.get<std::string>();
            } else if (id.is_number_integer()) {
                doc.external_id = std::to_string(id.get<long long>());
            } else {
                throw Error(Errc::parse_error, "corpus line " + std::to_string(line_no) + ": id must be string or integer",
                            line_no);
            }
            doc.text = j["text"].get<std::string>();
        } else {
            auto [id, text] = detail::split_tab(line, line_no, "corpus");
            doc.external_id = std::string(id);
            doc.text = std::string(text);
        }
        if (doc.external_id.empty()) {
            throw Error(Errc::parse_error, "corpus line " + std::to_string(line_no) + ": empty id", line_no);
        }
        if (!seen.emplace(doc.external_id, line_no).second) {
            throw Error(Errc::duplicate_id, "duplicate document id '" + doc.external_id + "' on line " +
                                                std::to_string(line_no),
                        line_no);
        }
        docs.push_back(std::move(doc));
    });
    if (docs.empty()) throw Error(Errc::empty_corpus, "corpus has no documents");
    return Corpus(std::move(docs));
}

inline bool is_jsonl_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    return ext == ".jsonl" || ext == ".json" || ext == ".ndjson";
}

inline Corpus load_corpus(const std::filesystem::path& path) {
    return parse_corpus(io::read_file(path), is_jsonl_path(path));
}

/// Row-major float32 matrix of document (or query) vectors.
class VectorStore {
public:
    VectorStore() = default;

    VectorStore(std::size_t rows, std::size_t dim, std::vector<float> data)
        : rows_(rows), dim_(dim), data_(std::move(data)) {
        if (dim_ == 0) throw Error(Errc::dim_error, "vector dimensionality must be >= 1");
        if (data_.size() != rows_ * dim_) {
            throw Error(Errc::dim_error, "expected " + std::to_string(rows_ * dim_) + " values, got " +
                                             std::to_string(data_.size()));
        }
        for (std::size_t r = 0; r < rows_; ++r) {
            for (float v : row(static_cast<DocId>(r))) {
                if (!std::isfinite(v)) {
                    throw Error(Errc::invalid_vector, "non-finite value in row " + std::to_string(r), r);
                }
            }
        }
    }

    std::size_t size() const { return rows_; }
    std::size_t dim() const { return dim_; }
    std::span<const float> data() const { return data_; }

    std::span<const float> row(DocId id) const { return {data_.data() + std::size_t{id} * dim_, dim_}; }

    friend bool operator==(const VectorStore&, const VectorStore&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<float> data_;
};

inline constexpr std::string_view kVectorMagic = "LADRVEC1";

inline std::string encode_vectors(const VectorStore& store) {
    io::Writer out;
    out.bytes(kVectorMagic);
    out.put(static_cast<std::uint32_t>(store.size()));
    out.put(static_cast<std::uint32_t>(store.dim()));
    out.put_array(store.data());
    return std::move(out.str());
}

inline VectorStore decode_vectors(std::string_view bytes) {
    io::Reader in(bytes);
    io::expect_magic(in, kVectorMagic, "vector file");
    const auto rows = in.get<std::uint32_t>();
    const auto dim = in.get<std::uint32_t>();
    if (dim == 0) throw Error(Errc::format_error, "vector file: dim is 0");
    std::vector<float> data(std::size_t{rows} * dim);
    in.get_array(std::span<float>(data));
    if (in.remaining() != 0) {
        throw Error(Errc::format_error, "vector file: " + std::to_string(in.remaining()) + " trailing bytes");
    }
    return VectorStore(rows, dim, std::move(data));
}

inline void save_vectors(const VectorStore& store, const std::filesystem::path& path) {
    io::write_file(path, encode_vectors(store));
}

inline VectorStore load_vectors(const std::filesystem::path& path) { return decode_vectors(io::read_file(path)); }

/// Copy of `store` with every nonzero row scaled to unit L2 norm, so inner
/// product becomes cosine similarity.
inline VectorStore normalized(const VectorStore& store) {
    std::vector<float> data(store.data().begin(), store.data().end());
    for (std::size_t r = 0; r < store.size(); ++r) {
        float* row = data.data() + r * store.dim();
        double norm = 0.0;
        for (std::size_t i = 0; i < store.dim(); ++i) norm += double{row[i]} * row[i];
        if (norm > 0.0) {
            const auto inv = static_cast<float>(1.0 / std::sqrt(norm));
            for (std::size_t i = 0; i < store.dim(); ++i) row[i] *= inv;
        }
    }
    return VectorStore(store.size(), store.dim(), std::move(data));
}

struct Query {
    std::string qid;
    std::string text;
};

/// Queries with their precomputed vectors; row i of `vectors` belongs to `queries[i]`.
struct QuerySet {
    std::vector<Query> queries;
    VectorStore vectors;

    std::size_t size() const { return queries.size(); }
    std::span<const float> vector(std::size_t i) const { return vectors.row(static_cast<DocId>(i)); }
};

inline QuerySet make_query_set(std::vector<Query> queries, VectorStore vectors) {
    if (queries.size() != vectors.size()) {
        throw Error(Errc::alignment_error, std::to_string(queries.size()) + " query texts but " +
                                               std::to_string(vectors.size()) + " query vectors");
    }
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!seen.emplace(queries[i].qid, i).second) {
            throw Error(Errc::duplicate_id, "duplicate query id '" + queries[i].qid + "'", i + 1);
        }
    }
    return QuerySet{std::move(queries), std::move(vectors)};
}

inline std::vector<Query> parse_query_texts(std::string_view content) {
    std::vector<Query> queries;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        if (line.find_first_not_of(" \t") == std::string_view::npos) return;
        auto [qid, text] = detail::split_tab(line, line_no, "query");
        queries.push_back(Query{std::string(qid), std::string(text)});
    });
    return queries;
}

inline QuerySet load_queries(const std::filesystem::path& text_path, const std::filesystem::path& vec_path) {
    return make_query_set(parse_query_texts(io::read_file(text_path)), load_vectors(vec_path));
}

/// Graded judgments for one query: external doc id -> grade.
using Judgments = std::unordered_map<std::string, int>;

struct Qrels {
    std::map<std::string, Judgments> judgments;

    const Judgments* find(const std::string& qid) const {
        auto it = judgments.find(qid);
        return it == judgments.end() ? nullptr : &it->second;
    }
};

/// TREC qrels: `qid iteration docno grade`, whitespace separated.
inline Qrels parse_qrels(std::string_view content) {
    Qrels qrels;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        std::vector<std::string_view> fields;
        std::size_t pos = 0;
        while (pos < line.size()) {
            auto start = line.find_first_not_of(" \t", pos);
            if (start == std::string_view::npos) break;
            auto end = line.find_first_of(" \t", start);
            if (end == std::string_view::npos) end = line.size();
            fields.push_back(line.substr(start, end - start));
            pos = end;
        }
        if (fields.empty()) return;
        if (fields.size() != 4) {
            throw Error(Errc::parse_error, "qrels line " + std::to_string(line_no) + ": expected 4 fields", line_no);
        }
        long long grade = 0;
        auto g = fields[3];
        auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), grade);
        if (ec != std::errc{} || ptr != g.data() + g.size()) {
            throw Error(Errc::parse_error, "qrels line " + std::to_string(line_no) + ": bad grade '" +
                                               std::string(g) + "'",
                        line_no);
        }
        if (grade < 0) {
            throw Error(Errc::parse_error, "qrels line " + std::to_string(line_no) + ": negative grade", line_no);
        }
        qrels.judgments[std::string(fields[0])][std::string(fields[2])] = static_cast<int>(grade);
    });
    return qrels;
}

inline Qrels load_qrels(const std::filesystem::path& path) { return parse_qrels(io::read_file(path)); }

}  // namespace ladr
