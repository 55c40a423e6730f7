#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ladr/corpus.hpp"
#include "ladr/io.hpp"
#include "ladr/types.hpp"

namespace ladr {

struct RunEntry {
    std::string doc;
    float score;
    std::size_t rank;
    std::string tag;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// TREC run: ranked lists per query, queries kept in first-seen order.
struct RunFile {
    std::vector<std::string> qids;
    std::unordered_map<std::string, std::vector<RunEntry>> lists;

    void add(const std::string& qid, std::vector<RunEntry> entries) {
        if (!lists.contains(qid)) qids.push_back(qid);
        auto& dst = lists[qid];
        dst.insert(dst.end(), std::make_move_iterator(entries.begin()), std::make_move_iterator(entries.end()));
    }

    const std::vector<RunEntry>* find(const std::string& qid) const {
        auto it = lists.find(qid);
        return it == lists.end() ? nullptr : &it->second;
    }

    std::vector<std::string> ranking(const std::string& qid) const {
        std::vector<std::string> docs;
        if (const auto* list = find(qid)) {
            for (const auto& e : *list) docs.push_back(e.doc);
        }
        return docs;
    }
};

/// Shortest decimal text that reads back to the same float.
inline std::string format_score(float score) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), score);
    return std::string(buf, res.ptr);
}

/// Builds the run entries for a ranked list, ranks starting at 1.
inline std::vector<RunEntry> to_run_entries(const ScoredList& results, const Corpus& corpus, const std::string& tag) {
    std::vector<RunEntry> out;
    out.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        out.push_back(RunEntry{corpus.external_id(results[i].doc), results[i].score, i + 1, tag});
    }
    return out;
}

/// `qid Q0 docno rank score tag`, one line per entry.
inline std::string format_run(const RunFile& run) {
    std::string out;
    for (const auto& qid : run.qids) {
        for (const auto& e : run.lists.at(qid)) {
            out += qid;
            out += " Q0 ";
            out += e.doc;
            out += ' ';
            out += std::to_string(e.rank);
            out += ' ';
            out += format_score(e.score);
            out += ' ';
            out += e.tag;
            out += '\n';
        }
    }
    return out;
}

/// Parses a TREC run. Per query, ranks must be 1..L in file order and scores
/// non-increasing.
inline RunFile parse_run(std::string_view content) {
    RunFile run;
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        std::vector<std::string_view> f;
        std::size_t pos = 0;
        while (pos < line.size()) {
            auto s = line.find_first_not_of(" \t", pos);
            if (s == std::string_view::npos) break;
            auto e = line.find_first_of(" \t", s);
            if (e == std::string_view::npos) e = line.size();
            f.push_back(line.substr(s, e - s));
            pos = e;
        }
        if (f.empty()) return;
        auto fail = [&](const std::string& why) {
            throw Error(Errc::parse_error, "run line " + std::to_string(line_no) + ": " + why, line_no);
        };
        if (f.size() != 6) fail("expected 6 fields");
        std::size_t rank = 0;
        auto [rp, rec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), rank);
        if (rec != std::errc{} || rp != f[3].data() + f[3].size()) fail("bad rank");
        float score = 0.0F;
        auto [sp, sec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), score);
        if (sec != std::errc{} || sp != f[4].data() + f[4].size() || !std::isfinite(score)) fail("bad score");
        const std::string qid(f[0]);
        if (!run.lists.contains(qid)) run.qids.push_back(qid);
        auto& list = run.lists[qid];
        if (rank != list.size() + 1) fail("ranks must be contiguous from 1");
        if (!list.empty() && score > list.back().score) fail("scores must be non-increasing");
        list.push_back(RunEntry{std::string(f[2]), score, rank, std::string(f[5])});
    });
    return run;
}

inline RunFile load_run(const std::filesystem::path& path) { return parse_run(io::read_file(path)); }
inline void save_run(const RunFile& run, const std::filesystem::path& path) { io::write_file(path, format_run(run)); }

struct MetricConfig {
    std::size_t ndcg_cutoff = 10;
    std::size_t recall_cutoff = 1000;
    int recall_min_rel = 2;
    std::size_t rr_cutoff = 10;
    int rr_min_rel = 1;
    double rbo_p = 0.99;

    void validate() const {
        if (ndcg_cutoff == 0 || recall_cutoff == 0 || rr_cutoff == 0) {
            throw Error(Errc::config_error, "metric cutoffs must be >= 1");
        }
        if (!(rbo_p > 0.0 && rbo_p < 1.0)) throw Error(Errc::config_error, "rbo p must be in (0, 1)");
    }
};

inline int grade_of(const Judgments& qrels_q, const std::string& doc) {
    auto it = qrels_q.find(doc);
    return it == qrels_q.end() ? 0 : it->second;
}

/// nDCG with linear gain (grade) and 1/log2(rank + 1) discount. 0 when no
/// judged document has a positive grade.
inline double ndcg(std::span<const std::string> ranking, const Judgments& qrels_q, std::size_t cutoff) {
    double dcg = 0.0;
    const std::size_t depth = std::min(cutoff, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
        const int g = grade_of(qrels_q, ranking[i]);
        if (g > 0) dcg += g / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> ideal;
    for (const auto& [_, g] : qrels_q) {
        if (g > 0) ideal.push_back(g);
    }
    std::sort(ideal.rbegin(), ideal.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(cutoff, ideal.size()); ++i) idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

inline std::size_t count_relevant(const Judgments& qrels_q, int min_rel) {
    return static_cast<std::size_t>(
        std::count_if(qrels_q.begin(), qrels_q.end(), [&](const auto& kv) { return kv.second >= min_rel; }));
}

/// Fraction of documents graded >= min_rel found in the top `cutoff`.
inline double recall_at(std::span<const std::string> ranking, const Judgments& qrels_q, std::size_t cutoff,
                        int min_rel) {
    const std::size_t total = count_relevant(qrels_q, min_rel);
    if (total == 0) return 0.0;
    std::size_t found = 0;
    const std::size_t depth = std::min(cutoff, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (grade_of(qrels_q, ranking[i]) >= min_rel) ++found;
    }
    return static_cast<double>(found) / static_cast<double>(total);
}

inline double rr_at(std::span<const std::string> ranking, const Judgments& qrels_q, std::size_t cutoff, int min_rel) {
    const std::size_t depth = std::min(cutoff, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (grade_of(qrels_q, ranking[i]) >= min_rel) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

/// Extrapolated rank-biased overlap. Both lists are cut to the shorter
/// length L, overlap is accumulated to depth L, and the agreement at L is
/// assumed to persist:
///   RBO = A_L * p^L + (1 - p) / p * sum_{d=1..L} A_d * p^d,  A_d = X_d / d.
/// Two empty lists score 1; one empty list scores 0.
template <typename T>
double rbo(std::span<const T> a, std::span<const T> b, double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::config_error, "rbo p must be in (0, 1)");
    auto check_unique = [](std::span<const T> list, const char* which) {
        std::unordered_set<T> seen;
        for (const auto& x : list) {
            if (!seen.insert(x).second) throw Error(Errc::input_error, std::string("duplicate id in list ") + which);
        }
    };
    check_unique(a, "a");
    check_unique(b, "b");
    const std::size_t depth = std::min(a.size(), b.size());
    if (depth == 0) return a.empty() && b.empty() ? 1.0 : 0.0;

    // Items seen in exactly one list so far; an item seen in both is removed.
    std::unordered_set<T> seen_once;
    std::size_t overlap = 0;
    double sum = 0.0;
    double weight = 1.0;
    for (std::size_t d = 0; d < depth; ++d) {
        if (a[d] == b[d]) {
            ++overlap;
        } else {
            if (seen_once.erase(a[d]) > 0) {
                ++overlap;
            } else {
                seen_once.insert(a[d]);
            }
            if (seen_once.erase(b[d]) > 0) {
                ++overlap;
            } else {
                seen_once.insert(b[d]);
            }
        }
        weight *= p;
        sum += static_cast<double>(overlap) / static_cast<double>(d + 1) * weight;
    }
    const double agreement = static_cast<double>(overlap) / static_cast<double>(depth);
    return std::clamp(agreement * weight + (1.0 - p) / p * sum, 0.0, 1.0);
}

template <typename T>
double rbo(const std::vector<T>& a, const std::vector<T>& b, double p) {
    return rbo(std::span<const T>(a), std::span<const T>(b), p);
}

struct QueryMetrics {
    std::string qid;
    std::optional<double> ndcg;
    std::optional<double> recall;
    std::optional<double> rr;
    std::optional<double> rbo;
};

struct MetricMean {
    double mean = 0.0;
    std::size_t queries = 0;
};

struct EvalReport {
    MetricMean ndcg;
    MetricMean recall;
    MetricMean rr;
    MetricMean rbo;
    std::vector<QueryMetrics> per_query;
};

/// Scores every run query that has judgments. A metric skips queries that
/// have nothing it could find (no positive grade for nDCG, nothing graded at
/// least the threshold for recall and RR). RBO is computed against
/// `reference` when given, for every run query present in it.
inline EvalReport evaluate_run(const RunFile& run, const Qrels& qrels, const MetricConfig& config,
                               const RunFile* reference = nullptr) {
    config.validate();
    EvalReport report;
    double sums[4] = {};
    bool any_overlap = false;
    for (const auto& qid : run.qids) {
        QueryMetrics m;
        m.qid = qid;
        const auto ranking = run.ranking(qid);
        if (const auto* judged = qrels.find(qid)) {
            any_overlap = true;
            if (count_relevant(*judged, 1) > 0) {
                m.ndcg = ndcg(ranking, *judged, config.ndcg_cutoff);
                sums[0] += *m.ndcg;
                ++report.ndcg.queries;
            }
            if (count_relevant(*judged, config.recall_min_rel) > 0) {
                m.recall = recall_at(ranking, *judged, config.recall_cutoff, config.recall_min_rel);
                sums[1] += *m.recall;
                ++report.recall.queries;
            }
            if (count_relevant(*judged, config.rr_min_rel) > 0) {
                m.rr = rr_at(ranking, *judged, config.rr_cutoff, config.rr_min_rel);
                sums[2] += *m.rr;
                ++report.rr.queries;
            }
        }
        if (reference && reference->find(qid)) {
            m.rbo = rbo(ranking, reference->ranking(qid), config.rbo_p);
            sums[3] += *m.rbo;
            ++report.rbo.queries;
        }
        if (m.ndcg || m.recall || m.rr || m.rbo) report.per_query.push_back(std::move(m));
    }
    if (!any_overlap && !(reference && report.rbo.queries > 0)) {
        throw Error(Errc::eval_error, "run and qrels share no query ids");
    }
    MetricMean* means[4] = {&report.ndcg, &report.recall, &report.rr, &report.rbo};
    for (int i = 0; i < 4; ++i) {
        if (means[i]->queries > 0) means[i]->mean = sums[i] / static_cast<double>(means[i]->queries);
    }
    return report;
}

inline std::string format_metric(const std::optional<double>& v) {
    if (!v) return {};
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << *v;
    return out.str();
}

/// Per-query CSV; a blank cell means the query was excluded from that metric.
inline std::string per_query_csv(const EvalReport& report, const MetricConfig& config) {
    std::string out = "qid,ndcg@" + std::to_string(config.ndcg_cutoff) + ",recall@" +
                      std::to_string(config.recall_cutoff) + ",rr@" + std::to_string(config.rr_cutoff) + ",rbo\n";
    for (const auto& m : report.per_query) {
        out += m.qid + "," + format_metric(m.ndcg) + "," + format_metric(m.recall) + "," + format_metric(m.rr) + "," +
               format_metric(m.rbo) + "\n";
    }
    return out;
}

inline std::string summary_table(const EvalReport& report, const MetricConfig& config) {
    std::ostringstream out;
    out.precision(4);
    out << std::fixed;
    auto line = [&](const std::string& name, const MetricMean& m) {
        if (m.queries == 0) return;
        out << name << '\t' << m.mean << '\t' << m.queries << " queries\n";
    };
    line("ndcg@" + std::to_string(config.ndcg_cutoff), report.ndcg);
    line("recall@" + std::to_string(config.recall_cutoff) + "(rel>=" + std::to_string(config.recall_min_rel) + ")",
         report.recall);
    line("rr@" + std::to_string(config.rr_cutoff) + "(rel>=" + std::to_string(config.rr_min_rel) + ")", report.rr);
    line("rbo(p=" + format_metric(config.rbo_p).substr(0, 4) + ")", report.rbo);
    return out.str();
}

}  // namespace ladr
