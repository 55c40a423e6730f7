#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ladr/bench.hpp"
#include "ladr/corpus.hpp"
#include "ladr/eval.hpp"
#include "ladr/graph.hpp"
#include "ladr/lexical.hpp"
#include "ladr/log.hpp"
#include "ladr/search.hpp"

namespace ladr::cli {

/// Invalid flag combination, detected before any file is touched. Exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct DataOptions {
    std::string corpus;
    std::string vectors;
    std::string queries;
    std::string query_vectors;
    std::string index;
    std::string graph;
    std::string similarity = "ip";
    Bm25Params bm25;
};

struct SearchOptions {
    std::string algo = "proactive";
    std::size_t n = 1000;
    std::size_t k = 128;
    std::size_t c = 50;
    std::size_t depth = 1000;
    std::string accumulate = "f32";
    double timeout_ms = 0.0;
    bool fallback_exhaustive = false;
};

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "proactive") return Algorithm::proactive;
    if (name == "adaptive") return Algorithm::adaptive;
    if (name == "rerank") return Algorithm::rerank;
    if (name == "exhaustive") return Algorithm::exhaustive;
    throw UsageError("unknown algorithm '" + name + "'");
}

inline bool needs_graph(Algorithm algo) { return algo == Algorithm::proactive || algo == Algorithm::adaptive; }

inline void add_data_options(CLI::App* cmd, DataOptions& d, bool with_graph) {
    cmd->add_option("--corpus", d.corpus, "Corpus (TSV or JSONL)")->required();
    cmd->add_option("--vectors", d.vectors, "Document vectors (LADRVEC1)")->required();
    cmd->add_option("--queries", d.queries, "Query texts (TSV qid<TAB>text)")->required();
    cmd->add_option("--query-vectors", d.query_vectors, "Query vectors (LADRVEC1), same order as --queries")
        ->required();
    cmd->add_option("--index", d.index, "Lexical index cache from build-lexical");
    if (with_graph) cmd->add_option("--graph", d.graph, "Proximity graph (LADRGRF1)");
    cmd->add_option("--similarity", d.similarity, "ip or cosine")
        ->check(CLI::IsMember({"ip", "cosine"}))
        ->capture_default_str();
    cmd->add_option("--bm25-k1", d.bm25.k1, "BM25 k1")->capture_default_str();
    cmd->add_option("--bm25-b", d.bm25.b, "BM25 b")->capture_default_str();
}

inline void add_search_options(CLI::App* cmd, SearchOptions& s) {
    cmd->add_option("--algo", s.algo, "proactive, adaptive, rerank or exhaustive")
        ->check(CLI::IsMember({"proactive", "adaptive", "rerank", "exhaustive"}))
        ->capture_default_str();
    cmd->add_option("--accumulate", s.accumulate, "Dot-product accumulator: f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();
    cmd->add_option("--timeout-ms", s.timeout_ms, "Adaptive wall-clock cutoff per query (0 = none)");
    cmd->add_flag("--fallback-exhaustive", s.fallback_exhaustive,
                  "Use exhaustive search for queries with no lexical seed");
}

inline LadrParams to_params(const SearchOptions& s, const DataOptions& d) {
    LadrParams p;
    p.n = s.n;
    p.k = s.k;
    p.c = s.c;
    p.depth = s.depth;
    p.bm25 = d.bm25;
    p.accumulation = s.accumulate == "f64" ? Accumulation::f64 : Accumulation::f32;
    if (s.timeout_ms > 0.0) {
        p.timeout = std::chrono::microseconds(static_cast<std::int64_t>(s.timeout_ms * 1000.0));
    }
    p.fallback_exhaustive = s.fallback_exhaustive;
    return p;
}

inline void validate_params(Algorithm algo, const LadrParams& p, const DataOptions& d) {
    if (p.n == 0) throw UsageError("--n must be >= 1");
    if (p.depth == 0) throw UsageError("--depth must be >= 1");
    if (needs_graph(algo)) {
        if (d.graph.empty()) throw UsageError("--graph is required for this algorithm");
        if (p.k == 0) throw UsageError("--k must be >= 1");
    }
    if (algo == Algorithm::adaptive && (p.c == 0 || p.c > p.n)) throw UsageError("--c must be in [1, n]");
    try {
        p.bm25.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

/// Everything a search run needs, loaded once.
struct Workspace {
    Corpus corpus;
    VectorStore store;
    QuerySet queries;
    InvertedIndex index;
    std::optional<ProximityGraph> graph;
    std::vector<std::vector<std::string>> query_tokens;

    SearchEnv env() const { return SearchEnv{&index, graph ? &*graph : nullptr, &store}; }
};

inline InvertedIndex load_or_build_index(const std::string& corpus_bytes, const Corpus& corpus,
                                         const std::string& index_path, std::size_t threads) {
    if (!index_path.empty()) return decode_lexical_index(io::read_file(index_path), io::fnv1a(corpus_bytes));
    return build_lexical_index(corpus, threads);
}

inline Workspace load_workspace(const DataOptions& d, bool load_graph_file) {
    Workspace ws;
    const std::string corpus_bytes = io::read_file(d.corpus);
    ws.corpus = parse_corpus(corpus_bytes, is_jsonl_path(d.corpus));
    ws.store = load_vectors(d.vectors);
    if (ws.store.size() != ws.corpus.size()) {
        throw Error(Errc::alignment_error, "corpus has " + std::to_string(ws.corpus.size()) + " documents but " +
                                               std::to_string(ws.store.size()) + " vectors");
    }
    ws.queries = load_queries(d.queries, d.query_vectors);
    if (ws.queries.vectors.size() > 0 && ws.queries.vectors.dim() != ws.store.dim()) {
        throw Error(Errc::dim_error, "query vectors and document vectors differ in dimensionality");
    }
    if (d.similarity == "cosine") {
        ws.store = normalized(ws.store);
        ws.queries.vectors = normalized(ws.queries.vectors);
    }
    ws.index = load_or_build_index(corpus_bytes, ws.corpus, d.index, 1);
    if (load_graph_file) {
        ws.graph = load_graph(d.graph);
        if (ws.graph->size() != ws.corpus.size()) {
            throw Error(Errc::alignment_error, "graph covers " + std::to_string(ws.graph->size()) +
                                                   " documents, corpus has " + std::to_string(ws.corpus.size()));
        }
    }
    for (const auto& q : ws.queries.queries) ws.query_tokens.push_back(tokenize(q.text));
    return ws;
}

inline SearchResult search_query(const Workspace& ws, Algorithm algo, const LadrParams& params, std::size_t i) {
    return run_search(algo, ws.query_tokens[i], ws.queries.vector(i), ws.env(), params);
}

/// Writes to `path`, or to `fallback` when the path is empty or "-".
inline void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty() || path == "-") {
        fallback << text;
        fallback.flush();
    } else {
        io::write_file(path, text);
    }
}

inline RunFile collect_run(const Workspace& ws, Algorithm algo, const LadrParams& params, const std::string& tag,
                           std::vector<SearchTrace>* traces = nullptr) {
    RunFile run;
    for (std::size_t i = 0; i < ws.queries.size(); ++i) {
        auto result = search_query(ws, algo, params, i);
        run.add(ws.queries.queries[i].qid, to_run_entries(result.results, ws.corpus, tag));
        if (traces) traces->push_back(result.trace);
    }
    return run;
}

inline std::string fixed(double v, int precision = 6) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

inline std::string trace_csv(const Workspace& ws, const std::vector<SearchTrace>& traces) {
    std::string out = "qid,seeds_found,docs_scored,iterations,timed_out,fell_back\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        out += ws.queries.queries[i].qid + "," + std::to_string(t.seeds_found) + "," + std::to_string(t.docs_scored) +
               "," + std::to_string(t.iterations) + "," + (t.timed_out ? "1" : "0") + "," + (t.fell_back ? "1" : "0") +
               "\n";
    }
    return out;
}

inline void add_metric_options(CLI::App* cmd, MetricConfig& m) {
    cmd->add_option("--ndcg-cutoff", m.ndcg_cutoff, "nDCG cutoff")->capture_default_str();
    cmd->add_option("--recall-cutoff", m.recall_cutoff, "Recall cutoff")->capture_default_str();
    cmd->add_option("--recall-min-rel", m.recall_min_rel, "Minimum grade counted by recall")->capture_default_str();
    cmd->add_option("--rr-cutoff", m.rr_cutoff, "Reciprocal rank cutoff")->capture_default_str();
    cmd->add_option("--rr-min-rel", m.rr_min_rel, "Minimum grade counted by RR")->capture_default_str();
    cmd->add_option("--rbo-p", m.rbo_p, "RBO persistence")->capture_default_str();
}

inline void validate_metrics(const MetricConfig& m) {
    try {
        m.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

/// Entry point for the `ladr` tool. Returns 0 on success, 1 on runtime
/// failure, 2 on usage errors; failures print one `error: <kind>: <message>`
/// line to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Lexically-accelerated dense retrieval"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string output;
    std::size_t threads = 1;
    std::uint64_t seed = 42;

    // build-lexical
    std::string lex_corpus;
    auto* build_lexical = app.add_subcommand("build-lexical", "Build and cache the BM25 inverted index");
    build_lexical->add_option("--corpus", lex_corpus, "Corpus (TSV or JSONL)")->required();
    build_lexical->add_option("--output,-o", output, "Index cache path")->required();
    build_lexical->add_option("--threads", threads, "Tokenizer threads")->capture_default_str();

    // build-graph
    std::string g_method = "exact";
    GraphBuildConfig gcfg;
    std::string g_vectors, g_corpus, g_index, g_similarity = "ip";
    auto* build_graph_cmd = app.add_subcommand("build-graph", "Build the document proximity graph");
    build_graph_cmd->add_option("--method", g_method, "exact, approx or bm25")
        ->check(CLI::IsMember({"exact", "approx", "bm25"}))
        ->capture_default_str();
    build_graph_cmd->add_option("--k", gcfg.k, "Neighbors per document")->capture_default_str();
    build_graph_cmd->add_option("--beam", gcfg.beam, "Beam width (approx)")->capture_default_str();
    build_graph_cmd->add_option("--m-terms", gcfg.m_terms, "Document terms used as query (bm25)")
        ->capture_default_str();
    build_graph_cmd->add_option("--vectors", g_vectors, "Document vectors (exact, approx)");
    build_graph_cmd->add_option("--corpus", g_corpus, "Corpus (bm25)");
    build_graph_cmd->add_option("--index", g_index, "Lexical index cache (bm25)");
    build_graph_cmd->add_option("--similarity", g_similarity, "ip or cosine")
        ->check(CLI::IsMember({"ip", "cosine"}))
        ->capture_default_str();
    build_graph_cmd->add_option("--bm25-k1", gcfg.bm25.k1, "BM25 k1")->capture_default_str();
    build_graph_cmd->add_option("--bm25-b", gcfg.bm25.b, "BM25 b")->capture_default_str();
    build_graph_cmd->add_option("--threads", threads, "Worker threads (exact, bm25)")->capture_default_str();
    build_graph_cmd->add_option("--seed", seed, "Insertion-order seed (approx)")->capture_default_str();
    build_graph_cmd->add_option("--output,-o", output, "Graph path")->required();

    // search
    DataOptions s_data;
    SearchOptions s_opts;
    std::string run_tag;
    std::string trace_path;
    auto* search_cmd = app.add_subcommand("search", "Retrieve for every query and write a TREC run");
    add_data_options(search_cmd, s_data, true);
    add_search_options(search_cmd, s_opts);
    search_cmd->add_option("--n", s_opts.n, "Lexical seed count")->capture_default_str();
    search_cmd->add_option("--k", s_opts.k, "Neighbors per explored document")->capture_default_str();
    search_cmd->add_option("--c", s_opts.c, "Adaptive exploration depth")->capture_default_str();
    search_cmd->add_option("--depth", s_opts.depth, "Results per query")->capture_default_str();
    search_cmd->add_option("--run-tag", run_tag, "Run tag (default ladr-<algo>)");
    search_cmd->add_option("--trace", trace_path, "Per-query trace CSV");
    search_cmd->add_option("--output,-o", output, "Run file (default stdout)");

    // eval
    std::string e_run, e_qrels, e_reference, e_per_query;
    MetricConfig e_metrics;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a TREC run against qrels");
    eval_cmd->add_option("--run", e_run, "Run file")->required();
    eval_cmd->add_option("--qrels", e_qrels, "TREC qrels")->required();
    eval_cmd->add_option("--reference", e_reference, "Reference run for RBO (e.g. exhaustive)");
    eval_cmd->add_option("--per-query", e_per_query, "Per-query CSV output");
    add_metric_options(eval_cmd, e_metrics);
    eval_cmd->add_option("--output,-o", output, "Summary output (default stdout)");

    // bench
    DataOptions b_data;
    SearchOptions b_opts;
    std::size_t reps = 3;
    std::size_t warmup = 1;
    auto* bench_cmd = app.add_subcommand("bench", "Single-threaded per-query latency");
    add_data_options(bench_cmd, b_data, true);
    add_search_options(bench_cmd, b_opts);
    bench_cmd->add_option("--n", b_opts.n, "Lexical seed count")->capture_default_str();
    bench_cmd->add_option("--k", b_opts.k, "Neighbors per explored document")->capture_default_str();
    bench_cmd->add_option("--c", b_opts.c, "Adaptive exploration depth")->capture_default_str();
    bench_cmd->add_option("--depth", b_opts.depth, "Results per query")->capture_default_str();
    bench_cmd->add_option("--reps", reps, "Timed repetitions per query")->capture_default_str();
    bench_cmd->add_option("--warmup", warmup, "Untimed passes before timing")->capture_default_str();
    bench_cmd->add_option("--output,-o", output, "Report output (default stdout)");

    // sweep
    DataOptions w_data;
    SearchOptions w_opts;
    std::vector<std::size_t> w_n{1000}, w_k{128}, w_c{50};
    std::string w_qrels;
    MetricConfig w_metrics;
    std::size_t w_reps = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a grid of (n, k, c) settings");
    add_data_options(sweep_cmd, w_data, true);
    add_search_options(sweep_cmd, w_opts);
    sweep_cmd->add_option("--n", w_n, "Seed counts, comma separated")->delimiter(',');
    sweep_cmd->add_option("--k", w_k, "Neighbor counts, comma separated")->delimiter(',');
    sweep_cmd->add_option("--c", w_c, "Exploration depths, comma separated (adaptive)")->delimiter(',');
    sweep_cmd->add_option("--depth", w_opts.depth, "Results per query")->capture_default_str();
    sweep_cmd->add_option("--qrels", w_qrels, "TREC qrels (optional)");
    add_metric_options(sweep_cmd, w_metrics);
    sweep_cmd->add_option("--reps", w_reps, "Timed repetitions per query")->capture_default_str();
    sweep_cmd->add_option("--output,-o", output, "CSV output (default stdout)");

    auto usage_fail = [&](const std::string& msg) {
        err << "error: usage: " << msg << "\n";
        return kExitUsage;
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return usage_fail(e.what());
    }

    init_logging();

    try {
        if (build_lexical->parsed()) {
            if (threads == 0) throw UsageError("--threads must be >= 1");
            const std::string bytes = io::read_file(lex_corpus);
            const Corpus corpus = parse_corpus(bytes, is_jsonl_path(lex_corpus));
            const InvertedIndex index = build_lexical_index(corpus, threads);
            io::write_file(output, encode_lexical_index(index, io::fnv1a(bytes)));
            spdlog::info("indexed {} documents, {} terms", index.num_docs(), index.num_terms());
            return kExitOk;
        }

        if (build_graph_cmd->parsed()) {
            gcfg.method = g_method == "exact" ? GraphMethod::exact
                          : g_method == "approx" ? GraphMethod::approx
                                                 : GraphMethod::bm25;
            gcfg.threads = threads;
            gcfg.seed = seed;
            try {
                gcfg.validate();
            } catch (const Error& e) {
                throw UsageError(e.what());
            }
            if (gcfg.method != GraphMethod::bm25 && g_vectors.empty()) {
                throw UsageError("--vectors is required for --method " + g_method);
            }
            if (gcfg.method == GraphMethod::bm25 && g_corpus.empty()) {
                throw UsageError("--corpus is required for --method bm25");
            }
            ProximityGraph graph;
            if (gcfg.method == GraphMethod::bm25) {
                const std::string bytes = io::read_file(g_corpus);
                const Corpus corpus = parse_corpus(bytes, is_jsonl_path(g_corpus));
                const InvertedIndex index = load_or_build_index(bytes, corpus, g_index, threads);
                graph = build_graph(gcfg, nullptr, &index, &corpus);
            } else {
                VectorStore store = load_vectors(g_vectors);
                if (g_similarity == "cosine") store = normalized(store);
                graph = build_graph(gcfg, &store);
            }
            save_graph(graph, output);
            spdlog::info("wrote graph with {} rows, k={}", graph.size(), graph.k());
            return kExitOk;
        }

        if (search_cmd->parsed()) {
            const Algorithm algo = parse_algorithm(s_opts.algo);
            const LadrParams params = to_params(s_opts, s_data);
            validate_params(algo, params, s_data);
            const Workspace ws = load_workspace(s_data, needs_graph(algo));
            const std::string tag = run_tag.empty() ? "ladr-" + s_opts.algo : run_tag;
            std::vector<SearchTrace> traces;
            const RunFile run = collect_run(ws, algo, params, tag, &traces);
            emit(output, format_run(run), out);
            if (!trace_path.empty()) io::write_file(trace_path, trace_csv(ws, traces));
            return kExitOk;
        }

        if (eval_cmd->parsed()) {
            validate_metrics(e_metrics);
            const RunFile run = load_run(e_run);
            const Qrels qrels = load_qrels(e_qrels);
            std::optional<RunFile> reference;
            if (!e_reference.empty()) reference = load_run(e_reference);
            const EvalReport report = evaluate_run(run, qrels, e_metrics, reference ? &*reference : nullptr);
            emit(output, summary_table(report, e_metrics), out);
            if (!e_per_query.empty()) io::write_file(e_per_query, per_query_csv(report, e_metrics));
            return kExitOk;
        }

        if (bench_cmd->parsed()) {
            const Algorithm algo = parse_algorithm(b_opts.algo);
            const LadrParams params = to_params(b_opts, b_data);
            validate_params(algo, params, b_data);
            if (reps == 0) throw UsageError("--reps must be >= 1");
            const Workspace ws = load_workspace(b_data, needs_graph(algo));
            const LatencyStats stats =
                bench(ws.queries, [&](std::size_t i) { return search_query(ws, algo, params, i); }, warmup, reps);
            std::string report = "algo\tqueries\tmean_ms\tmedian_ms\tp95_ms\tmean_docs_scored\n";
            report += b_opts.algo + "\t" + std::to_string(ws.queries.size()) + "\t" + fixed(stats.mean_ms, 4) + "\t" +
                      fixed(stats.median_ms, 4) + "\t" + fixed(stats.p95_ms, 4) + "\t" +
                      fixed(stats.mean_docs_scored, 1) + "\n";
            emit(output, report, out);
            return kExitOk;
        }

        if (sweep_cmd->parsed()) {
            const Algorithm algo = parse_algorithm(w_opts.algo);
            validate_metrics(w_metrics);
            if (w_reps == 0) throw UsageError("--reps must be >= 1");
            if (w_n.empty() || w_k.empty() || w_c.empty()) throw UsageError("parameter lists must not be empty");
            // Parameters an algorithm ignores collapse to a single grid value.
            const std::vector<std::size_t> ns = algo == Algorithm::exhaustive ? std::vector<std::size_t>{w_n[0]} : w_n;
            const std::vector<std::size_t> ks = needs_graph(algo) ? w_k : std::vector<std::size_t>{w_k[0]};
            const std::vector<std::size_t> cs = algo == Algorithm::adaptive ? w_c : std::vector<std::size_t>{w_c[0]};
            std::vector<LadrParams> grid;
            for (auto n : ns) {
                for (auto k : ks) {
                    for (auto c : cs) {
                        SearchOptions o = w_opts;
                        o.n = n;
                        o.k = k;
                        o.c = c;
                        LadrParams p = to_params(o, w_data);
                        if (algo == Algorithm::adaptive && c > n) {
                            spdlog::warn("sweep: skipping n={} c={} (c must be <= n)", n, c);
                            continue;
                        }
                        validate_params(algo, p, w_data);
                        grid.push_back(p);
                    }
                }
            }
            const Workspace ws = load_workspace(w_data, needs_graph(algo));
            std::optional<Qrels> qrels;
            if (!w_qrels.empty()) qrels = load_qrels(w_qrels);

            LadrParams exhaustive_params;
            exhaustive_params.depth = w_opts.depth;
            exhaustive_params.accumulation = to_params(w_opts, w_data).accumulation;
            const RunFile reference = collect_run(ws, Algorithm::exhaustive, exhaustive_params, "exhaustive");

            auto cell = [](const MetricMean& m) { return m.queries > 0 ? fixed(m.mean) : std::string(); };
            std::string csv = "algo,n,k,c,ndcg,recall,rr,rbo,mean_ms,mean_docs_scored\n";
            for (const auto& p : grid) {
                const RunFile run = collect_run(ws, algo, p, "sweep");
                const EvalReport report = evaluate_run(run, qrels ? *qrels : Qrels{}, w_metrics, &reference);
                const LatencyStats stats =
                    bench(ws.queries, [&](std::size_t i) { return search_query(ws, algo, p, i); }, 0, w_reps);
                csv += w_opts.algo + "," + (algo == Algorithm::exhaustive ? "" : std::to_string(p.n)) + "," +
                       (needs_graph(algo) ? std::to_string(p.k) : "") + "," +
                       (algo == Algorithm::adaptive ? std::to_string(p.c) : "") + "," + cell(report.ndcg) + "," +
                       cell(report.recall) + "," + cell(report.rr) + "," + cell(report.rbo) + "," +
                       fixed(stats.mean_ms, 4) + "," + fixed(stats.mean_docs_scored, 1) + "\n";
            }
            emit(output, csv, out);
            return kExitOk;
        }
    } catch (const UsageError& e) {
        return usage_fail(e.what());
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: Internal: " << e.what() << "\n";
        return kExitRuntime;
    }
    return usage_fail("no subcommand");
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ladr::cli
