#include <sstream>

#include <gtest/gtest.h>

#include "ladr/cli.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace ladr {
namespace {

using testing::TempDir;

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "ladr");
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

/// A small clustered collection written to disk in every input format.
class CliFixture : public ::testing::Test {
protected:
    void SetUp() override {
        testing::SyntheticConfig cfg;
        cfg.docs = 300;
        cfg.queries = 12;
        const auto data = testing::make_clustered(cfg);
        std::string corpus, queries, qrels;
        for (const auto& d : data.corpus.documents()) corpus += d.external_id + "\t" + d.text + "\n";
        for (const auto& q : data.queries.queries) queries += q.qid + "\t" + q.text + "\n";
        for (std::size_t i = 0; i < data.queries.size(); ++i) {
            for (const auto& hit : exhaustive_search(data.queries.vector(i), data.store, 5)) {
                qrels += data.queries.queries[i].qid + " 0 " + data.corpus.external_id(hit.doc) + " 2\n";
            }
        }
        io::write_file(dir / "corpus.tsv", corpus);
        io::write_file(dir / "queries.tsv", queries);
        io::write_file(dir / "qrels.txt", qrels);
        save_vectors(data.store, dir / "docs.vec");
        save_vectors(data.queries.vectors, dir / "queries.vec");
    }

    std::string p(const std::string& name) const { return (dir / name).string(); }

    std::vector<std::string> data_flags() const {
        return {"--corpus", p("corpus.tsv"), "--vectors", p("docs.vec"), "--queries", p("queries.tsv"),
                "--query-vectors", p("queries.vec")};
    }

    std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) const {
        head.insert(head.end(), tail.begin(), tail.end());
        return head;
    }

    CliResult build_graph(const std::string& method, const std::string& k) {
        return run({"build-graph", "--method", method, "--k", k, "--vectors", p("docs.vec"), "--corpus",
                    p("corpus.tsv"), "--output", p(method + ".grf")});
    }

    TempDir dir;
};

TEST_F(CliFixture, BuildGraphWritesAGraphFile) {
    const auto r = build_graph("exact", "16");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto g = load_graph(dir / "exact.grf");
    EXPECT_EQ(g.size(), 300u);
    EXPECT_EQ(g.k(), 16u);
    EXPECT_EQ(g, build_exact_graph(load_vectors(dir / "docs.vec"), 16));
    EXPECT_EQ(build_graph("approx", "8").code, 0);
    EXPECT_EQ(build_graph("bm25", "8").code, 0);
}

TEST_F(CliFixture, BuildGraphUsageErrors) {
    auto r = run({"build-graph", "--method", "approx", "--k", "16", "--beam", "4", "--vectors", p("docs.vec"),
                  "--output", p("g")});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: usage:", 0), 0u);
    EXPECT_EQ(run({"build-graph", "--method", "exact", "--output", p("g")}).code, 2);
    EXPECT_EQ(run({"build-graph", "--method", "nope", "--vectors", p("docs.vec"), "--output", p("g")}).code, 2);
    EXPECT_EQ(run({"build-graph", "--vectors", p("docs.vec"), "--output", p("g"), "--bogus"}).code, 2);
}

TEST_F(CliFixture, GraphAlgorithmsRequireAGraph) {
    auto r = run(with({"search", "--algo", "adaptive"}, data_flags()));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--graph"), std::string::npos);
    EXPECT_EQ(run(with({"search", "--algo", "proactive"}, data_flags())).code, 2);
}

TEST_F(CliFixture, RuntimeFailuresExitOne) {
    auto r = run(with({"search", "--algo", "proactive", "--graph", p("missing.grf")}, data_flags()));
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: IoError:", 0), 0u) << r.err;
    io::write_file(dir / "bad.vec", "garbage");
    r = run({"build-graph", "--vectors", p("bad.vec"), "--output", p("g")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: FormatError:", 0), 0u) << r.err;
}

TEST_F(CliFixture, SearchRunMatchesLibraryAndReparses) {
    ASSERT_EQ(build_graph("exact", "16").code, 0);
    const auto args = with({"search", "--algo", "proactive", "--n", "20", "--k", "8", "--depth", "50", "--graph",
                            p("exact.grf"), "--output", p("a.run"), "--trace", p("trace.csv")},
                           data_flags());
    ASSERT_EQ(run(args).code, 0);
    const std::string bytes = io::read_file(dir / "a.run");
    const RunFile parsed = parse_run(bytes);
    EXPECT_EQ(format_run(parsed), bytes);
    EXPECT_EQ(parsed.qids.size(), 12u);
    EXPECT_EQ(parsed.lists.at("Q0").front().tag, "ladr-proactive");

    const Corpus corpus = load_corpus(dir / "corpus.tsv");
    const VectorStore store = load_vectors(dir / "docs.vec");
    const QuerySet qs = load_queries(dir / "queries.tsv", dir / "queries.vec");
    const auto index = build_lexical_index(corpus);
    const auto graph = load_graph(dir / "exact.grf");
    LadrParams params;
    params.n = 20;
    params.k = 8;
    params.depth = 50;
    const auto expect = proactive_search(tokenize(qs.queries[3].text), qs.vector(3), index, graph, store, params);
    EXPECT_EQ(parsed.lists.at("Q3"), to_run_entries(expect.results, corpus, "ladr-proactive"));

    // Same flags, same bytes.
    ASSERT_EQ(run(args).code, 0);
    EXPECT_EQ(io::read_file(dir / "a.run"), bytes);
    const std::string trace = io::read_file(dir / "trace.csv");
    EXPECT_EQ(trace.rfind("qid,seeds_found,docs_scored,iterations,timed_out,fell_back\n", 0), 0u);
}

TEST_F(CliFixture, SearchWithCachedIndexMatches) {
    ASSERT_EQ(run({"build-lexical", "--corpus", p("corpus.tsv"), "--output", p("lex.idx")}).code, 0);
    auto a = run(with({"search", "--algo", "rerank", "--n", "30", "--depth", "10"}, data_flags()));
    auto b = run(with({"search", "--algo", "rerank", "--n", "30", "--depth", "10", "--index", p("lex.idx")},
                      data_flags()));
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_FALSE(a.out.empty());

    io::write_file(dir / "corpus.tsv", io::read_file(dir / "corpus.tsv") + "extra\tdoc\n");
    auto c = run(with({"search", "--algo", "rerank", "--index", p("lex.idx")}, data_flags()));
    EXPECT_EQ(c.code, 1);
}

TEST_F(CliFixture, EvalReportsMetrics) {
    ASSERT_EQ(run(with({"search", "--algo", "exhaustive", "--depth", "100", "--output", p("ex.run")}, data_flags()))
                  .code,
              0);
    ASSERT_EQ(run(with({"search", "--algo", "rerank", "--n", "50", "--depth", "100", "--output", p("re.run")},
                       data_flags()))
                  .code,
              0);
    auto r = run({"eval", "--run", p("ex.run"), "--qrels", p("qrels.txt"), "--reference", p("ex.run"), "--per-query",
                  p("pq.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("ndcg@10\t1.0000"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("rbo(p=0.99)\t1.0000"), std::string::npos) << r.out;
    EXPECT_EQ(io::read_file(dir / "pq.csv").rfind("qid,ndcg@10,recall@1000,rr@10,rbo\n", 0), 0u);

    r = run({"eval", "--run", p("re.run"), "--qrels", p("qrels.txt"), "--ndcg-cutoff", "5", "--recall-min-rel", "2"});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("ndcg@5"), std::string::npos);
    EXPECT_EQ(run({"eval", "--run", p("re.run"), "--qrels", p("qrels.txt"), "--rbo-p", "1.5"}).code, 2);
}

TEST_F(CliFixture, EvalWithoutSharedQueriesFails) {
    io::write_file(dir / "other.qrels", "nobody 0 D1 1\n");
    ASSERT_EQ(run(with({"search", "--algo", "exhaustive", "--depth", "5", "--output", p("ex.run")}, data_flags())).code,
              0);
    auto r = run({"eval", "--run", p("ex.run"), "--qrels", p("other.qrels")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: EvalError:", 0), 0u) << r.err;
}

TEST_F(CliFixture, BenchPrintsLatencyTable) {
    auto r = run(with({"bench", "--algo", "exhaustive", "--depth", "10", "--reps", "1", "--warmup", "0"},
                      data_flags()));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("algo\tqueries\tmean_ms\tmedian_ms\tp95_ms\tmean_docs_scored\nexhaustive\t12\t", 0), 0u)
        << r.out;
    EXPECT_NE(r.out.find("\t300.0\n"), std::string::npos);
    EXPECT_EQ(run(with({"bench", "--algo", "exhaustive", "--reps", "0"}, data_flags())).code, 2);
}

TEST_F(CliFixture, SweepEmitsOneRowPerGridPoint) {
    ASSERT_EQ(build_graph("exact", "16").code, 0);
    auto r = run(with({"sweep", "--algo", "proactive", "--n", "10,100,1000", "--k", "16", "--depth", "100", "--graph",
                       p("exact.grf"), "--qrels", p("qrels.txt")},
                      data_flags()));
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    ASSERT_EQ(rows.size(), 4u) << r.out;
    EXPECT_EQ(rows[0], "algo,n,k,c,ndcg,recall,rr,rbo,mean_ms,mean_docs_scored");
    EXPECT_EQ(rows[1].rfind("proactive,10,16,,", 0), 0u);
    EXPECT_EQ(rows[3].rfind("proactive,1000,16,,", 0), 0u);

    r = run(with({"sweep", "--algo", "adaptive", "--n", "5,50", "--k", "4,8", "--c", "10", "--depth", "20", "--graph",
                  p("exact.grf")},
                 data_flags()));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);  // header + n=50 for two k values
}

TEST(Cli, NoSubcommandOrUnknownFlag) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    const auto help = run({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("build-graph"), std::string::npos);
}

}  // namespace
}  // namespace ladr
