#include <algorithm>
#include <chrono>
#include <set>

#include <gtest/gtest.h>

#include "ladr/search.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace ladr {
namespace {

const std::vector<std::string> kAlpha = {"alpha"};

/// Five documents on a line, each pointing at the next; only d0 matches the query lexically.
struct Chain {
    Corpus corpus{{{"d0", "alpha"}, {"d1", "beta"}, {"d2", "gamma"}, {"d3", "delta"}, {"d4", "eps"}}};
    InvertedIndex index = build_lexical_index(corpus);
    VectorStore store{5, 2, {1, 0, 2, 0, 3, 0, 4, 0, 5, 0}};
    ProximityGraph graph = [] {
        ProximityGraph g(5, 1);
        for (DocId d = 0; d < 4; ++d) g.set_row(d, std::vector<DocId>{d + 1});
        return g;
    }();
    std::vector<float> q = {1, 0};
};

LadrParams chain_params() {
    LadrParams p;
    p.n = 1;
    p.k = 1;
    p.c = 1;
    return p;
}

std::set<DocId> id_set(const ScoredList& list) {
    std::set<DocId> out;
    for (const auto& h : list) out.insert(h.doc);
    return out;
}

TEST(Adaptive, WalksTheWholeChain) {
    const Chain ch;
    const auto r = adaptive_search(kAlpha, ch.q, ch.index, ch.graph, ch.store, chain_params());
    ASSERT_FALSE(r.results.empty());
    EXPECT_EQ(r.results[0].doc, 4u);
    EXPECT_EQ(r.results[0].score, 5.0F);
    EXPECT_EQ(r.trace.iterations, 4u);
    EXPECT_EQ(r.trace.docs_scored, 5u);
    EXPECT_EQ(r.trace.seeds_found, 1u);
    EXPECT_EQ(doc_ids(r.results), (std::vector<DocId>{4, 3, 2, 1, 0}));
}

TEST(Proactive, StopsAfterOneHop) {
    const Chain ch;
    const auto r = proactive_search(kAlpha, ch.q, ch.index, ch.graph, ch.store, chain_params());
    EXPECT_EQ(id_set(r.results), (std::set<DocId>{0, 1}));
    EXPECT_EQ(r.results[0].doc, 1u);
    EXPECT_EQ(r.trace.docs_scored, 2u);
}

TEST(Proactive, ScoresSeedsAndTheirRows) {
    Chain ch;
    ProximityGraph g(5, 1);
    g.set_row(0, std::vector<DocId>{2});
    const auto r = proactive_search(kAlpha, ch.q, ch.index, g, ch.store, chain_params());
    EXPECT_EQ(id_set(r.results), (std::set<DocId>{0, 2}));
    EXPECT_EQ(r.results[0], (Scored<float>{2, 3.0F}));
}

TEST(Search, NoLexicalMatchGivesEmptyResult) {
    const Chain ch;
    const std::vector<std::string> none = {"zzz"};
    for (auto* fn : {&proactive_search, &adaptive_search}) {
        const auto r = fn(none, ch.q, ch.index, ch.graph, ch.store, chain_params());
        EXPECT_TRUE(r.results.empty());
        EXPECT_EQ(r.trace.seeds_found, 0u);
        EXPECT_EQ(r.trace.docs_scored, 0u);
    }
    EXPECT_TRUE(rerank_search(none, ch.q, ch.index, ch.store, 10, 10).results.empty());

    auto p = chain_params();
    p.fallback_exhaustive = true;
    const auto r = proactive_search(none, ch.q, ch.index, ch.graph, ch.store, p);
    EXPECT_TRUE(r.trace.fell_back);
    EXPECT_EQ(r.results, exhaustive_search(ch.q, ch.store, p.depth));
}

TEST(Adaptive, ConvergesImmediatelyWhenNeighborsAreSeeds) {
    const Corpus corpus({{"a", "x"}, {"b", "x"}, {"c", "y"}});
    const auto index = build_lexical_index(corpus);
    const VectorStore store(3, 1, {1, 2, 3});
    ProximityGraph g(3, 1);
    g.set_row(0, std::vector<DocId>{1});
    g.set_row(1, std::vector<DocId>{0});
    g.set_row(2, std::vector<DocId>{0});
    LadrParams p;
    p.n = 2;
    p.k = 1;
    p.c = 2;
    const std::vector<std::string> qt = {"x"};
    const std::vector<float> q = {1};
    const auto r = adaptive_search(qt, q, index, g, store, p);
    EXPECT_EQ(r.trace.iterations, 0u);
    EXPECT_EQ(r.results, (rerank_search(qt, q, index, store, 2, p.depth).results));
}

TEST(Rerank, ReordersSeedsByDenseScore) {
    const Corpus corpus({{"d0", "x x"}, {"d1", "x"}, {"d2", "y"}});
    const auto index = build_lexical_index(corpus);
    const VectorStore store(3, 1, {0.2F, 0.9F, 5.0F});
    const std::vector<std::string> qt = {"x"};
    const std::vector<float> q = {1};
    const auto r = rerank_search(qt, q, index, store, 10, 10);
    ASSERT_EQ(r.results.size(), 2u);
    EXPECT_EQ(r.results[0], (Scored<float>{1, 0.9F}));
    EXPECT_EQ(r.results[1], (Scored<float>{0, 0.2F}));
    EXPECT_EQ(rerank_search(qt, q, index, store, 1, 10).results.size(), 1u);
}

TEST(Search, ParameterValidation) {
    const Chain ch;
    auto p = chain_params();
    p.k = 2;
    EXPECT_THROW(proactive_search(kAlpha, ch.q, ch.index, ch.graph, ch.store, p), Error);
    p = chain_params();
    p.c = 2;
    EXPECT_THROW(adaptive_search(kAlpha, ch.q, ch.index, ch.graph, ch.store, p), Error);
    p = chain_params();
    p.n = 0;
    EXPECT_THROW(proactive_search(kAlpha, ch.q, ch.index, ch.graph, ch.store, p), Error);
    p = chain_params();
    p.depth = 0;
    EXPECT_THROW(proactive_search(kAlpha, ch.q, ch.index, ch.graph, ch.store, p), Error);
    const std::vector<float> wrong = {1, 0, 0};
    EXPECT_THROW(proactive_search(kAlpha, wrong, ch.index, ch.graph, ch.store, chain_params()), Error);
}

TEST(Adaptive, TimeoutReturnsPartialResult) {
    const Chain ch;
    auto p = chain_params();
    p.timeout = std::chrono::microseconds(0);
    const auto r = adaptive_search(kAlpha, ch.q, ch.index, ch.graph, ch.store, p);
    EXPECT_TRUE(r.trace.timed_out);
    EXPECT_EQ(r.trace.iterations, 0u);
    EXPECT_EQ(doc_ids(r.results), (std::vector<DocId>{0}));
}

class SyntheticSearch : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        testing::SyntheticConfig cfg;
        cfg.docs = 2000;
        cfg.queries = 40;
        data_ = new testing::SyntheticData(testing::make_clustered(cfg));
        index_ = new InvertedIndex(build_lexical_index(data_->corpus));
        graph_ = new ProximityGraph(build_exact_graph(data_->store, 16));
    }
    static void TearDownTestSuite() {
        delete data_;
        delete index_;
        delete graph_;
    }
    static std::span<const float> qvec(std::size_t i) { return data_->queries.vector(i); }
    static const std::vector<std::string>& qtok(std::size_t i) { return data_->query_tokens[i]; }

    static testing::SyntheticData* data_;
    static InvertedIndex* index_;
    static ProximityGraph* graph_;
};

testing::SyntheticData* SyntheticSearch::data_ = nullptr;
InvertedIndex* SyntheticSearch::index_ = nullptr;
ProximityGraph* SyntheticSearch::graph_ = nullptr;

TEST_F(SyntheticSearch, CandidateSetsNestAndRespectBounds) {
    const auto& store = data_->store;
    for (std::size_t i = 0; i < data_->queries.size(); ++i) {
        for (std::size_t n : {5, 50}) {
            LadrParams p;
            p.n = n;
            p.k = 8;
            p.c = std::min<std::size_t>(5, n);
            p.depth = store.size();
            const auto re = rerank_search(qtok(i), qvec(i), *index_, store, n, store.size());
            const auto pro = proactive_search(qtok(i), qvec(i), *index_, *graph_, store, p);
            const auto ada = adaptive_search(qtok(i), qvec(i), *index_, *graph_, store, p);
            const auto re_set = id_set(re.results), pro_set = id_set(pro.results), ada_set = id_set(ada.results);
            EXPECT_TRUE(std::includes(pro_set.begin(), pro_set.end(), re_set.begin(), re_set.end()));
            EXPECT_TRUE(std::includes(ada_set.begin(), ada_set.end(), re_set.begin(), re_set.end()));
            EXPECT_LE(pro.trace.docs_scored, n * (p.k + 1));
            EXPECT_EQ(pro.trace.docs_scored, pro.results.size());
            EXPECT_LE(ada.trace.docs_scored, store.size());
            EXPECT_LE(ada.trace.iterations, store.size());
            for (const auto* list : {&re.results, &pro.results, &ada.results}) {
                for (const auto& hit : *list) EXPECT_EQ(hit.score, dense_score(qvec(i), hit.doc, store));
                EXPECT_TRUE(std::is_sorted(list->begin(), list->end(), RankOrder{}));
            }
        }
    }
}

TEST_F(SyntheticSearch, ProactiveNeverLosesOverlapToRerank) {
    const auto& store = data_->store;
    for (std::size_t i = 0; i < data_->queries.size(); ++i) {
        const auto exact = doc_ids(exhaustive_search(qvec(i), store, 100));
        LadrParams p;
        p.n = 20;
        p.k = 16;
        p.depth = 100;
        const auto pro = doc_ids(proactive_search(qtok(i), qvec(i), *index_, *graph_, store, p).results);
        const auto re = doc_ids(rerank_search(qtok(i), qvec(i), *index_, store, 20, 100).results);
        for (std::size_t m : {1, 5, 10, 50, 100}) {
            EXPECT_GE(testing::prefix_overlap(pro, exact, m), testing::prefix_overlap(re, exact, m));
        }
    }
}

TEST_F(SyntheticSearch, DeterministicResultsAndTraces) {
    LadrParams p;
    p.n = 30;
    p.k = 16;
    p.c = 10;
    for (std::size_t i = 0; i < 10; ++i) {
        const auto a = adaptive_search(qtok(i), qvec(i), *index_, *graph_, data_->store, p);
        const auto b = adaptive_search(qtok(i), qvec(i), *index_, *graph_, data_->store, p);
        EXPECT_EQ(a.results, b.results);
        EXPECT_EQ(a.trace, b.trace);
    }
}

TEST_F(SyntheticSearch, EmptyGraphMakesProactiveARerank) {
    ProximityGraph empty(data_->store.size(), 4);
    LadrParams p;
    p.n = 40;
    p.k = 4;
    p.depth = 25;
    for (std::size_t i = 0; i < data_->queries.size(); ++i) {
        const auto pro = proactive_search(qtok(i), qvec(i), *index_, empty, data_->store, p);
        const auto re = rerank_search(qtok(i), qvec(i), *index_, data_->store, 40, 25);
        EXPECT_EQ(pro.results, re.results);
        EXPECT_EQ(pro.trace.docs_scored, re.trace.docs_scored);
    }
}

TEST_F(SyntheticSearch, RunSearchDispatches) {
    const SearchEnv env{index_, graph_, &data_->store};
    LadrParams p;
    p.n = 10;
    p.k = 4;
    p.c = 3;
    p.depth = 20;
    EXPECT_EQ(run_search(Algorithm::exhaustive, qtok(0), qvec(0), env, p).results,
              exhaustive_search(qvec(0), data_->store, 20));
    EXPECT_EQ(run_search(Algorithm::proactive, qtok(0), qvec(0), env, p).results,
              proactive_search(qtok(0), qvec(0), *index_, *graph_, data_->store, p).results);
    EXPECT_EQ(run_search(Algorithm::adaptive, qtok(0), qvec(0), env, p).results,
              adaptive_search(qtok(0), qvec(0), *index_, *graph_, data_->store, p).results);
    const SearchEnv no_graph{index_, nullptr, &data_->store};
    EXPECT_THROW(run_search(Algorithm::adaptive, qtok(0), qvec(0), no_graph, p), Error);
    EXPECT_NO_THROW(run_search(Algorithm::rerank, qtok(0), qvec(0), no_graph, p));
}

TEST_F(SyntheticSearch, AccumulationModesAgreeOnRankingMostly) {
    LadrParams p;
    p.n = 50;
    p.k = 8;
    p.depth = 10;
    p.accumulation = Accumulation::f64;
    const auto r = proactive_search(qtok(0), qvec(0), *index_, *graph_, data_->store, p);
    for (const auto& hit : r.results) {
        EXPECT_EQ(hit.score, dense_score(qvec(0), hit.doc, data_->store, Accumulation::f64));
    }
}

}  // namespace
}  // namespace ladr
