#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ladr/dense.hpp"
#include "support/synthetic.hpp"

namespace ladr {
namespace {

TEST(DenseScore, DotProductExamples) {
    const VectorStore store(3, 2, {3, 4, 1, -1, 0, 0});
    EXPECT_EQ(dense_score(std::vector<float>{1, 0}, 0, store), 3.0F);
    EXPECT_EQ(dense_score(std::vector<float>{0, 0}, 0, store), 0.0F);
    EXPECT_EQ(dense_score(std::vector<float>{0, 0}, 1, store), 0.0F);
    EXPECT_EQ(dense_score(std::vector<float>{1, 1}, 1, store), 0.0F);
}

TEST(DenseScore, DimensionAndIdErrors) {
    const VectorStore store(1, 2, {1, 2});
    try {
        dense_score(std::vector<float>{1, 2, 3}, 0, store);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::dim_error);
    }
    try {
        score_set(std::vector<float>{1, 2}, std::vector<DocId>{5}, store);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::id_error);
    }
}

TEST(DenseScore, KernelHandlesEveryTailLength) {
    std::mt19937_64 rng(5);
    for (std::size_t dim = 1; dim <= 40; ++dim) {
        const VectorStore store = testing::random_store(2, dim, rng());
        double expect = 0.0;
        for (std::size_t i = 0; i < dim; ++i) expect += double{store.row(0)[i]} * store.row(1)[i];
        EXPECT_NEAR(dense_score(store.row(0), 1, store), expect, 1e-4 * std::max(1.0, std::abs(expect)));
        EXPECT_NEAR(dense_score(store.row(0), 1, store, Accumulation::f64), expect, 1e-6);
        // Symmetric bit for bit.
        EXPECT_EQ(dense_score(store.row(0), 1, store), dense_score(store.row(1), 0, store));
    }
}

TEST(ScoreSet, RanksByScoreThenId) {
    const VectorStore store(2, 2, {1, 0, 0, 1});
    const auto out = score_set(std::vector<float>{1, 0}, std::vector<DocId>{1, 0}, store);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0], (Scored<float>{0, 1.0F}));
    EXPECT_EQ(out[1], (Scored<float>{1, 0.0F}));
    EXPECT_TRUE(score_set(std::vector<float>{1, 0}, std::vector<DocId>{}, store).empty());

    const VectorStore ties(3, 1, {2, 2, 2});
    const auto tied = score_set(std::vector<float>{1}, std::vector<DocId>{2, 0, 1}, ties);
    EXPECT_EQ(doc_ids(tied), (std::vector<DocId>{0, 1, 2}));
}

TEST(ExhaustiveSearch, Examples) {
    const VectorStore store(2, 2, {1, 0, 0, 1});
    const auto top1 = exhaustive_search(std::vector<float>{1, 0}, store, 1);
    ASSERT_EQ(top1.size(), 1u);
    EXPECT_EQ(top1[0], (Scored<float>{0, 1.0F}));
    EXPECT_EQ(exhaustive_search(std::vector<float>{1, 0}, store, 10).size(), 2u);
    EXPECT_THROW(exhaustive_search(std::vector<float>{1, 0}, store, 0), Error);
}

TEST(ExhaustiveSearch, EqualsSortedScoreSetPrefix) {
    const VectorStore store = testing::random_store(100, 16, 77);
    const VectorStore queries = testing::random_store(20, 16, 78);
    std::vector<DocId> all(100);
    std::iota(all.begin(), all.end(), 0);
    for (DocId q = 0; q < queries.size(); ++q) {
        auto full = score_set(queries.row(q), all, store);
        for (std::size_t depth : {1, 7, 50, 100, 250}) {
            auto expect = full;
            expect.resize(std::min<std::size_t>(depth, expect.size()));
            EXPECT_EQ(exhaustive_search(queries.row(q), store, depth), expect);
        }
    }
}

TEST(ExhaustiveSearch, FullDepthIsAPermutation) {
    const VectorStore store = testing::random_store(64, 8, 1);
    auto ids = doc_ids(exhaustive_search(testing::random_store(1, 8, 2).row(0), store, 64));
    std::sort(ids.begin(), ids.end());
    std::vector<DocId> expect(64);
    std::iota(expect.begin(), expect.end(), 0);
    EXPECT_EQ(ids, expect);
}

TEST(ExhaustiveSearch, PositiveScalingKeepsTheRanking) {
    // Powers of two scale every product and partial sum exactly.
    const VectorStore store = testing::random_store(200, 24, 9);
    const VectorStore q = testing::random_store(5, 24, 10);
    for (DocId i = 0; i < q.size(); ++i) {
        const auto base = doc_ids(exhaustive_search(q.row(i), store, 200));
        for (float alpha : {0.125F, 0.5F, 2.0F, 64.0F}) {
            std::vector<float> scaled(q.row(i).begin(), q.row(i).end());
            for (auto& x : scaled) x *= alpha;
            EXPECT_EQ(doc_ids(exhaustive_search(scaled, store, 200)), base);
        }
    }
    // Small-integer data keeps arithmetic exact for any integral alpha.
    std::mt19937 rng(4);
    std::vector<float> data(300 * 6);
    for (auto& x : data) x = static_cast<float>(static_cast<int>(rng() % 9) - 4);
    const VectorStore ints(300, 6, data);
    const std::vector<float> qv = {1, -2, 3, 0, 2, -1};
    const auto base = doc_ids(exhaustive_search(qv, ints, 300));
    for (float alpha : {3.0F, 7.0F}) {
        std::vector<float> scaled = qv;
        for (auto& x : scaled) x *= alpha;
        EXPECT_EQ(doc_ids(exhaustive_search(scaled, ints, 300)), base);
    }
}

TEST(ScoreSet, SharedDocumentsScoreIdentically) {
    const VectorStore store = testing::random_store(50, 12, 3);
    const VectorStore query = testing::random_store(1, 12, 4);
    const auto qv = query.row(0);
    const std::vector<DocId> small = {3, 9, 27}, big = {1, 3, 5, 9, 11, 27, 40};
    const auto a = score_set(qv, small, store), b = score_set(qv, big, store);
    for (const auto& hit : a) {
        auto it = std::find_if(b.begin(), b.end(), [&](const auto& x) { return x.doc == hit.doc; });
        ASSERT_NE(it, b.end());
        EXPECT_EQ(it->score, hit.score);
        EXPECT_EQ(hit.score, dense_score(qv, hit.doc, store));
    }
}

}  // namespace
}  // namespace ladr
