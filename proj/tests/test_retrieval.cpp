#include <catch2/catch_amalgamated.hpp>

#include "xmodal/retrieval.hpp"

using namespace xmodal;

namespace {

// Independent brute-force MAP oracle: recomputes precision at every rank
// from scratch, never via average_precision/map_report.
double oracle_ap(const std::vector<char>& rel, std::size_t cutoff) {
    double relevant = 0.0;
    for (std::size_t r = 0; r < cutoff; ++r)
        if (rel[r]) relevant += 1.0;
    if (relevant == 0.0) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < cutoff; ++r) {
        if (!rel[r]) continue;
        double hits = 0.0;
        for (std::size_t k = 0; k <= r; ++k)
            if (rel[k]) hits += 1.0;
        total += hits / static_cast<double>(r + 1);
    }
    return total / relevant;
}

double oracle_map(const std::vector<std::vector<char>>& runs, std::size_t cutoff) {
    double sum = 0.0;
    for (const auto& rel : runs) sum += oracle_ap(rel, std::min(cutoff, rel.size()));
    return sum / static_cast<double>(runs.size());
}

}  // namespace

TEST_CASE("ranking hand case under cosine") {
    Matrix q(2, 1);
    q(0, 0) = 1.0;
    q(1, 0) = 0.0;
    Matrix db(2, 3);
    db(0, 0) = 1.0; db(1, 0) = 0.0;   // cosine 1
    db(0, 1) = 0.0; db(1, 1) = 1.0;   // cosine 0
    db(0, 2) = 0.6; db(1, 2) = 0.8;   // cosine 0.6
    const auto ranked = rank(q, db, SimilarityMetric::cosine);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0] == std::vector<std::size_t>{0, 2, 1});
}

TEST_CASE("identical item ranks first and db permutation does not matter") {
    Rng rng(3);
    std::uniform_real_distribution<double> d(-1, 1);
    Matrix q(4, 1);
    for (double& v : q.data) v = d(rng);
    Matrix db(4, 6);
    for (double& v : db.data) v = d(rng);
    for (std::size_t i = 0; i < 4; ++i) db(i, 3) = q(i, 0) * 2.0;  // same direction as the query
    const auto ranked = rank(q, db, SimilarityMetric::cosine);
    CHECK(ranked[0][0] == 3);

    // permute db columns, expect the same ranking up to the relabeling
    std::vector<std::size_t> perm = {5, 2, 0, 4, 1, 3};
    const Matrix db2 = gather_cols(db, perm);
    const auto ranked2 = rank(q, db2, SimilarityMetric::cosine);
    for (std::size_t r = 0; r < 6; ++r) CHECK(perm[ranked2[0][r]] == ranked[0][r]);
}

TEST_CASE("tie-break is ascending index") {
    Matrix q(2, 1);
    q(0, 0) = 1.0;
    Matrix db(2, 3, 0.0);
    db(0, 0) = 1.0;
    db(0, 1) = 1.0;
    db(0, 2) = 1.0;
    const auto ranked = rank(q, db, SimilarityMetric::dot);
    CHECK(ranked[0] == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("relevance rules") {
    const std::vector<double> a = {1, 1, 0}, b = {0, 1, 1}, c = {1, 0, 0}, d = {0, 1, 1};
    CHECK(relevance(a, a, LabelMode::multi_label));
    CHECK(relevance(a, b, LabelMode::multi_label));
    CHECK_FALSE(relevance(c, d, LabelMode::multi_label));
    const std::vector<double> h1 = {1, 0}, h2 = {0, 1};
    CHECK(relevance(h1, h1, LabelMode::single_label));
    CHECK_FALSE(relevance(h1, h2, LabelMode::single_label));
}

TEST_CASE("average precision worked examples") {
    const std::vector<char> mixed = {1, 0, 1};
    CHECK(average_precision(mixed, 3) == Catch::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
    const std::vector<char> all(5, 1);
    CHECK(average_precision(all, 5) == 1.0);
    const std::vector<char> none(5, 0);
    CHECK(average_precision(none, 5) == 0.0);
    CHECK_THROWS_AS(average_precision(std::vector<char>{}, 0), ValidationError);
    CHECK_THROWS_AS(average_precision(mixed, 4), ConfigError);
}

TEST_CASE("ap never increases when a relevant item moves down") {
    Rng rng(17);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int it = 0; it < 50; ++it) {
        std::vector<char> rel(12);
        for (auto& r : rel) r = static_cast<char>(coin(rng));
        for (std::size_t i = 0; i + 1 < rel.size(); ++i) {
            if (rel[i] == 1 && rel[i + 1] == 0) {
                std::vector<char> swapped = rel;
                std::swap(swapped[i], swapped[i + 1]);
                CHECK(average_precision(swapped, swapped.size()) <= average_precision(rel, rel.size()));
            }
        }
    }
}

TEST_CASE("map_report basics") {
    RetrievalRun iq;
    iq.direction = Direction::image_query_text_db;
    iq.ranked = {{0, 1}, {0, 1}};
    iq.ranked_relevance = {{1, 1}, {0, 1}};
    RetrievalRun tq;
    tq.direction = Direction::text_query_image_db;
    tq.ranked = {{0, 1}};
    tq.ranked_relevance = {{1, 0}};
    const MapReport r = map_report(iq, tq);
    CHECK(r.image_query.map_at_all == Catch::Approx(0.75));  // (1 + 0.5) / 2
    CHECK(r.text_query.map_at_all == 1.0);
    CHECK(r.avg_at_all == Catch::Approx(0.875));
    // db smaller than the cutoff: MAP@50 equals MAP@all
    CHECK(r.image_query.map_at_50 == r.image_query.map_at_all);
}

TEST_CASE("map_report equals the brute-force oracle on random runs") {
    Rng rng(2025);
    for (int run = 0; run < 50; ++run) {
        std::uniform_int_distribution<std::size_t> db_size(1, 20);
        std::uniform_int_distribution<std::size_t> n_queries(1, 10);
        std::uniform_int_distribution<int> coin(0, 1);
        auto make_run = [&](Direction dir) {
            RetrievalRun r;
            r.direction = dir;
            const std::size_t nq = n_queries(rng);
            const std::size_t nd = db_size(rng);
            r.ranked.resize(nq);
            r.ranked_relevance.resize(nq);
            for (std::size_t q = 0; q < nq; ++q) {
                r.ranked[q].resize(nd);
                std::iota(r.ranked[q].begin(), r.ranked[q].end(), 0);
                r.ranked_relevance[q].resize(nd);
                for (auto& rel : r.ranked_relevance[q]) rel = static_cast<char>(coin(rng));
            }
            return r;
        };
        const RetrievalRun iq = make_run(Direction::image_query_text_db);
        const RetrievalRun tq = make_run(Direction::text_query_image_db);
        const MapReport report = map_report(iq, tq, 50);
        CHECK(std::abs(report.image_query.map_at_50 - oracle_map(iq.ranked_relevance, 50)) < 1e-12);
        CHECK(std::abs(report.image_query.map_at_all - oracle_map(iq.ranked_relevance, 1000000)) < 1e-12);
        CHECK(std::abs(report.text_query.map_at_all - oracle_map(tq.ranked_relevance, 1000000)) < 1e-12);
    }
}

TEST_CASE("random ranking approaches the relevant-fraction baseline") {
    // Balanced relevance, 100 random rankings of 200 items: the mean MAP@all
    // stays within 0.05 of 0.5.
    Rng rng(11);
    double total = 0.0;
    const std::size_t n = 200;
    std::vector<char> rel(n);
    for (std::size_t i = 0; i < n; ++i) rel[i] = i < n / 2 ? 1 : 0;
    for (int seed = 0; seed < 100; ++seed) {
        std::shuffle(rel.begin(), rel.end(), rng);
        total += average_precision(rel, n);
    }
    CHECK(std::abs(total / 100.0 - 0.5) < 0.05);
}

TEST_CASE("map is invariant under query permutation") {
    RetrievalRun iq;
    iq.direction = Direction::image_query_text_db;
    iq.ranked = {{0, 1, 2}, {2, 1, 0}, {1, 0, 2}};
    iq.ranked_relevance = {{1, 0, 0}, {0, 1, 1}, {1, 1, 0}};
    RetrievalRun iq_perm = iq;
    std::swap(iq_perm.ranked[0], iq_perm.ranked[2]);
    std::swap(iq_perm.ranked_relevance[0], iq_perm.ranked_relevance[2]);
    RetrievalRun tq;
    tq.direction = Direction::text_query_image_db;
    tq.ranked = {{0}};
    tq.ranked_relevance = {{1}};
    CHECK(map_report(iq, tq).image_query.map_at_all ==
          map_report(iq_perm, tq).image_query.map_at_all);
}
