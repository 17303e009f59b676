#include <catch2/catch_amalgamated.hpp>

#include "xmodal/matrix.hpp"

using namespace xmodal;

TEST_CASE("matmul on known values") {
    Matrix a(2, 3);
    a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
    a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
    Matrix b(3, 2);
    b(0, 0) = 7; b(0, 1) = 8;
    b(1, 0) = 9; b(1, 1) = 10;
    b(2, 0) = 11; b(2, 1) = 12;
    Matrix c = matmul(a, b);
    REQUIRE(c.rows == 2);
    REQUIRE(c.cols == 2);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Matrix a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ConfigError);
}

TEST_CASE("transposed products agree with explicit transpose") {
    Rng rng(11);
    std::uniform_real_distribution<double> d(-1, 1);
    Matrix a(4, 3), b(4, 5);
    for (double& v : a.data) v = d(rng);
    for (double& v : b.data) v = d(rng);
    const Matrix expect_at = matmul(transpose(a), b);
    const Matrix got_at = matmul_at(a, b);
    for (std::size_t k = 0; k < expect_at.data.size(); ++k)
        CHECK(got_at.data[k] == Catch::Approx(expect_at.data[k]).margin(1e-14));

    Matrix c(5, 3);
    for (double& v : c.data) v = d(rng);
    const Matrix expect_bt = matmul(a, transpose(c));
    const Matrix got_bt = matmul_bt(a, c);
    for (std::size_t k = 0; k < expect_bt.data.size(); ++k)
        CHECK(got_bt.data[k] == Catch::Approx(expect_bt.data[k]).margin(1e-14));
}

TEST_CASE("gather_cols picks columns in order") {
    Matrix m(2, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        m(0, j) = static_cast<double>(j);
        m(1, j) = 10.0 + static_cast<double>(j);
    }
    const std::vector<std::size_t> idx = {3, 1};
    const Matrix g = gather_cols(m, idx);
    REQUIRE(g.cols == 2);
    CHECK(g(0, 0) == 3.0);
    CHECK(g(1, 0) == 13.0);
    CHECK(g(0, 1) == 1.0);
    CHECK(g(1, 1) == 11.0);
    const std::vector<std::size_t> bad = {4};
    CHECK_THROWS_AS(gather_cols(m, bad), ConfigError);
}

TEST_CASE("vstack and take_rows round-trip") {
    Matrix a(1, 2, 1.0), b(2, 2, 2.0), c(1, 2, 3.0);
    const Matrix s = vstack(a, b, c);
    REQUIRE(s.rows == 4);
    CHECK(s(0, 0) == 1.0);
    CHECK(s(1, 1) == 2.0);
    CHECK(s(3, 0) == 3.0);
    const Matrix mid = take_rows(s, 1, 3);
    CHECK(mid.rows == 2);
    CHECK(mid(0, 0) == 2.0);
}

TEST_CASE("assert_finite rejects NaN") {
    Matrix m(1, 2, 0.0);
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(m.assert_finite("test"), NumericError);
}

TEST_CASE("column distance and dot helpers") {
    Matrix a(2, 2);
    a(0, 0) = 1; a(1, 0) = 0;
    a(0, 1) = 0; a(1, 1) = 1;
    CHECK(sq_dist_cols(a, 0, a, 1) == 2.0);
    CHECK(dot_cols(a, 0, a, 1) == 0.0);
    CHECK(dot_cols(a, 0, a, 0) == 1.0);
}
