#include <doctest.h>

#include <cmath>
#include <sstream>

#include "grae/error.hpp"
#include "grae/numerics.hpp"
#include "oracles.hpp"

using namespace grae;

namespace {

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("cholesky examples") {
    CHECK(cholesky(Matrix::identity(2)).lower == Matrix::identity(2));
    const CholeskyFactor f = cholesky(Matrix{{4, 2}, {2, 5}});
    CHECK(max_abs_diff(f.lower, Matrix{{2, 0}, {1, 2}}) < 1e-15);
    CHECK(max_abs_diff(f.reconstruct(), Matrix{{4, 2}, {2, 5}}) < 1e-14);
    CHECK(code_of([] { cholesky(Matrix{{1, 2}, {2, 1}}); }) == ErrorCode::NotPositiveDefinite);
}

TEST_CASE("log_det_pd examples") {
    CHECK(log_det_pd(Matrix::identity(3)) == doctest::Approx(0.0));
    CHECK(log_det_pd(Matrix{{2, 0}, {0, 3}}) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
    CHECK(log_det_pd(Matrix{{2, 0.9}, {0.9, 2}}) == doctest::Approx(std::log(4.0 - 0.81)).epsilon(1e-14));
}

TEST_CASE("invert_pd examples") {
    CHECK(max_abs_diff(invert_pd(Matrix::identity(3)), Matrix::identity(3)) < 1e-15);
    CHECK(max_abs_diff(invert_pd(Matrix{{2, 0}, {0, 4}}), Matrix{{0.5, 0}, {0, 0.25}}) < 1e-15);
    Rng rng(3);
    const Matrix a = oracle::random_pd(4, rng);
    CHECK(frobenius_norm(matmul(a, invert_pd(a)) - Matrix::identity(4)) < 1e-10);
}

TEST_CASE("svd_small examples") {
    SvdResult s = svd_small(Matrix::identity(2));
    CHECK(s.s[0] == doctest::Approx(1.0));
    CHECK(s.s[1] == doctest::Approx(1.0));
    s = svd_small(Matrix{{3, 0}, {0, 1}});
    CHECK(s.s[0] == doctest::Approx(3.0));
    CHECK(s.s[1] == doctest::Approx(1.0));
    const Matrix r = rotation2d(30.0);
    s = svd_small(r);
    CHECK(s.s[0] == doctest::Approx(1.0));
    CHECK(s.s[1] == doctest::Approx(1.0));
    CHECK(max_abs_diff(matmul_nt(s.u, s.v), r) < 1e-10);
}

TEST_CASE("svd reconstructs rectangular matrices") {
    Rng rng(11);
    for (auto [r, c] : {std::pair{5, 3}, {3, 5}, {7, 7}}) {
        const Matrix a = oracle::random_matrix(r, c, rng);
        const SvdResult s = svd_small(a);
        Matrix us = s.u;
        for (std::size_t i = 0; i < us.rows(); ++i)
            for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= s.s[k];
        CHECK(max_abs_diff(matmul_nt(us, s.v), a) < 1e-12);
        CHECK(max_abs_diff(matmul_tn(s.u, s.u), Matrix::identity(s.s.size())) < 1e-12);
    }
}

TEST_CASE("log_det_pd agrees with the singular values of random PD matrices") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + trial % 16;
        const Matrix a = oracle::random_pd(n, rng);
        const SvdResult s = svd_small(a);
        double ref = 0.0;
        for (double v : s.s) ref += std::log(v);
        CHECK(std::abs(log_det_pd(a) - ref) < 1e-8);
        for (std::size_t i = 0; i + 1 < s.s.size(); ++i) CHECK(s.s[i] >= s.s[i + 1]);
        for (double v : s.s) CHECK(v >= 0.0);
    }
}

TEST_CASE("cholesky round trip on L L^T") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + trial % 10;
        Matrix l = oracle::random_matrix(n, n, rng);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) l(i, j) = 0.0;
            l(i, i) = 0.5 + std::abs(l(i, i));
        }
        const Matrix a = matmul_nt(l, l);
        CHECK(max_abs_diff(cholesky(a).reconstruct(), a) < 1e-10);
        CHECK(max_abs_diff(cholesky(a).lower, l) < 1e-10);
    }
}

TEST_CASE("determinant and random_orthogonal") {
    CHECK(determinant(Matrix{{1, 2}, {3, 4}}) == doctest::Approx(-2.0));
    Rng rng(2);
    const Matrix q = random_orthogonal(5, rng);
    CHECK(max_abs_diff(matmul_tn(q, q), Matrix::identity(5)) < 1e-12);
    CHECK(std::abs(std::abs(determinant(q)) - 1.0) < 1e-12);
}

TEST_CASE("csv round trip is exact") {
    Rng rng(1);
    const Matrix a = oracle::random_matrix(4, 3, rng);
    std::stringstream s;
    write_csv(s, a);
    CHECK(read_csv(s) == a);
}
