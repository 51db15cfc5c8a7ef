#include <doctest.h>

#include <cmath>
#include <numbers>

#include "grae/error.hpp"
#include "grae/objectives.hpp"
#include "oracles.hpp"

using namespace grae;

namespace {

const ObservationModel kGauss{ObservationKind::gaussian_unit};
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

MlpNetwork linear(const Matrix& a, Vector b = {}) {
    if (b.empty()) b.assign(a.rows(), 0.0);
    return MlpNetwork({DenseLayer{a, std::move(b), ActivationKind::identity}});
}

GaussianPosterior posterior(Vector mean, const Matrix& sigma) { return {std::move(mean), cholesky(sigma)}; }

/// E_q[log N(x; A z + b, I)] - beta KL for q = N(mu, S).
double linear_expected_elbo(const Matrix& a, const Vector& b, const Vector& x, const Vector& mu, const Matrix& s,
                            double beta) {
    const Vector r = x - (matvec(a, mu) + b);
    const double d = static_cast<double>(x.size());
    return -0.5 * (squared_norm(r) + trace(matmul(matmul(a, s), a.transpose()))) - 0.5 * d * kLog2Pi -
           beta * kl_std_normal(mu, s);
}

Vector away_from_kinks(const MlpNetwork& net, Rng& rng) {
    for (;;) {
        Vector z = oracle::random_vector(net.in_dim(), rng);
        if (oracle::min_abs_preactivation(net, z) > 1e-3) return z;
    }
}

}  // namespace

TEST_CASE("beta_vae_mc degenerate posterior reduces to the reconstruction log-likelihood") {
    Rng rng(1);
    const MlpNetwork dec = oracle::random_net({2, 4, 3}, ActivationKind::tanh, ActivationKind::identity, rng);
    const Vector h{0.3, -0.2}, x{0.1, 0.5, -0.4};
    GaussianPosterior post{h, CholeskyFactor{Matrix{{1e-10, 0}, {0, 1e-10}}}};
    CHECK(std::abs(beta_vae_mc(post, dec, kGauss, x, 0.0, 1, rng) - obs_loglik(kGauss, x, forward(dec, h).first)) < 1e-8);
}

TEST_CASE("beta_vae_mc is deterministic and unbiased for linear Gaussian models") {
    Rng rng(2);
    const Matrix a = oracle::random_matrix(4, 2, rng);
    const Vector b = oracle::random_vector(4, rng), x = oracle::random_vector(4, rng), mu{0.4, -0.3};
    const Matrix s{{0.5, 0.1}, {0.1, 0.3}};
    const auto post = posterior(mu, s);
    Rng r1(7), r2(7);
    CHECK(beta_vae_mc(post, linear(a, b), kGauss, x, 0.5, 100, r1) ==
          beta_vae_mc(post, linear(a, b), kGauss, x, 0.5, 100, r2));
    const McEstimate est = beta_vae_mc_estimate(post, linear(a, b), kGauss, x, 0.5, 100000, r1);
    CHECK(std::abs(est.value - linear_expected_elbo(a, b, x, mu, s, 0.5)) < 3.0 * est.std_error);
}

TEST_CASE("hessian_fx examples") {
    Rng rng(3);
    const Matrix a = oracle::random_matrix(5, 3, rng);
    const Vector x = oracle::random_vector(5, rng), z = oracle::random_vector(3, rng);
    const Matrix expected = -1.0 * matmul_tn(a, a);
    for (auto mode : {HessianMode::jacobian_form, HessianMode::finite_difference}) {
        const Matrix hz = hessian_fx(linear(a), kGauss, x, z, mode);
        CHECK(max_abs_diff(hz, expected) < (mode == HessianMode::jacobian_form ? 1e-14 : 1e-8));
    }
    CHECK(max_abs_diff(hessian_fx(linear(Matrix::identity(3)), kGauss, Vector{1, 2, 3}, z, HessianMode::jacobian_form),
                       -1.0 * Matrix::identity(3)) == 0.0);
}

TEST_CASE("relu decoders: Hessian modes agree away from kinks") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const MlpNetwork dec = oracle::random_net({3, 8, 6}, ActivationKind::relu, ActivationKind::identity, rng);
        const Vector z = away_from_kinks(dec, rng), x = oracle::random_vector(6, rng);
        CHECK(max_abs_diff(hessian_fx(dec, kGauss, x, z, HessianMode::jacobian_form),
                           hessian_fx(dec, kGauss, x, z, HessianMode::finite_difference)) < 1e-4);
        const auto post = posterior(z, Matrix{{0.2, 0, 0}, {0, 0.1, 0.02}, {0, 0.02, 0.3}});
        const Matrix s = post.covariance();
        CHECK(std::abs(taylor_objective(z, s, dec, kGauss, x, 0.7, HessianMode::jacobian_form) -
                       taylor_objective(z, s, dec, kGauss, x, 0.7, HessianMode::finite_difference)) < 1e-6);
    }
}

TEST_CASE("taylor_objective limits and linear exactness") {
    Rng rng(5);
    const MlpNetwork dec = oracle::random_net({2, 5, 3}, ActivationKind::tanh, ActivationKind::identity, rng);
    const Vector h{0.2, 0.1}, x{0.3, -0.3, 0.9};
    CHECK(taylor_objective(h, Matrix{{1e-14, 0}, {0, 1e-14}}, dec, kGauss, x, 0.0) ==
          doctest::Approx(obs_loglik(kGauss, x, forward(dec, h).first)).epsilon(1e-12));

    const Matrix a = oracle::random_matrix(4, 2, rng);
    const Vector b = oracle::random_vector(4, rng), xl = oracle::random_vector(4, rng), mu{-0.5, 0.8};
    const Matrix s{{0.4, -0.1}, {-0.1, 0.6}};
    const double t = taylor_objective(mu, s, linear(a, b), kGauss, xl, 0.8);
    CHECK(std::abs(t - linear_expected_elbo(a, b, xl, mu, s, 0.8)) < 1e-10);
    const McEstimate est = beta_vae_mc_estimate(posterior(mu, s), linear(a, b), kGauss, xl, 0.8, 100000, rng);
    CHECK(std::abs(est.value - t) < 3.0 * est.std_error);
}

TEST_CASE("optimal_covariance examples") {
    const Vector z{0.1, 0.2}, x{0.0, 0.0};
    CHECK(max_abs_diff(optimal_covariance(linear(Matrix(2, 2)), kGauss, x, z, 1.0), Matrix::identity(2)) == 0.0);
    const Matrix a{{1, 0}, {0, std::sqrt(3.0)}};
    const Matrix s = optimal_covariance(linear(a), kGauss, x, z, 1.0);
    CHECK(max_abs_diff(s, Matrix{{0.5, 0}, {0, 0.25}}) < 1e-14);
    const Matrix numeric = oracle::ascend_taylor_covariance(-1.0 * matmul_tn(a, a), 1.0);
    CHECK(frobenius_norm(numeric - s) < 1e-8);
}

TEST_CASE("optimal_covariance is a local maximum of the Taylor objective") {
    Rng rng(6);
    const MlpNetwork dec = oracle::random_net({3, 6, 5}, ActivationKind::elu, ActivationKind::sigmoid, rng);
    const Vector h = oracle::random_vector(3, rng), x = oracle::random_vector(5, rng);
    for (double beta : {0.1, 0.5, 2.0}) {
        const Matrix s = optimal_covariance(dec, kGauss, x, h, beta);
        const double best = taylor_objective(h, s, dec, kGauss, x, beta);
        for (int i = 0; i < 50; ++i) {
            const Matrix e = oracle::random_matrix(3, 3, rng, 0.05);
            Matrix p = s + symmetrize(e);
            try {
                cholesky(p);
            } catch (const Error&) {
                continue;
            }
            CHECK(taylor_objective(h, p, dec, kGauss, x, beta) <= best);
        }
        const Matrix numeric = oracle::ascend_taylor_covariance(hessian_fx(dec, kGauss, x, h, HessianMode::jacobian_form), beta);
        CHECK(frobenius_norm(numeric - s) < 1e-6);
    }
}

TEST_CASE("profiled objective identities") {
    Rng rng(7);
    const MlpNetwork dec = oracle::random_net({3, 6, 4}, ActivationKind::tanh, ActivationKind::identity, rng);
    const Vector h = oracle::random_vector(3, rng), x = oracle::random_vector(4, rng);
    for (double beta : {0.1, 0.4, 1.0}) {
        const Matrix s = optimal_covariance(dec, kGauss, x, h, beta);
        const double p = profiled_objective(h, dec, kGauss, x, beta);
        CHECK(std::abs(p - taylor_objective(h, s, dec, kGauss, x, beta)) < 1e-10);
        CHECK(std::abs(grae::grae(h, dec, x, beta) + p + 2.0 * kLog2Pi) < 1e-10);
    }
    const MlpNetwork zero = linear(Matrix(4, 3), Vector{0.1, 0.2, 0.3, 0.4});
    CHECK(profiled_objective(h, zero, kGauss, x, 0.3) ==
          doctest::Approx(obs_loglik(kGauss, x, forward(zero, h).first) - 0.15 * squared_norm(h)).epsilon(1e-14));
}

TEST_CASE("grae examples") {
    const MlpNetwork zero = linear(Matrix(2, 2));
    CHECK(grae::grae(Vector{0, 0}, zero, Vector{0, 0}, 1.0) == 0.0);
    const MlpNetwork one = linear(Matrix{{2.0}}, Vector{0.0});
    CHECK(grae::grae(Vector{0.0}, one, Vector{0.0}, 1.0) == doctest::Approx(0.5 * std::log(5.0)).epsilon(1e-14));
    Rng rng(8);
    CHECK(grae_approx(Vector{0.0}, one, Vector{0.0}, 1.0, 3, rng) == doctest::Approx(grae::grae(Vector{0.0}, one, Vector{0.0}, 1.0)));
}

TEST_CASE("Hadamard bound dominates the log-det and is tight for orthogonal columns") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const std::size_t d = 1 + i % 6, D = d + i % 4;
        const Matrix j = oracle::random_matrix(D, d, rng);
        const double beta = 0.05 + 0.01 * i;
        CHECK(hadamard_bound(j, beta) >= logdet_regularizer(j, beta) - 1e-12);
        double avg = 0.0;
        for (std::size_t c = 0; c < d; ++c) avg += column_estimate(j, beta, c);
        CHECK(std::abs(avg / static_cast<double>(d) - hadamard_bound(j, beta)) < 1e-12);
        const Matrix q = random_orthogonal(D, rng);
        Matrix jo(D, d);
        for (std::size_t c = 0; c < d; ++c)
            for (std::size_t r = 0; r < D; ++r) jo(r, c) = q(r, c) * (0.5 + static_cast<double>(c));
        CHECK(std::abs(hadamard_bound(jo, beta) - logdet_regularizer(jo, beta)) < 1e-10);
    }
}

TEST_CASE("jacobian_column_sqnorm matches the explicit Jacobian") {
    Rng rng(10);
    const MlpNetwork dec = oracle::random_net({3, 5, 4}, ActivationKind::tanh, ActivationKind::sigmoid, rng);
    const Vector z = oracle::random_vector(3, rng);
    const Matrix j = input_jacobian(dec, z);
    const Vector hd{-1.0, -2.0, -0.5, -3.0};
    const Matrix jw = weight_columns(j, hd);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(jacobian_column_sqnorm(dec, z, c) == doctest::Approx(squared_norm(j.col(c))).epsilon(1e-13));
        CHECK(jacobian_column_sqnorm(dec, z, c, hd) == doctest::Approx(squared_norm(jw.col(c))).epsilon(1e-13));
    }
}

TEST_CASE("taylor_gap examples and cross-check") {
    Rng rng(11);
    const Matrix j = oracle::random_matrix(5, 3, rng);
    const double beta = 0.3;
    const Matrix m = Matrix::identity(3) + (1.0 / beta) * matmul_tn(j, j);
    CHECK(std::abs(taylor_gap(j, invert_pd(m), beta)) < 1e-12);
    CHECK(taylor_gap(Matrix(5, 3), Matrix::identity(3), beta) == 0.0);

    const MlpNetwork dec = oracle::random_net({3, 6, 5}, ActivationKind::tanh, ActivationKind::identity, rng);
    const Vector h = oracle::random_vector(3, rng), x = oracle::random_vector(5, rng);
    for (int i = 0; i < 20; ++i) {
        const Matrix s = oracle::random_pd(3, rng, 0.1);
        const double gap = taylor_gap(input_jacobian(dec, h), s, beta);
        CHECK(gap >= 0.0);
        CHECK(std::abs(gap - (profiled_objective(h, dec, kGauss, x, beta) - taylor_objective(h, s, dec, kGauss, x, beta))) <
              1e-10);
    }
}

TEST_CASE("orthogonality_penalty") {
    Rng rng(12);
    CHECK(orthogonality_penalty(Matrix{{1, 0}, {0, 2}, {0, 0}}, rng, OrthogonalityMode::full) == 0.0);
    CHECK(orthogonality_penalty(Matrix{{1, 1, 0}, {2, 2, 0}, {0, 0, 1}}, rng, OrthogonalityMode::full) ==
          doctest::Approx(1.0));
    CHECK_THROWS(orthogonality_penalty(Matrix{{1, 0}, {1, 0}}, rng, OrthogonalityMode::full));
    const Matrix j = oracle::random_matrix(6, 4, rng);
    const double full = orthogonality_penalty(j, rng, OrthogonalityMode::full);
    double mean = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) mean += orthogonality_penalty(j, rng, OrthogonalityMode::sampled_pair);
    CHECK(mean / n == doctest::Approx(full).epsilon(0.02));
    double pairs = 0.0;
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b) {
            const double c = dot(j.col(a), j.col(b));
            pairs += c * c / (squared_norm(j.col(a)) * squared_norm(j.col(b)));
        }
    CHECK(std::abs(pairs - full) < 1e-12);
}

TEST_CASE("frobenius_reg") {
    CHECK(frobenius_reg(Matrix::identity(2), Vector{-1, -1}) == doctest::Approx(1.0));
    CHECK(frobenius_reg(Matrix(3, 2), Vector{-1, -1, -1}) == 0.0);
    Rng rng(13);
    const Matrix j = oracle::random_matrix(4, 3, rng);
    const Matrix jtj = matmul_tn(j, j);
    const double beta = 100.0 * svd_small(jtj).s[0];
    const double series = 0.5 * beta * logdet_regularizer(j, beta);
    const double frob = frobenius_reg(j, Vector(4, -1.0));
    CHECK(std::abs(series - frob) / frob < 0.01);
}

TEST_CASE("metric_residual examples") {
    Rng rng(14);
    const Matrix j = oracle::random_matrix(4, 3, rng);
    const double beta = 0.4;
    const Matrix jtj = matmul_tn(j, j);
    CHECK(metric_residual(j, invert_pd(Matrix::identity(3) + (1.0 / beta) * jtj), beta) < 1e-12);
    const double f = frobenius_norm(jtj);
    CHECK(metric_residual(j, Matrix::identity(3), beta) == doctest::Approx(f / (1.0 + f)).epsilon(1e-14));
}

TEST_CASE("off_block_mass") {
    CHECK(off_block_mass(Matrix{{1, 2, 0, 0}, {2, 1, 0, 0}, {0, 0, 3, 1}, {0, 0, 1, 3}}, 2) == 0.0);
    Matrix ones(4, 4, 1.0);
    CHECK(off_block_mass(ones, 2) == doctest::Approx(0.5));
    CHECK(off_block_mass(ones, 4) == 0.0);
    Rng rng(15);
    for (std::size_t b : {1u, 2u, 3u}) {
        const Matrix m = oracle::random_matrix(7, 7, rng);
        double in = 0.0, all = 0.0;
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t k = 0; k < 7; ++k) {
                const double v = m(i, k) * m(i, k);
                all += v;
                if (i / b == k / b) in += v;
            }
        CHECK(off_block_mass(m, b) == doctest::Approx((all - in) / all).epsilon(1e-13));
    }
}

TEST_CASE("smaller beta shrinks the Monte-Carlo / Taylor discrepancy") {
    Rng rng(16);
    const MlpNetwork dec = oracle::random_net({3, 8, 6}, ActivationKind::tanh, ActivationKind::identity, rng);
    double previous = INFINITY;
    for (double beta : {0.4, 0.1, 0.02}) {
        double disc = 0.0;
        for (int p = 0; p < 10; ++p) {
            const Vector h = oracle::random_vector(3, rng, 0.5);
            const Vector x = forward(dec, h).first + oracle::random_vector(6, rng, 0.1);
            const Matrix s = optimal_covariance(dec, kGauss, x, h, beta);
            const auto post = posterior(h, s);
            disc += std::abs(beta_vae_mc(post, dec, kGauss, x, beta, 10000, rng) - taylor_objective(h, s, dec, kGauss, x, beta));
        }
        CHECK(disc < previous);
        previous = disc;
    }
}

TEST_CASE("objective_report consistency") {
    Rng rng(17);
    const MlpNetwork dec = oracle::random_net({2, 5, 4}, ActivationKind::tanh, ActivationKind::identity, rng);
    const Vector x = oracle::random_vector(4, rng);
    const auto post = posterior(Vector{0.1, -0.3}, Matrix{{0.2, 0.05}, {0.05, 0.1}});
    ObjectiveConfig cfg;
    cfg.beta = 0.5;
    cfg.mc_samples = 64;
    const ObjectiveReport r = objective_report(post, dec, kGauss, x, cfg, rng);
    CHECK(std::abs(r.grae - r.profiled) < 1e-10);
    CHECK(std::abs((r.grae - r.taylor_jacobian_form) - r.gap) < 1e-8);
    const ObjectiveReport avg = average_reports(std::vector<ObjectiveReport>{r, r});
    CHECK(avg.dataset_average);
    CHECK(avg.gap == doctest::Approx(r.gap));
}
