#pragma once

// Beta-VAE objective and its deterministic approximations.
//
// Sign convention: beta_vae_mc, taylor_objective and profiled_objective are
// maximization objectives. grae and grae_approx return minimization values.
// ObjectiveReport stores everything in the maximization convention, with the
// GRAE values negated and shifted by the Gaussian normalizer.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "grae/network.hpp"
#include "grae/numerics.hpp"
#include "grae/probmodel.hpp"

namespace grae {

enum class HessianMode { jacobian_form, finite_difference };

struct ObjectiveConfig {
    double beta = 1.0;
    std::size_t mc_samples = 64;
    HessianMode hessian_mode = HessianMode::jacobian_form;
    std::size_t k = 1;  ///< sampled Jacobian columns for grae_approx
    std::uint64_t seed = 0;
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// (1/n) sum_i log p(x | g(z_i)) - beta * KL(q || N(0, I)), z_i = mu + C eps_i.
McEstimate beta_vae_mc_estimate(const GaussianPosterior& post, const MlpNetwork& decoder,
                                const ObservationModel& obs, std::span<const double> x, double beta,
                                std::size_t n, Rng& rng);
double beta_vae_mc(const GaussianPosterior& post, const MlpNetwork& decoder, const ObservationModel& obs,
                   std::span<const double> x, double beta, std::size_t n, Rng& rng);

/// Hessian of f_x(z) = log p(x | g(z)). jacobian_form drops the second
/// derivative of g; finite_difference differentiates the exact gradient.
Matrix hessian_fx(const MlpNetwork& decoder, const ObservationModel& obs, std::span<const double> x,
                  std::span<const double> z, HessianMode mode);

double taylor_objective(std::span<const double> mean, const Matrix& sigma, const MlpNetwork& decoder,
                        const ObservationModel& obs, std::span<const double> x, double beta,
                        HessianMode mode = HessianMode::jacobian_form);

/// (I - H_fx(z) / beta)^-1
Matrix optimal_covariance(const MlpNetwork& decoder, const ObservationModel& obs, std::span<const double> x,
                          std::span<const double> z, double beta, HessianMode mode = HessianMode::jacobian_form);

/// Taylor objective maximized over the covariance in closed form.
double profiled_objective(std::span<const double> mean, const MlpNetwork& decoder, const ObservationModel& obs,
                          std::span<const double> x, double beta, HessianMode mode = HessianMode::jacobian_form);

/// 1/2 ||x - g(h)||^2 + beta/2 ||h||^2 + beta/2 log|I + J^T J / beta|, h = h(x).
double grae(std::span<const double> h, const MlpNetwork& decoder, std::span<const double> x, double beta);

/// GRAE with the log-det replaced by the Hadamard bound, estimated from k
/// uniformly sampled Jacobian columns computed by JVPs.
double grae_approx(std::span<const double> h, const MlpNetwork& decoder, std::span<const double> x, double beta,
                   std::size_t k, Rng& rng);

/// log|I + J^T J / beta|
double logdet_regularizer(const Matrix& jac, double beta);
/// sum_c log(1 + ||J_c||^2 / beta), an upper bound on logdet_regularizer.
double hadamard_bound(const Matrix& jac, double beta);
/// Importance-weighted single-column estimate of hadamard_bound under uniform
/// p_c: d * log(1 + ||J_c||^2 / beta).
double column_estimate(const Matrix& jac, double beta, std::size_t c);
/// diag(-h)^{1/2} J, the weighting used for non-Gaussian observation models.
Matrix weight_columns(const Matrix& jac, std::span<const double> hessian_diag);
/// Squared norm of column c of the (optionally weighted) decoder Jacobian at
/// z, computed with a single JVP.
double jacobian_column_sqnorm(const MlpNetwork& decoder, std::span<const double> z, std::size_t c,
                              std::span<const double> hessian_diag = {});

/// beta/2 [tr(M S) - log|M S| - d], M = I + J^T J / beta.
double taylor_gap(const Matrix& jac, const Matrix& sigma, double beta);

enum class OrthogonalityMode { full, sampled_pair };

/// Sum over column pairs of squared cosine similarity.
double orthogonality_penalty(const Matrix& jac, Rng& rng, OrthogonalityMode mode);

/// 1/2 tr(J^T diag(-h) J)
double frobenius_reg(const Matrix& jac, std::span<const double> hessian_diag);

/// ||J^T J - beta (S^-1 - I)||_F / (1 + ||J^T J||_F)
double metric_residual(const Matrix& jac, const Matrix& sigma, double beta);

/// Share of squared mass outside the b x b diagonal blocks.
double off_block_mass(const Matrix& m, std::size_t b);

struct ObjectiveReport {
    double beta_vae_mc = 0.0;
    double taylor_hessian = 0.0;        ///< Taylor objective, finite-difference Hessian
    double taylor_jacobian_form = 0.0;  ///< Taylor objective, J^T H J Hessian
    double profiled = 0.0;
    double grae = 0.0;         ///< -grae - D/2 log 2pi
    double grae_approx = 0.0;  ///< -grae_approx - D/2 log 2pi
    double gap = 0.0;
    bool dataset_average = false;
};

/// All objectives for one example with posterior `post`. GRAE columns apply to
/// gaussian_unit observations; for other models they hold the profiled value.
ObjectiveReport objective_report(const GaussianPosterior& post, const MlpNetwork& decoder,
                                 const ObservationModel& obs, std::span<const double> x,
                                 const ObjectiveConfig& config, Rng& rng);

ObjectiveReport average_reports(std::span<const ObjectiveReport> reports);

}  // namespace grae
