#include "grae/objectives.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "grae/error.hpp"

namespace grae {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Gradient of f_x(z) = log p(x | g(z)) with respect to z.
Vector loglik_gradient(const MlpNetwork& decoder, const ObservationModel& obs, std::span<const double> x,
                       std::span<const double> z) {
    auto [g, trace] = forward(decoder, z);
    return backward(decoder, trace, obs_grad(obs, x, g)).second;
}

double decoded_loglik(const MlpNetwork& decoder, const ObservationModel& obs, std::span<const double> x,
                      std::span<const double> z) {
    return obs_loglik(obs, x, forward(decoder, z).first);
}

Matrix gram(const Matrix& jac) { return matmul_tn(jac, jac); }

Matrix identity_plus(const Matrix& a, double scale) {
    Matrix m = a * scale;
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += 1.0;
    return m;
}

// beta/2 [tr(M S) - log|M| - log|S| - d]
double gap_from_precision(const Matrix& m, const Matrix& sigma, double beta) {
    if (!sigma.square() || sigma.rows() != m.rows()) throw Error(ErrorCode::DimensionMismatch, "taylor_gap");
    const double d = static_cast<double>(m.rows());
    const double tr = trace(matmul(m, sigma));
    return 0.5 * beta * (tr - log_det_pd(m) - log_det_pd(sigma) - d);
}

void require_beta(double beta) {
    if (!(beta > 0.0)) throw Error(ErrorCode::DomainError, "beta must be positive");
}

}  // namespace

McEstimate beta_vae_mc_estimate(const GaussianPosterior& post, const MlpNetwork& decoder,
                                const ObservationModel& obs, std::span<const double> x, double beta,
                                std::size_t n, Rng& rng) {
    if (n == 0) throw Error(ErrorCode::DomainError, "beta_vae_mc: n must be >= 1");
    const auto draws = sample(post, n, rng);
    Matrix z(n, post.dim());
    for (std::size_t i = 0; i < n; ++i) std::copy(draws[i].begin(), draws[i].end(), z.row(i).begin());
    const Matrix g = forward_batch(decoder, z).output;
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ll = obs_loglik(obs, x, g.row(i));
        const double delta = ll - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (ll - mean);
    }
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    const double kl = kl_std_normal(post.mean, post.covariance());
    return {mean - beta * kl, std::sqrt(var / static_cast<double>(n))};
}

double beta_vae_mc(const GaussianPosterior& post, const MlpNetwork& decoder, const ObservationModel& obs,
                   std::span<const double> x, double beta, std::size_t n, Rng& rng) {
    return beta_vae_mc_estimate(post, decoder, obs, x, beta, n, rng).value;
}

Matrix hessian_fx(const MlpNetwork& decoder, const ObservationModel& obs, std::span<const double> x,
                  std::span<const double> z, HessianMode mode) {
    if (z.size() != decoder.in_dim() || x.size() != decoder.out_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "hessian_fx");
    }
    const std::size_t d = z.size();
    if (mode == HessianMode::jacobian_form) {
        const Matrix jac = input_jacobian(decoder, z);
        const Vector h = obs_hessian_diag(obs, x, forward(decoder, z).first);
        Matrix weighted = jac;
        for (std::size_t r = 0; r < weighted.rows(); ++r)
            for (double& v : weighted.row(r)) v *= h[r];
        return matmul_tn(jac, weighted);
    }
    constexpr double kStep = 1e-5;
    Matrix hess(d, d);
    Vector zp(z.begin(), z.end());
    for (std::size_t j = 0; j < d; ++j) {
        const double orig = zp[j];
        zp[j] = orig + kStep;
        const Vector gp = loglik_gradient(decoder, obs, x, zp);
        zp[j] = orig - kStep;
        const Vector gm = loglik_gradient(decoder, obs, x, zp);
        zp[j] = orig;
        for (std::size_t i = 0; i < d; ++i) hess(i, j) = (gp[i] - gm[i]) / (2.0 * kStep);
    }
    return symmetrize(hess);
}

double taylor_objective(std::span<const double> mean, const Matrix& sigma, const MlpNetwork& decoder,
                        const ObservationModel& obs, std::span<const double> x, double beta, HessianMode mode) {
    const Matrix hess = hessian_fx(decoder, obs, x, mean, mode);
    const double curvature = 0.5 * trace(matmul(hess, sigma));
    return decoded_loglik(decoder, obs, x, mean) + curvature - beta * kl_std_normal(mean, sigma);
}

Matrix optimal_covariance(const MlpNetwork& decoder, const ObservationModel& obs, std::span<const double> x,
                          std::span<const double> z, double beta, HessianMode mode) {
    require_beta(beta);
    const Matrix precision = identity_plus(hessian_fx(decoder, obs, x, z, mode), -1.0 / beta);
    return invert_pd(precision);
}

double profiled_objective(std::span<const double> mean, const MlpNetwork& decoder, const ObservationModel& obs,
                          std::span<const double> x, double beta, HessianMode mode) {
    require_beta(beta);
    const Matrix precision = identity_plus(hessian_fx(decoder, obs, x, mean, mode), -1.0 / beta);
    return decoded_loglik(decoder, obs, x, mean) - 0.5 * beta * squared_norm(mean) -
           0.5 * beta * log_det_pd(precision);
}

double grae(std::span<const double> h, const MlpNetwork& decoder, std::span<const double> x, double beta) {
    require_beta(beta);
    const Vector g = forward(decoder, h).first;
    if (g.size() != x.size()) throw Error(ErrorCode::DimensionMismatch, "grae: x length");
    const double recon = 0.5 * squared_norm(Vector(x.begin(), x.end()) - g);
    return recon + 0.5 * beta * squared_norm(h) + 0.5 * beta * logdet_regularizer(input_jacobian(decoder, h), beta);
}

double grae_approx(std::span<const double> h, const MlpNetwork& decoder, std::span<const double> x, double beta,
                   std::size_t k, Rng& rng) {
    require_beta(beta);
    if (k == 0) throw Error(ErrorCode::DomainError, "grae_approx: k must be >= 1");
    const Vector g = forward(decoder, h).first;
    if (g.size() != x.size()) throw Error(ErrorCode::DimensionMismatch, "grae_approx: x length");
    const std::size_t d = h.size();
    std::uniform_int_distribution<std::size_t> pick(0, d - 1);
    double estimate = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double sq = jacobian_column_sqnorm(decoder, h, pick(rng));
        estimate += static_cast<double>(d) * std::log1p(sq / beta);
    }
    estimate /= static_cast<double>(k);
    return 0.5 * squared_norm(Vector(x.begin(), x.end()) - g) + 0.5 * beta * squared_norm(h) + 0.5 * beta * estimate;
}

double logdet_regularizer(const Matrix& jac, double beta) {
    require_beta(beta);
    return log_det_pd(identity_plus(gram(jac), 1.0 / beta));
}

double hadamard_bound(const Matrix& jac, double beta) {
    require_beta(beta);
    double s = 0.0;
    for (std::size_t c = 0; c < jac.cols(); ++c) s += std::log1p(squared_norm(jac.col(c)) / beta);
    return s;
}

double column_estimate(const Matrix& jac, double beta, std::size_t c) {
    require_beta(beta);
    if (c >= jac.cols()) throw Error(ErrorCode::DimensionMismatch, "column_estimate: column index");
    return static_cast<double>(jac.cols()) * std::log1p(squared_norm(jac.col(c)) / beta);
}

Matrix weight_columns(const Matrix& jac, std::span<const double> hessian_diag) {
    if (hessian_diag.size() != jac.rows()) throw Error(ErrorCode::DimensionMismatch, "weight_columns");
    Matrix out = jac;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const double w = std::sqrt(std::max(0.0, -hessian_diag[r]));
        for (double& v : out.row(r)) v *= w;
    }
    return out;
}

double jacobian_column_sqnorm(const MlpNetwork& decoder, std::span<const double> z, std::size_t c,
                              std::span<const double> hessian_diag) {
    if (c >= z.size()) throw Error(ErrorCode::DimensionMismatch, "jacobian_column_sqnorm: column index");
    Vector e(z.size(), 0.0);
    e[c] = 1.0;
    Vector col = jvp(decoder, z, e).first;
    if (!hessian_diag.empty()) {
        if (hessian_diag.size() != col.size()) throw Error(ErrorCode::DimensionMismatch, "jacobian_column_sqnorm");
        for (std::size_t i = 0; i < col.size(); ++i) col[i] *= std::sqrt(std::max(0.0, -hessian_diag[i]));
    }
    return squared_norm(col);
}

double taylor_gap(const Matrix& jac, const Matrix& sigma, double beta) {
    require_beta(beta);
    return gap_from_precision(identity_plus(gram(jac), 1.0 / beta), sigma, beta);
}

double orthogonality_penalty(const Matrix& jac, Rng& rng, OrthogonalityMode mode) {
    const std::size_t d = jac.cols();
    if (d < 2) throw Error(ErrorCode::DimensionMismatch, "orthogonality_penalty needs >= 2 columns");
    std::vector<Vector> cols;
    Vector sq(d);
    for (std::size_t c = 0; c < d; ++c) {
        cols.push_back(jac.col(c));
        sq[c] = squared_norm(cols.back());
        if (!(sq[c] > 0.0)) throw Error(ErrorCode::ZeroColumn, "column " + std::to_string(c) + " is zero");
    }
    auto cos2 = [&](std::size_t i, std::size_t j) {
        const double ip = dot(cols[i], cols[j]);
        return ip * ip / (sq[i] * sq[j]);
    };
    if (mode == OrthogonalityMode::full) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) s += cos2(i, j);
        return s;
    }
    const std::size_t pairs = d * (d - 1) / 2;
    std::uniform_int_distribution<std::size_t> pick(0, pairs - 1);
    std::size_t idx = pick(rng);
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t row_len = d - i - 1;
        if (idx < row_len) return static_cast<double>(pairs) * cos2(i, i + 1 + idx);
        idx -= row_len;
    }
    return 0.0;
}

double frobenius_reg(const Matrix& jac, std::span<const double> hessian_diag) {
    if (hessian_diag.size() != jac.rows()) throw Error(ErrorCode::DimensionMismatch, "frobenius_reg");
    double s = 0.0;
    for (std::size_t r = 0; r < jac.rows(); ++r) s += -hessian_diag[r] * squared_norm(jac.row(r));
    return 0.5 * s;
}

double metric_residual(const Matrix& jac, const Matrix& sigma, double beta) {
    require_beta(beta);
    const Matrix g = gram(jac);
    if (!sigma.square() || sigma.rows() != g.rows()) throw Error(ErrorCode::DimensionMismatch, "metric_residual");
    Matrix implied = invert_pd(sigma);
    for (std::size_t i = 0; i < implied.rows(); ++i) implied(i, i) -= 1.0;
    implied *= beta;
    return frobenius_norm(g - implied) / (1.0 + frobenius_norm(g));
}

double off_block_mass(const Matrix& m, std::size_t b) {
    if (!m.square()) throw Error(ErrorCode::DimensionMismatch, "off_block_mass: matrix is not square");
    if (b == 0) throw Error(ErrorCode::DomainError, "off_block_mass: block size must be >= 1");
    double outside = 0.0, total = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double v = m(i, j) * m(i, j);
            total += v;
            if (i / b != j / b) outside += v;
        }
    }
    return total > 0.0 ? outside / total : 0.0;
}

ObjectiveReport objective_report(const GaussianPosterior& post, const MlpNetwork& decoder,
                                 const ObservationModel& obs, std::span<const double> x,
                                 const ObjectiveConfig& config, Rng& rng) {
    const double beta = config.beta;
    const Matrix sigma = post.covariance();
    const double offset = 0.5 * static_cast<double>(x.size()) * kLog2Pi;
    ObjectiveReport r;
    r.beta_vae_mc = beta_vae_mc(post, decoder, obs, x, beta, config.mc_samples, rng);
    r.taylor_hessian = taylor_objective(post.mean, sigma, decoder, obs, x, beta, HessianMode::finite_difference);
    r.taylor_jacobian_form = taylor_objective(post.mean, sigma, decoder, obs, x, beta, HessianMode::jacobian_form);
    r.profiled = profiled_objective(post.mean, decoder, obs, x, beta, HessianMode::jacobian_form);
    if (obs.kind == ObservationKind::gaussian_unit) {
        r.grae = -grae(post.mean, decoder, x, beta) - offset;
        r.grae_approx = -grae_approx(post.mean, decoder, x, beta, config.k, rng) - offset;
        r.gap = taylor_gap(input_jacobian(decoder, post.mean), sigma, beta);
    } else {
        r.grae = r.profiled;
        r.grae_approx = r.profiled;
        const Matrix precision =
            identity_plus(hessian_fx(decoder, obs, x, post.mean, HessianMode::jacobian_form), -1.0 / beta);
        r.gap = gap_from_precision(precision, sigma, beta);
    }
    return r;
}

ObjectiveReport average_reports(std::span<const ObjectiveReport> reports) {
    ObjectiveReport avg;
    avg.dataset_average = true;
    if (reports.empty()) return avg;
    for (const auto& r : reports) {
        avg.beta_vae_mc += r.beta_vae_mc;
        avg.taylor_hessian += r.taylor_hessian;
        avg.taylor_jacobian_form += r.taylor_jacobian_form;
        avg.profiled += r.profiled;
        avg.grae += r.grae;
        avg.grae_approx += r.grae_approx;
        avg.gap += r.gap;
    }
    const double n = static_cast<double>(reports.size());
    avg.beta_vae_mc /= n;
    avg.taylor_hessian /= n;
    avg.taylor_jacobian_form /= n;
    avg.profiled /= n;
    avg.grae /= n;
    avg.grae_approx /= n;
    avg.gap /= n;
    return avg;
}

}  // namespace grae
