#include "grae/probmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "grae/error.hpp"

namespace grae {

CovarianceStructure CovarianceStructure::block_diagonal(std::size_t b) {
    if (b == 0) throw Error(ErrorCode::ConfigError, "block size must be >= 1");
    return {CovarianceKind::block_diagonal, b};
}

CovarianceStructure CovarianceStructure::parse(std::string_view text) {
    if (text == "diagonal") return diagonal();
    if (text == "full") return full();
    if (text.starts_with("block:")) {
        std::size_t b = 0;
        const auto digits = text.substr(6);
        auto res = std::from_chars(digits.data(), digits.data() + digits.size(), b);
        if (res.ec == std::errc() && res.ptr == digits.data() + digits.size() && b > 0) return block_diagonal(b);
    }
    throw Error(ErrorCode::ConfigError, "posterior.structure must be diagonal|block:<b>|full, got '" +
                                            std::string(text) + "'");
}

std::string CovarianceStructure::to_string() const {
    switch (kind) {
        case CovarianceKind::diagonal: return "diagonal";
        case CovarianceKind::full: return "full";
        case CovarianceKind::block_diagonal: return "block:" + std::to_string(block);
    }
    return "diagonal";
}

std::size_t CovarianceStructure::block_size(std::size_t d) const {
    switch (kind) {
        case CovarianceKind::diagonal: return 1;
        case CovarianceKind::full: return std::max<std::size_t>(d, 1);
        case CovarianceKind::block_diagonal: return std::min(std::max<std::size_t>(block, 1), std::max<std::size_t>(d, 1));
    }
    return 1;
}

std::vector<std::pair<std::size_t, std::size_t>> CovarianceStructure::blocks(std::size_t d) const {
    const std::size_t b = block_size(d);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t start = 0; start < d; start += b) out.emplace_back(start, std::min(b, d - start));
    return out;
}

bool CovarianceStructure::same_block(std::size_t i, std::size_t j, std::size_t d) const {
    const std::size_t b = block_size(d);
    return i / b == j / b;
}

std::size_t CovarianceStructure::raw_size(std::size_t d) const {
    std::size_t n = 0;
    for (auto [start, len] : blocks(d)) n += len * (len + 1) / 2;
    return n;
}

std::vector<std::pair<std::size_t, std::size_t>> factor_positions(const CovarianceStructure& structure,
                                                                  std::size_t d) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(structure.raw_size(d));
    for (auto [start, len] : structure.blocks(d)) {
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = 0; j <= i; ++j) out.emplace_back(start + i, start + j);
    }
    return out;
}

CholeskyFactor assemble_covariance(std::span<const double> raw, const CovarianceStructure& structure,
                                   std::size_t d) {
    if (raw.size() != structure.raw_size(d)) {
        throw Error(ErrorCode::LengthMismatch, "assemble_covariance: expected " +
                                                   std::to_string(structure.raw_size(d)) + " raw entries, got " +
                                                   std::to_string(raw.size()));
    }
    Matrix l(d, d);
    const auto pos = factor_positions(structure, d);
    for (std::size_t k = 0; k < pos.size(); ++k) {
        const auto [i, j] = pos[k];
        l(i, j) = (i == j) ? std::max(std::exp(raw[k]), kFactorDiagonalFloor) : raw[k];
    }
    return CholeskyFactor{std::move(l)};
}

Vector assemble_covariance_backward(std::span<const double> raw, const CovarianceStructure& structure,
                                    std::size_t d, const Matrix& factor_grad) {
    if (raw.size() != structure.raw_size(d)) throw Error(ErrorCode::LengthMismatch, "assemble_covariance_backward");
    if (factor_grad.rows() != d || factor_grad.cols() != d) {
        throw Error(ErrorCode::DimensionMismatch, "assemble_covariance_backward: factor gradient shape");
    }
    Vector out(raw.size());
    const auto pos = factor_positions(structure, d);
    for (std::size_t k = 0; k < pos.size(); ++k) {
        const auto [i, j] = pos[k];
        const double gl = factor_grad(i, j);
        if (i == j) {
            const double e = std::exp(raw[k]);
            out[k] = e > kFactorDiagonalFloor ? gl * e : 0.0;
        } else {
            out[k] = gl;
        }
    }
    return out;
}

double kl_std_normal(std::span<const double> mu, const Matrix& sigma) {
    if (!sigma.square() || sigma.rows() != mu.size()) throw Error(ErrorCode::DimensionMismatch, "kl_std_normal");
    const double d = static_cast<double>(mu.size());
    const double kl = 0.5 * (squared_norm(mu) + trace(sigma) - log_det_pd(sigma) - d);
    return std::max(kl, 0.0);
}

std::vector<Vector> sample(const GaussianPosterior& post, std::size_t n, Rng& rng) {
    const std::size_t d = post.dim();
    if (post.factor.dim() != d) throw Error(ErrorCode::DimensionMismatch, "sample: factor/mean dims");
    std::vector<Vector> out;
    out.reserve(n);
    Vector eps(d);
    for (std::size_t s = 0; s < n; ++s) {
        fill_standard_normal(rng, eps);
        Vector z = post.mean;
        axpy(1.0, matvec(post.factor.lower, eps), z);
        out.push_back(std::move(z));
    }
    return out;
}

std::string_view to_string(ObservationKind kind) {
    return kind == ObservationKind::bernoulli ? "bernoulli" : "gaussian_unit";
}

ObservationKind parse_observation(std::string_view name) {
    if (name == "gaussian_unit" || name == "gaussian") return ObservationKind::gaussian_unit;
    if (name == "bernoulli") return ObservationKind::bernoulli;
    throw Error(ErrorCode::ConfigError, "unknown observation model '" + std::string(name) + "'");
}

namespace {

void check_obs(const ObservationModel& m, std::span<const double> x, std::span<const double> g) {
    if (x.size() != g.size()) throw Error(ErrorCode::DimensionMismatch, "observation: x and g lengths differ");
    if (m.kind == ObservationKind::bernoulli) {
        for (double xi : x) {
            if (xi != 0.0 && xi != 1.0) throw Error(ErrorCode::DomainError, "bernoulli observation outside {0,1}");
        }
    }
}

double clamp_prob(const ObservationModel& m, double g) { return std::clamp(g, m.clamp, 1.0 - m.clamp); }

}  // namespace

double obs_loglik(const ObservationModel& m, std::span<const double> x, std::span<const double> g) {
    check_obs(m, x, g);
    double s = 0.0;
    if (m.kind == ObservationKind::gaussian_unit) {
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - g[i]) * (x[i] - g[i]);
        return -0.5 * s - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = clamp_prob(m, g[i]);
        s += x[i] == 1.0 ? std::log(p) : std::log1p(-p);
    }
    return s;
}

Vector obs_grad(const ObservationModel& m, std::span<const double> x, std::span<const double> g) {
    check_obs(m, x, g);
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (m.kind == ObservationKind::gaussian_unit) {
            out[i] = x[i] - g[i];
        } else {
            const double p = clamp_prob(m, g[i]);
            out[i] = x[i] / p - (1.0 - x[i]) / (1.0 - p);
        }
    }
    return out;
}

Vector obs_hessian_diag(const ObservationModel& m, std::span<const double> x, std::span<const double> g) {
    check_obs(m, x, g);
    Vector out(x.size(), -1.0);
    if (m.kind == ObservationKind::bernoulli) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = 1.0 - x[i] - clamp_prob(m, g[i]);
            out[i] = -1.0 / (r * r);
        }
    }
    return out;
}

}  // namespace grae
