#pragma once

// Standard-normal prior, structured Gaussian posteriors and pixel-independent
// observation models.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grae/numerics.hpp"

namespace grae {

enum class CovarianceKind { diagonal, block_diagonal, full };

/// Sparsity pattern of the posterior covariance. Blocks are contiguous; when
/// the block size does not divide d the final block holds the remainder.
struct CovarianceStructure {
    CovarianceKind kind = CovarianceKind::diagonal;
    std::size_t block = 1;

    static CovarianceStructure diagonal() { return {CovarianceKind::diagonal, 1}; }
    static CovarianceStructure block_diagonal(std::size_t b);
    static CovarianceStructure full() { return {CovarianceKind::full, 0}; }

    /// "diagonal", "block:<b>" or "full".
    static CovarianceStructure parse(std::string_view text);
    std::string to_string() const;

    std::size_t block_size(std::size_t d) const;
    /// (start, length) of every block.
    std::vector<std::pair<std::size_t, std::size_t>> blocks(std::size_t d) const;
    bool same_block(std::size_t i, std::size_t j, std::size_t d) const;
    /// Number of free lower-triangular factor entries.
    std::size_t raw_size(std::size_t d) const;

    bool operator==(const CovarianceStructure&) const = default;
};

/// Raw entries are laid out block by block, row-major over each block's lower
/// triangle. Diagonal entries pass through exp (floored at 1e-6), in-block
/// off-diagonals are copied, everything else is zero.
CholeskyFactor assemble_covariance(std::span<const double> raw, const CovarianceStructure& structure,
                                   std::size_t d);

/// (row, col) of every raw entry inside the factor, in raw order.
std::vector<std::pair<std::size_t, std::size_t>> factor_positions(const CovarianceStructure& structure,
                                                                  std::size_t d);

/// Chain rule through assemble_covariance: maps dLoss/dFactor to dLoss/dRaw.
Vector assemble_covariance_backward(std::span<const double> raw, const CovarianceStructure& structure,
                                    std::size_t d, const Matrix& factor_grad);

inline constexpr double kFactorDiagonalFloor = 1e-6;

struct GaussianPosterior {
    Vector mean;
    CholeskyFactor factor;

    std::size_t dim() const noexcept { return mean.size(); }
    Matrix covariance() const { return factor.reconstruct(); }
};

/// KL(N(mu, sigma) || N(0, I)).
double kl_std_normal(std::span<const double> mu, const Matrix& sigma);

/// Reparameterized draws mu + C * eps.
std::vector<Vector> sample(const GaussianPosterior& post, std::size_t n, Rng& rng);

enum class ObservationKind { gaussian_unit, bernoulli };

std::string_view to_string(ObservationKind kind);
ObservationKind parse_observation(std::string_view name);

struct ObservationModel {
    ObservationKind kind = ObservationKind::gaussian_unit;
    double clamp = 1e-6;  ///< Bernoulli probabilities are clamped to [clamp, 1 - clamp]

    bool operator==(const ObservationModel&) const = default;
};

double obs_loglik(const ObservationModel& m, std::span<const double> x, std::span<const double> g);
/// Gradient of the log-likelihood with respect to g.
Vector obs_grad(const ObservationModel& m, std::span<const double> x, std::span<const double> g);
/// Diagonal of the Hessian with respect to g. Every entry is <= 0.
Vector obs_hessian_diag(const ObservationModel& m, std::span<const double> x, std::span<const double> g);

}  // namespace grae
