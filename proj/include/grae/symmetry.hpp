#pragma once

// Prior-preserving latent mixings, PPCA analytics and Procrustes alignment.

#include <array>
#include <cstddef>
#include <functional>
#include <span>

#include "grae/numerics.hpp"

namespace grae {

enum class PriorKind { standard_normal, laplace, bivariate_gaussian };

/// r = F^-1 . psi . U . psi^-1 . F. For the bivariate Gaussian prior F is the
/// chain of conditional cdfs (x1, then x2 | x1).
struct MixingTransform {
    PriorKind prior = PriorKind::standard_normal;
    double laplace_scale = 1.0;
    double rho = 0.0;
    Matrix u;
};

MixingTransform make_mixing(PriorKind prior, Matrix u, double parameter = 0.0);

double normal_cdf(double x);
double normal_quantile(double p);

Vector apply_mixing(const MixingTransform& t, std::span<const double> z);
/// |det J_r(z)| by central finite differences.
double mixing_jacobian_absdet(const MixingTransform& t, std::span<const double> z, double step = 1e-5);

Vector sample_prior(const MixingTransform& t, Rng& rng);
/// Marginal cdf of coordinate i under the transform's prior.
double prior_marginal_cdf(const MixingTransform& t, std::size_t i, double x);

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};
KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);
double kolmogorov_survival(double lambda);

struct PpcaModel {
    Matrix a;  ///< D x d
    double sigma = 1.0;
};

struct PpcaPosterior {
    Vector mean;
    Matrix cov;
};

/// A A^T + sigma^2 I
Matrix ppca_marginal(const PpcaModel& m);
PpcaPosterior ppca_posterior(const PpcaModel& m, std::span<const double> x);

struct AlignmentResult {
    Matrix o;                        ///< Z ~ O M
    std::array<std::size_t, 2> permutation{0, 1};
    std::array<int, 2> reflection{1, 1};
    double angle = 0.0;              ///< degrees in (-45, 45]
    double residual = 0.0;           ///< ||Z - O M||_F

    /// R(angle) G with G(i, permutation[i]) = reflection[i].
    Matrix signed_permutation() const;
    Matrix reconstruct() const;
};

/// Z, M are 2 x n.
AlignmentResult procrustes_align(const Matrix& z, const Matrix& m);

}  // namespace grae
