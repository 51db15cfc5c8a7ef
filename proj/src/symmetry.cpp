#include "grae/symmetry.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>

#include "grae/error.hpp"

namespace grae {

namespace {

constexpr double kCdfClamp = 1e-15;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

const boost::math::normal_distribution<double> kStdNormal;

// A probability held as the pair (p, 1 - p) so that both tails keep full precision.
struct Prob {
    double lower;
    double upper;
};

void check_prob(const Prob& p) {
    if (!(std::min(p.lower, p.upper) >= kCdfClamp)) {
        throw Error(ErrorCode::DomainError, "cdf value outside (0, 1) beyond clamp");
    }
}

Prob normal_prob(double x) {
    return {boost::math::cdf(kStdNormal, x), boost::math::cdf(boost::math::complement(kStdNormal, x))};
}

double normal_from_prob(const Prob& p) {
    check_prob(p);
    if (p.lower < 0.5) return boost::math::quantile(kStdNormal, p.lower);
    return boost::math::quantile(boost::math::complement(kStdNormal, p.upper));
}

Prob laplace_prob(double x, double b) {
    if (x < 0.0) {
        const double t = 0.5 * std::exp(x / b);
        return {t, 1.0 - t};
    }
    const double t = 0.5 * std::exp(-x / b);
    return {1.0 - t, t};
}

double laplace_from_prob(const Prob& p, double b) {
    check_prob(p);
    if (p.lower < 0.5) return b * std::log(2.0 * p.lower);
    return -b * std::log(2.0 * p.upper);
}

Vector to_gaussian(const MixingTransform& t, std::span<const double> z) {
    Vector w(z.size());
    switch (t.prior) {
        case PriorKind::standard_normal:
            for (std::size_t i = 0; i < z.size(); ++i) w[i] = normal_from_prob(normal_prob(z[i]));
            break;
        case PriorKind::laplace:
            for (std::size_t i = 0; i < z.size(); ++i) w[i] = normal_from_prob(laplace_prob(z[i], t.laplace_scale));
            break;
        case PriorKind::bivariate_gaussian: {
            const double s = std::sqrt(1.0 - t.rho * t.rho);
            w[0] = normal_from_prob(normal_prob(z[0]));
            w[1] = normal_from_prob(normal_prob((z[1] - t.rho * z[0]) / s));
            break;
        }
    }
    return w;
}

Vector from_gaussian(const MixingTransform& t, std::span<const double> w) {
    Vector z(w.size());
    switch (t.prior) {
        case PriorKind::standard_normal:
            for (std::size_t i = 0; i < w.size(); ++i) z[i] = normal_from_prob(normal_prob(w[i]));
            break;
        case PriorKind::laplace:
            for (std::size_t i = 0; i < w.size(); ++i) z[i] = laplace_from_prob(normal_prob(w[i]), t.laplace_scale);
            break;
        case PriorKind::bivariate_gaussian: {
            const double s = std::sqrt(1.0 - t.rho * t.rho);
            z[0] = normal_from_prob(normal_prob(w[0]));
            z[1] = t.rho * z[0] + s * normal_from_prob(normal_prob(w[1]));
            break;
        }
    }
    return z;
}

}  // namespace

MixingTransform make_mixing(PriorKind prior, Matrix u, double parameter) {
    if (!u.square()) throw Error(ErrorCode::DimensionMismatch, "mixing matrix must be square");
    if (max_abs_diff(matmul_tn(u, u), Matrix::identity(u.rows())) > 1e-10) {
        throw Error(ErrorCode::DomainError, "mixing matrix is not orthonormal");
    }
    MixingTransform t;
    t.prior = prior;
    t.u = std::move(u);
    if (prior == PriorKind::laplace) {
        t.laplace_scale = parameter > 0.0 ? parameter : 1.0;
    } else if (prior == PriorKind::bivariate_gaussian) {
        if (t.u.rows() != 2) throw Error(ErrorCode::DimensionMismatch, "correlated prior is bivariate");
        if (!(std::abs(parameter) < 1.0)) throw Error(ErrorCode::DomainError, "correlation must lie in (-1, 1)");
        t.rho = parameter;
    }
    return t;
}

double normal_cdf(double x) { return boost::math::cdf(kStdNormal, x); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::DomainError, "quantile argument outside (0, 1)");
    return boost::math::quantile(kStdNormal, p);
}

Vector apply_mixing(const MixingTransform& t, std::span<const double> z) {
    if (z.size() != t.u.rows()) throw Error(ErrorCode::DimensionMismatch, "apply_mixing");
    return from_gaussian(t, matvec(t.u, to_gaussian(t, z)));
}

double mixing_jacobian_absdet(const MixingTransform& t, std::span<const double> z, double step) {
    const std::size_t d = z.size();
    Matrix jac(d, d);
    Vector zp(z.begin(), z.end());
    for (std::size_t j = 0; j < d; ++j) {
        const double orig = zp[j];
        zp[j] = orig + step;
        const Vector fp = apply_mixing(t, zp);
        zp[j] = orig - step;
        const Vector fm = apply_mixing(t, zp);
        zp[j] = orig;
        for (std::size_t i = 0; i < d; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * step);
    }
    return std::abs(determinant(jac));
}

Vector sample_prior(const MixingTransform& t, Rng& rng) {
    const std::size_t d = t.u.rows();
    switch (t.prior) {
        case PriorKind::standard_normal:
            return standard_normal(rng, d);
        case PriorKind::laplace: {
            std::uniform_real_distribution<double> unif(-0.5, 0.5);
            Vector z(d);
            for (double& v : z) {
                const double u = unif(rng);
                v = -t.laplace_scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
            }
            return z;
        }
        case PriorKind::bivariate_gaussian: {
            Vector e = standard_normal(rng, 2);
            return {e[0], t.rho * e[0] + std::sqrt(1.0 - t.rho * t.rho) * e[1]};
        }
    }
    return {};
}

double prior_marginal_cdf(const MixingTransform& t, std::size_t i, double x) {
    if (i >= t.u.rows()) throw Error(ErrorCode::DimensionMismatch, "prior_marginal_cdf");
    if (t.prior == PriorKind::laplace) return laplace_prob(x, t.laplace_scale).lower;
    return normal_cdf(x);
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw Error(ErrorCode::DegenerateInput, "ks_test on empty sample");
    Vector sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    const double rn = std::sqrt(n);
    return {d, kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d)};
}

Matrix ppca_marginal(const PpcaModel& m) {
    Matrix c = matmul_nt(m.a, m.a);
    for (std::size_t i = 0; i < c.rows(); ++i) c(i, i) += m.sigma * m.sigma;
    return c;
}

PpcaPosterior ppca_posterior(const PpcaModel& m, std::span<const double> x) {
    if (x.size() != m.a.rows()) throw Error(ErrorCode::DimensionMismatch, "ppca_posterior");
    if (!(m.sigma > 0.0)) throw Error(ErrorCode::DomainError, "ppca sigma must be positive");
    const double s2 = m.sigma * m.sigma;
    Matrix precision = matmul_tn(m.a, m.a) * (1.0 / s2);
    for (std::size_t i = 0; i < precision.rows(); ++i) precision(i, i) += 1.0;
    PpcaPosterior post;
    post.cov = invert_pd(precision);
    post.mean = (1.0 / s2) * matvec(post.cov, matvec_t(m.a, x));
    return post;
}

Matrix AlignmentResult::signed_permutation() const {
    Matrix g(2, 2);
    for (std::size_t i = 0; i < 2; ++i) g(i, permutation[i]) = reflection[i];
    return g;
}

Matrix AlignmentResult::reconstruct() const { return matmul(rotation2d(angle), signed_permutation()); }

AlignmentResult procrustes_align(const Matrix& z, const Matrix& m) {
    if (z.rows() != 2 || m.rows() != 2 || z.cols() != m.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "procrustes_align expects two 2 x n matrices");
    }
    if (z.cols() < 2) throw Error(ErrorCode::DegenerateInput, "procrustes_align needs n >= 2");
    const SvdResult svd = svd_small(matmul_nt(z, m));
    if (!(svd.s[0] > 0.0) || svd.s[1] < 1e-10 * svd.s[0]) {
        throw Error(ErrorCode::DegenerateInput, "Z M^T is rank deficient");
    }
    AlignmentResult best;
    best.o = matmul_nt(svd.u, svd.v);
    const double det_o = determinant(best.o);
    bool found = false;
    for (std::size_t swap = 0; swap < 2; ++swap) {
        for (int s0 : {1, -1}) {
            for (int s1 : {1, -1}) {
                AlignmentResult cand = best;
                cand.permutation = {swap, 1 - swap};
                cand.reflection = {s0, s1};
                const Matrix g = cand.signed_permutation();
                if (determinant(g) * det_o < 0.0) continue;
                const Matrix r = matmul_nt(best.o, g);
                const double angle = std::atan2(r(1, 0), r(0, 0)) * kRadToDeg;
                if (angle > 45.0 + 1e-9 || angle < -45.0 - 1e-9) continue;
                cand.angle = std::clamp(angle, -45.0, 45.0);
                // At a +-45 tie two candidates qualify; the larger angle wins.
                if (!found || cand.angle > best.angle) {
                    best = cand;
                    found = true;
                }
            }
        }
    }
    if (!found) throw Error(ErrorCode::ConvergenceFailure, "no signed permutation matched the rotation");
    best.residual = frobenius_norm(z - matmul(best.o, m));
    return best;
}

}  // namespace grae
