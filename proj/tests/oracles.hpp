#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "grae/network.hpp"
#include "grae/numerics.hpp"

namespace oracle {

using grae::Matrix;
using grae::Rng;
using grae::Vector;

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (double& v : m.data()) v = n(rng);
    return m;
}

inline Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Vector v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

/// B B^T + shift I
inline Matrix random_pd(std::size_t n, Rng& rng, double shift = 0.5) {
    const Matrix b = random_matrix(n, n, rng);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b(i, k) * b(j, k);
            a(i, j) = s + (i == j ? shift : 0.0);
        }
    return a;
}

/// Central difference of a scalar function of a vector.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-5) {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Central-difference Jacobian (rows = outputs).
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, Vector x, double h = 1e-5) {
    Matrix j;
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double x0 = x[c];
        x[c] = x0 + h;
        const Vector fp = f(x);
        x[c] = x0 - h;
        const Vector fm = f(x);
        x[c] = x0;
        if (c == 0) j = Matrix(fp.size(), x.size());
        for (std::size_t r = 0; r < fp.size(); ++r) j(r, c) = (fp[r] - fm[r]) / (2.0 * h);
    }
    return j;
}

/// Straight-line re-evaluation of an MLP from its raw layer data.
inline Vector evaluate(const grae::MlpNetwork& net, const Vector& z) {
    Vector a = z;
    for (const auto& layer : net.layers()) {
        Vector next(layer.out_dim());
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            double s = layer.bias[i];
            for (std::size_t j = 0; j < layer.in_dim(); ++j) s += layer.weight(i, j) * a[j];
            switch (layer.activation) {
                case grae::ActivationKind::identity: break;
                case grae::ActivationKind::tanh: s = std::tanh(s); break;
                case grae::ActivationKind::sigmoid: s = 1.0 / (1.0 + std::exp(-s)); break;
                case grae::ActivationKind::elu: s = s > 0 ? s : std::expm1(s); break;
                case grae::ActivationKind::relu: s = s > 0 ? s : 0.0; break;
                case grae::ActivationKind::leaky_relu: s = s > 0 ? s : grae::kLeakyReluSlope * s; break;
            }
            next[i] = s;
        }
        a = std::move(next);
    }
    return a;
}

/// Smallest |pre-activation| over all layers at z.
inline double min_abs_preactivation(const grae::MlpNetwork& net, const Vector& z) {
    Vector a = z;
    double best = INFINITY;
    for (const auto& layer : net.layers()) {
        Vector next(layer.out_dim());
        for (std::size_t i = 0; i < layer.out_dim(); ++i) {
            double s = layer.bias[i];
            for (std::size_t j = 0; j < layer.in_dim(); ++j) s += layer.weight(i, j) * a[j];
            best = std::min(best, std::abs(s));
            next[i] = grae::activate(layer.activation, s);
        }
        a = std::move(next);
    }
    return best;
}

/// Random network with nonzero biases.
inline grae::MlpNetwork random_net(std::vector<std::size_t> dims, grae::ActivationKind hidden,
                                   grae::ActivationKind output, Rng& rng) {
    grae::MlpNetwork net = grae::MlpNetwork::random(dims, hidden, output, rng);
    std::normal_distribution<double> n(0.0, 0.3);
    for (std::size_t l = 0; l < net.depth(); ++l)
        for (double& b : net.layer(l).bias) b = n(rng);
    return net;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline double max_rel_err(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
    return m;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline Vector symmetric_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    Vector e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = a(i, i);
    return e;
}

/// Pearson correlation.
inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace oracle

namespace oracle {

/// Maximizes 1/2 tr(H S) - beta/2 (tr S - log|S|) over S = L L^T by gradient
/// ascent on L with backtracking. Returns S.
inline Matrix ascend_taylor_covariance(const Matrix& h, double beta, double tol = 1e-11) {
    const std::size_t d = h.rows();
    auto value = [&](const Matrix& l) {
        const Matrix s = grae::matmul_nt(l, l);
        double logdet = 0.0;
        for (std::size_t i = 0; i < d; ++i) logdet += 2.0 * std::log(std::abs(l(i, i)));
        return 0.5 * grae::trace(grae::matmul(h, s)) - 0.5 * beta * (grae::trace(s) - logdet);
    };
    Matrix l = Matrix::identity(d);
    double step = 0.1;
    for (int it = 0; it < 2000000; ++it) {
        const Matrix s = grae::matmul_nt(l, l);
        // dF/dS = H/2 - beta/2 (I - S^-1); dF/dL = 2 (dF/dS) L
        Matrix g = 0.5 * h - 0.5 * beta * (Matrix::identity(d) - grae::invert_pd(s));
        Matrix gl = 2.0 * grae::matmul(g, l);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) gl(i, j) = 0.0;
        if (grae::frobenius_norm(g) < tol) return s;
        const double f0 = value(l);
        for (;;) {
            Matrix cand = l + step * gl;
            bool ok = true;
            for (std::size_t i = 0; i < d; ++i) ok = ok && cand(i, i) > 0.0;
            if (ok && value(cand) >= f0) {
                l = cand;
                step *= 1.2;
                break;
            }
            step *= 0.5;
            if (step < 1e-20) return grae::matmul_nt(l, l);
        }
    }
    return grae::matmul_nt(l, l);
}

// Means of consecutive windows are non-increasing up to three combined standard errors.
inline bool windows_nonincreasing(std::span<const double> v, std::size_t window) {
    std::vector<double> mean, se;
    for (std::size_t s = 0; s + window <= v.size(); s += window) {
        double m = 0.0, q = 0.0;
        for (std::size_t i = s; i < s + window; ++i) m += v[i];
        m /= static_cast<double>(window);
        for (std::size_t i = s; i < s + window; ++i) q += (v[i] - m) * (v[i] - m);
        mean.push_back(m);
        se.push_back(std::sqrt(q / static_cast<double>(window - 1) / static_cast<double>(window)));
    }
    for (std::size_t i = 1; i < mean.size(); ++i)
        if (mean[i] > mean[i - 1] + 3.0 * std::hypot(se[i], se[i - 1]) + 1e-12) return false;
    return mean.size() >= 2 && mean.back() < mean.front();
}

// t statistic of the least-squares slope of v against its index.
inline double slope_t(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    double mx = (n - 1.0) / 2.0, my = 0.0;
    for (double y : v) my += y;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        sxx += (i - mx) * (i - mx);
        sxy += (i - mx) * (v[i] - my);
    }
    const double b = sxy / sxx;
    double sse = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) sse += std::pow(v[i] - my - b * (i - mx), 2);
    const double se = std::sqrt(sse / (n - 2.0) / sxx);
    return se > 0.0 ? b / se : (b > 0.0 ? INFINITY : 0.0);
}

}  // namespace oracle
