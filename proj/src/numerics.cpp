#include "grae/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

#include "grae/error.hpp"

namespace grae {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

void require_square(const Matrix& a, const char* op) {
    if (!a.square()) {
        throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": matrix is not square");
    }
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw Error(ErrorCode::DimensionMismatch, "ragged matrix literal");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::column(std::span<const double> v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

Vector Matrix::col(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "matmul_tn: row counts differ");
    Matrix c(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.row(k).data();
        const double* bk = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.row(i).data();
            for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw Error(ErrorCode::DimensionMismatch, "matmul_nt: column counts differ");
    Matrix c(a.rows(), b.rows());
    const std::size_t k = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j).data();
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
            c(i, j) = s;
        }
    }
    return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw Error(ErrorCode::DimensionMismatch, "matvec");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

Vector matvec_t(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw Error(ErrorCode::DimensionMismatch, "matvec_t");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) axpy(x[i], a.row(i), y);
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }
double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

void axpy(double s, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

Vector operator+(const Vector& a, const Vector& b) {
    Vector out = a;
    axpy(1.0, b, out);
    return out;
}

Vector operator-(const Vector& a, const Vector& b) {
    Vector out = a;
    axpy(-1.0, b, out);
    return out;
}

Vector operator*(double s, const Vector& a) {
    Vector out = a;
    for (double& x : out) x *= s;
    return out;
}

double trace(const Matrix& a) {
    require_square(a, "trace");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

double frobenius_norm(const Matrix& a) { return norm(a.data()); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Matrix symmetrize(const Matrix& a) {
    require_square(a, "symmetrize");
    Matrix s(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

double asymmetry(const Matrix& a) {
    require_square(a, "asymmetry");
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) m = std::max(m, std::abs(a(i, j) - a(j, i)));
    return m;
}

Matrix CholeskyFactor::reconstruct() const { return matmul_nt(lower, lower); }

double CholeskyFactor::log_det() const {
    double s = 0.0;
    for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
    return 2.0 * s;
}

CholeskyFactor cholesky(const Matrix& a) {
    require_square(a, "cholesky");
    const std::size_t n = a.rows();
    double scale = 1.0;
    for (double x : a.data()) scale = std::max(scale, std::abs(x));
    if (asymmetry(a) > 1e-12 * scale) {
        throw Error(ErrorCode::DomainError, "cholesky: input is not symmetric");
    }
    const double tol = 1e-12 * trace(a);
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = a(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (!(pivot > tol) || !(pivot > 0.0)) {
            throw Error(ErrorCode::NotPositiveDefinite,
                        "cholesky: pivot " + std::to_string(pivot) + " at index " + std::to_string(j));
        }
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return CholeskyFactor{std::move(l)};
}

double log_det_pd(const Matrix& a) { return cholesky(a).log_det(); }

Matrix solve_pd(const CholeskyFactor& factor, const Matrix& b) {
    const Matrix& l = factor.lower;
    const std::size_t n = l.rows();
    if (b.rows() != n) throw Error(ErrorCode::DimensionMismatch, "solve_pd");
    Matrix x = b;
    for (std::size_t c = 0; c < b.cols(); ++c) {
        // L y = b
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        // L^T x = y
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    return x;
}

Matrix invert_pd(const Matrix& a) {
    const auto factor = cholesky(a);
    return symmetrize(solve_pd(factor, Matrix::identity(a.rows())));
}

namespace {

// Orthonormal completion for columns whose singular value vanished.
void complete_orthonormal(Matrix& u, std::size_t first_missing) {
    const std::size_t m = u.rows();
    std::size_t probe = 0;
    for (std::size_t c = first_missing; c < u.cols(); ++c) {
        while (probe < m) {
            Vector e(m, 0.0);
            e[probe++] = 1.0;
            for (std::size_t k = 0; k < c; ++k) {
                const Vector uk = u.col(k);
                axpy(-dot(uk, e), uk, e);
            }
            const double len = norm(e);
            if (len > 1e-6) {
                for (std::size_t r = 0; r < m; ++r) u(r, c) = e[r] / len;
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix w = a;
    Matrix v = Matrix::identity(n);
    constexpr int kMaxSweeps = 100;
    constexpr double kEps = 1e-15;
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += w(i, p) * w(i, p);
                    beta += w(i, q) * w(i, q);
                    gamma += w(i, p) * w(i, q);
                }
                if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) throw Error(ErrorCode::ConvergenceFailure, "svd_small: sweep cap reached");

    Vector sv(n);
    for (std::size_t j = 0; j < n; ++j) sv[j] = norm(w.col(j));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    SvdResult out{Matrix(m, n), Vector(n), Matrix(n, n)};
    const double smax = n > 0 ? sv[order[0]] : 0.0;
    std::size_t nonzero = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.s[k] = sv[j];
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
        if (sv[j] > 1e-300 && sv[j] > 1e-14 * smax) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, k) = w(i, j) / sv[j];
            nonzero = k + 1;
        }
    }
    complete_orthonormal(out.u, nonzero);
    return out;
}

}  // namespace

SvdResult svd_small(const Matrix& a) {
    if (!all_finite(a.data())) throw Error(ErrorCode::DomainError, "svd_small: non-finite input");
    if (a.rows() >= a.cols()) return svd_tall(a);
    SvdResult t = svd_tall(a.transpose());
    return SvdResult{std::move(t.v), std::move(t.s), std::move(t.u)};
}

double determinant(Matrix a) {
    require_square(a, "determinant");
    const std::size_t n = a.rows();
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (a(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            det = -det;
        }
        det *= a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return det;
}

void fill_standard_normal(Rng& rng, std::span<double> out) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& x : out) x = dist(rng);
}

Vector standard_normal(Rng& rng, std::size_t n) {
    Vector v(n);
    fill_standard_normal(rng, v);
    return v;
}

Matrix random_orthogonal(std::size_t n, Rng& rng) {
    Matrix g(n, n);
    fill_standard_normal(rng, g.data());
    // Modified Gram-Schmidt on columns; the sign convention of QR with
    // positive R diagonal yields the Haar measure.
    Matrix q(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        Vector v = g.col(c);
        for (std::size_t k = 0; k < c; ++k) {
            const Vector qk = q.col(k);
            axpy(-dot(qk, v), qk, v);
        }
        const double len = norm(v);
        for (std::size_t r = 0; r < n; ++r) q(r, c) = v[r] / len;
    }
    return q;
}

Matrix rotation2d(double degrees) {
    const double t = degrees * std::numbers::pi / 180.0;
    return Matrix{{std::cos(t), -std::sin(t)}, {std::sin(t), std::cos(t)}};
}

void write_csv(std::ostream& out, const Matrix& m) {
    char buf[64];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out.put(',');
            auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
            out.write(buf, res.ptr - buf);
        }
        out.put('\n');
    }
}

Matrix read_csv(std::istream& in) {
    std::vector<double> values;
    std::size_t cols = 0, rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t count = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            double x = 0.0;
            auto res = std::from_chars(p, end, x);
            if (res.ec != std::errc()) throw Error(ErrorCode::CorruptDocument, "read_csv: bad number in '" + line + "'");
            values.push_back(x);
            ++count;
            p = res.ptr;
            if (p < end && *p == ',') ++p;
        }
        if (rows == 0) cols = count;
        if (count != cols) throw Error(ErrorCode::CorruptDocument, "read_csv: ragged rows");
        ++rows;
    }
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data().begin());
    return m;
}

}  // namespace grae
