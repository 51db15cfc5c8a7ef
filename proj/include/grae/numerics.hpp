#pragma once

// Dense double-precision linear algebra for the small matrices used
// throughout the library (latent dims <= 64, batch-major data matrices).

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace grae {

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);
    /// Column vector view of a Vector as an n x 1 matrix.
    static Matrix column(std::span<const double> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    Vector col(std::size_t c) const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transpose() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// A * B
Matrix matmul(const Matrix& a, const Matrix& b);
/// A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
/// A^T * x
Vector matvec_t(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);
/// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);
Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& a);

double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(std::span<const double> v);
/// (A + A^T) / 2
Matrix symmetrize(const Matrix& a);
/// Largest |A_ij - A_ji|.
double asymmetry(const Matrix& a);

/// Lower-triangular L with positive diagonal and L * L^T = A.
struct CholeskyFactor {
    Matrix lower;

    std::size_t dim() const noexcept { return lower.rows(); }
    Matrix reconstruct() const;
    double log_det() const;
};

/// Throws NotPositiveDefinite when a pivot falls to 1e-12 * trace(A) or below.
CholeskyFactor cholesky(const Matrix& a);
/// log|A| for symmetric positive definite A, via the Cholesky diagonal.
double log_det_pd(const Matrix& a);
Matrix invert_pd(const Matrix& a);
/// Solves A X = B for symmetric positive definite A.
Matrix solve_pd(const CholeskyFactor& factor, const Matrix& b);

struct SvdResult {
    Matrix u;  ///< rows x k, orthonormal columns (k = min(rows, cols))
    Vector s;  ///< non-increasing, non-negative
    Matrix v;  ///< cols x k, orthonormal columns
};

/// One-sided Jacobi SVD. Sweep cap 100, then ConvergenceFailure.
SvdResult svd_small(const Matrix& a);

/// General determinant by partial-pivot LU.
double determinant(Matrix a);

void fill_standard_normal(Rng& rng, std::span<double> out);
Vector standard_normal(Rng& rng, std::size_t n);
/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(std::size_t n, Rng& rng);
/// Planar rotation by `degrees`.
Matrix rotation2d(double degrees);

/// One row per line, comma separated, no header, round-trip precision.
void write_csv(std::ostream& out, const Matrix& m);
Matrix read_csv(std::istream& in);

}  // namespace grae
