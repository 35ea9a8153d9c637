#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zpafdm {

using cplx = std::complex<double>;

/// |z|^2 without the hypot call std::norm makes outside fast-math builds.
inline double abs2(cplx z) { return z.real() * z.real() + z.imag() * z.imag(); }
using CVector = std::vector<cplx>;

/// Counts complex multiplications and additions inside an instrumented scope.
/// A real-by-complex product, a division and a squared magnitude each count as
/// one multiplication.
struct OpCounter {
    std::uint64_t complex_multiplications = 0;
    std::uint64_t complex_additions = 0;

    void reset() { *this = OpCounter{}; }

    OpCounter& operator+=(const OpCounter& other) {
        complex_multiplications += other.complex_multiplications;
        complex_additions += other.complex_additions;
        return *this;
    }
};

inline void count_mul(OpCounter* ops, std::uint64_t n) {
    if (ops) ops->complex_multiplications += n;
}
inline void count_add(OpCounter* ops, std::uint64_t n) {
    if (ops) ops->complex_additions += n;
}

/// Dense row-major complex matrix.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    static CMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    CVector column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const cplx> values);

    CVector multiply(std::span<const cplx> v) const;
    CMatrix adjoint() const;
    CMatrix operator*(const CMatrix& rhs) const;
    CMatrix operator+(const CMatrix& rhs) const;
    CMatrix& operator+=(const CMatrix& rhs);
    CMatrix operator*(cplx scale) const;

    double max_abs() const;
    double max_abs_diff(const CMatrix& other) const;
    double frobenius_norm() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b);
double max_abs(std::span<const cplx> v);
double norm2(std::span<const cplx> v);

// ---------------------------------------------------------------------------
// Unitary DFT
// ---------------------------------------------------------------------------

/// Precomputed unitary DFT of fixed length. Power-of-two lengths use an
/// iterative radix-2 FFT; any other length falls back to the direct sum.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);

    std::size_t size() const { return n_; }
    bool is_fast() const { return fast_; }

    /// In-place transform with 1/sqrt(N) scaling in both directions.
    void transform(std::span<cplx> data, bool inverse, OpCounter* ops = nullptr) const;
    /// Direct O(N^2) evaluation regardless of length.
    CVector direct(std::span<const cplx> data, bool inverse) const;

private:
    std::size_t n_;
    bool fast_;
    unsigned log2n_ = 0;
    // twiddles_[k] = exp(-j 2 pi k / N), k in [0, N)
    std::vector<cplx> twiddles_;
    std::vector<std::size_t> bitrev_;
};

CVector dft_unitary(std::span<const cplx> v, bool inverse);

// ---------------------------------------------------------------------------
// Banded storage
// ---------------------------------------------------------------------------

/// Diagonal-major storage of a lower band: diagonal d (0..q) holds entries
/// (j + d, j) for j in [0, n - d).
class LowerBand {
public:
    LowerBand() = default;
    LowerBand(std::size_t n, std::size_t q);

    std::size_t dim() const { return n_; }
    std::size_t bandwidth() const { return q_; }

    bool in_band(std::size_t i, std::size_t j) const { return j <= i && i - j <= q_; }
    cplx get(std::size_t i, std::size_t j) const { return in_band(i, j) ? diags_[i - j][j] : cplx{}; }
    cplx& ref(std::size_t i, std::size_t j);
    const std::vector<cplx>& diagonal(std::size_t d) const { return diags_[d]; }
    std::vector<cplx>& diagonal(std::size_t d) { return diags_[d]; }

private:
    std::size_t n_ = 0;
    std::size_t q_ = 0;
    std::vector<std::vector<cplx>> diags_;
};

/// Lower-triangular matrix with q stored sub-diagonals. Houses the time-domain
/// channel matrix and Cholesky factors.
class BandedLowerTriangular {
public:
    BandedLowerTriangular() = default;
    BandedLowerTriangular(std::size_t n, std::size_t q) : band_(n, q) {}

    std::size_t dim() const { return band_.dim(); }
    std::size_t bandwidth() const { return band_.bandwidth(); }

    cplx operator()(std::size_t i, std::size_t j) const { return band_.get(i, j); }
    cplx& ref(std::size_t i, std::size_t j) { return band_.ref(i, j); }
    bool in_band(std::size_t i, std::size_t j) const { return band_.in_band(i, j); }

    CVector multiply(std::span<const cplx> v, OpCounter* ops = nullptr) const;
    CVector multiply_adjoint(std::span<const cplx> v, OpCounter* ops = nullptr) const;
    CMatrix to_dense() const;

    static BandedLowerTriangular identity(std::size_t n);

private:
    LowerBand band_;
};

/// Hermitian matrix with half-bandwidth q. Only the lower band is stored; the
/// upper band is implied by conjugate symmetry.
class BandedHermitianMatrix {
public:
    BandedHermitianMatrix() = default;
    BandedHermitianMatrix(std::size_t n, std::size_t q) : band_(n, q) {}

    std::size_t dim() const { return band_.dim(); }
    std::size_t half_bandwidth() const { return band_.bandwidth(); }

    cplx operator()(std::size_t i, std::size_t j) const {
        return i >= j ? band_.get(i, j) : std::conj(band_.get(j, i));
    }
    /// Sets entry (i, j) with i >= j; (j, i) follows by symmetry.
    void set_lower(std::size_t i, std::size_t j, cplx value) { band_.ref(i, j) = value; }

    CVector multiply(std::span<const cplx> v) const;
    CMatrix to_dense() const;

private:
    LowerBand band_;
};

class FactorizationError : public std::runtime_error {
public:
    FactorizationError(const std::string& what, std::size_t index)
        : std::runtime_error(what), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

/// Raised when an exhaustive enumeration would exceed its configured cap.
class CapExceededError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Band-limited Cholesky factorization psi = L L^H. Throws FactorizationError
/// when a pivot drops to 1e-14 of the largest diagonal entry or below.
BandedLowerTriangular banded_cholesky(const BandedHermitianMatrix& psi, OpCounter* ops = nullptr);

/// Solves L z = b over the band.
CVector forward_substitution(const BandedLowerTriangular& l, std::span<const cplx> b,
                             OpCounter* ops = nullptr);
/// Solves L^H s = z over the band.
CVector backward_substitution(const BandedLowerTriangular& l, std::span<const cplx> z,
                              OpCounter* ops = nullptr);

// ---------------------------------------------------------------------------
// Dense Hermitian helpers
// ---------------------------------------------------------------------------

/// Dense Cholesky factor of a Hermitian positive-definite matrix (lower part).
CMatrix dense_cholesky(const CMatrix& a);
/// Solves (L L^H) x = b given the dense lower Cholesky factor.
CVector dense_cholesky_solve(const CMatrix& l, std::span<const cplx> b);

bool is_hermitian(const CMatrix& a, double tol);

/// Eigenvalues of a small Hermitian matrix via cyclic Jacobi rotations, sorted
/// descending. Round-off negatives no larger than 1e-9 * |trace| are clamped to 0.
std::vector<double> hermitian_eigenvalues(const CMatrix& theta);

/// Number of eigenvalues above rel_tol times the largest one.
std::size_t numerical_rank(std::span<const double> eigenvalues, double rel_tol = 1e-9);

// ---------------------------------------------------------------------------
// Scalar special functions
// ---------------------------------------------------------------------------

/// Two-exponential approximation (1/12)e^{-x^2/2} + (1/4)e^{-2x^2/3} of the
/// Gaussian tail function.
double q_function_approx(double x);

/// Complementary error function.
double erfc(double x);

}  // namespace zpafdm
