#include "zpafdm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace zpafdm {

// ---------------------------------------------------------------------------
// CMatrix
// ---------------------------------------------------------------------------

CMatrix CMatrix::identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

CVector CMatrix::column(std::size_t c) const {
    CVector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void CMatrix::set_column(std::size_t c, std::span<const cplx> values) {
    if (values.size() != rows_) throw std::invalid_argument("set_column: length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

CVector CMatrix::multiply(std::span<const cplx> v) const {
    if (v.size() != cols_) throw std::invalid_argument("CMatrix::multiply: length mismatch");
    CVector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        const cplx* a = data_.data() + r * cols_;
        cplx acc{};
        for (std::size_t c = 0; c < cols_; ++c) acc += a[c] * v[c];
        out[r] = acc;
    }
    return out;
}

CMatrix CMatrix::adjoint() const {
    CMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

CMatrix CMatrix::operator*(const CMatrix& rhs) const {
    if (cols_ != rhs.rows_) throw std::invalid_argument("CMatrix product: dimension mismatch");
    CMatrix out(rows_, rhs.cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        cplx* o = out.data_.data() + r * rhs.cols_;
        for (std::size_t k = 0; k < cols_; ++k) {
            const cplx a = (*this)(r, k);
            if (a == cplx{}) continue;
            const cplx* b = rhs.data_.data() + k * rhs.cols_;
            for (std::size_t c = 0; c < rhs.cols_; ++c) o[c] += a * b[c];
        }
    }
    return out;
}

CMatrix CMatrix::operator+(const CMatrix& rhs) const {
    CMatrix out = *this;
    out += rhs;
    return out;
}

CMatrix& CMatrix::operator+=(const CMatrix& rhs) {
    if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw std::invalid_argument("CMatrix sum: dimension mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
    return *this;
}

CMatrix CMatrix::operator*(cplx scale) const {
    CMatrix out = *this;
    for (auto& v : out.data_) v *= scale;
    return out;
}

double CMatrix::max_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
}

double CMatrix::max_abs_diff(const CMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw std::invalid_argument("max_abs_diff: dimension mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < data_.size(); ++k) m = std::max(m, std::abs(data_[k] - other.data_[k]));
    return m;
}

double CMatrix::frobenius_norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += abs2(v);
    return std::sqrt(s);
}

double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

double max_abs(std::span<const cplx> v) {
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, std::abs(x));
    return m;
}

double norm2(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& x : v) s += abs2(x);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// FftPlan
// ---------------------------------------------------------------------------

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n), fast_(is_power_of_two(n)) {
    if (n == 0) throw std::invalid_argument("FftPlan: length must be at least 1");
    twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddles_[k] = {std::cos(angle), std::sin(angle)};
    }
    if (fast_) {
        while ((std::size_t{1} << log2n_) < n) ++log2n_;
        bitrev_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (unsigned b = 0; b < log2n_; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n_ - 1 - b);
            bitrev_[i] = r;
        }
    }
}

CVector FftPlan::direct(std::span<const cplx> data, bool inverse) const {
    if (data.size() != n_) throw std::invalid_argument("FftPlan::direct: length mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
    CVector out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
        cplx acc{};
        for (std::size_t m = 0; m < n_; ++m) {
            const cplx w = twiddles_[(k * m) % n_];
            acc += data[m] * (inverse ? std::conj(w) : w);
        }
        out[k] = acc * scale;
    }
    return out;
}

void FftPlan::transform(std::span<cplx> data, bool inverse, OpCounter* ops) const {
    if (data.size() != n_) throw std::invalid_argument("FftPlan::transform: length mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
    if (!fast_) {
        CVector out = direct(data, inverse);
        std::copy(out.begin(), out.end(), data.begin());
        count_mul(ops, n_ * n_ + n_);
        count_add(ops, n_ * (n_ - 1));
        return;
    }
    for (std::size_t i = 0; i < n_; ++i)
        if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n_ / len;
        for (std::size_t start = 0; start < n_; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const cplx w = inverse ? std::conj(twiddles_[k * stride]) : twiddles_[k * stride];
                const cplx u = data[start + k];
                const cplx v = data[start + k + half] * w;
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
    }
    for (auto& x : data) x *= scale;
    count_mul(ops, (n_ / 2) * log2n_ + n_);
    count_add(ops, n_ * log2n_);
}

CVector dft_unitary(std::span<const cplx> v, bool inverse) {
    if (v.empty()) throw std::invalid_argument("dft_unitary: empty input");
    FftPlan plan(v.size());
    CVector out(v.begin(), v.end());
    plan.transform(out, inverse);
    return out;
}

// ---------------------------------------------------------------------------
// Banded storage
// ---------------------------------------------------------------------------

LowerBand::LowerBand(std::size_t n, std::size_t q) : n_(n), q_(q) {
    if (n > 0 && q >= n) q_ = n - 1;
    diags_.resize(q_ + 1);
    for (std::size_t d = 0; d <= q_; ++d) diags_[d].assign(n_ > d ? n_ - d : 0, cplx{});
}

cplx& LowerBand::ref(std::size_t i, std::size_t j) {
    if (!in_band(i, j) || i >= n_) throw std::out_of_range("LowerBand: entry outside band");
    return diags_[i - j][j];
}

CVector BandedLowerTriangular::multiply(std::span<const cplx> v, OpCounter* ops) const {
    const std::size_t n = dim();
    if (v.size() != n) throw std::invalid_argument("BandedLowerTriangular::multiply: length mismatch");
    CVector out(n);
    for (std::size_t d = 0; d <= bandwidth(); ++d) {
        const auto& diag = band_.diagonal(d);
        for (std::size_t j = 0; j < diag.size(); ++j) out[j + d] += diag[j] * v[j];
        count_mul(ops, diag.size());
        count_add(ops, diag.size());
    }
    return out;
}

CVector BandedLowerTriangular::multiply_adjoint(std::span<const cplx> v, OpCounter* ops) const {
    const std::size_t n = dim();
    if (v.size() != n) throw std::invalid_argument("BandedLowerTriangular::multiply_adjoint: length mismatch");
    CVector out(n);
    for (std::size_t d = 0; d <= bandwidth(); ++d) {
        const auto& diag = band_.diagonal(d);
        for (std::size_t j = 0; j < diag.size(); ++j) out[j] += std::conj(diag[j]) * v[j + d];
        count_mul(ops, diag.size());
        count_add(ops, diag.size());
    }
    return out;
}

CMatrix BandedLowerTriangular::to_dense() const {
    CMatrix m(dim(), dim());
    for (std::size_t d = 0; d <= bandwidth(); ++d) {
        const auto& diag = band_.diagonal(d);
        for (std::size_t j = 0; j < diag.size(); ++j) m(j + d, j) = diag[j];
    }
    return m;
}

BandedLowerTriangular BandedLowerTriangular::identity(std::size_t n) {
    BandedLowerTriangular l(n, 0);
    for (std::size_t i = 0; i < n; ++i) l.ref(i, i) = 1.0;
    return l;
}

CVector BandedHermitianMatrix::multiply(std::span<const cplx> v) const {
    const std::size_t n = dim();
    if (v.size() != n) throw std::invalid_argument("BandedHermitianMatrix::multiply: length mismatch");
    CVector out(n);
    for (std::size_t d = 0; d <= half_bandwidth(); ++d) {
        const auto& diag = band_.diagonal(d);
        for (std::size_t j = 0; j < diag.size(); ++j) {
            out[j + d] += diag[j] * v[j];
            if (d > 0) out[j] += std::conj(diag[j]) * v[j + d];
        }
    }
    return out;
}

CMatrix BandedHermitianMatrix::to_dense() const {
    CMatrix m(dim(), dim());
    for (std::size_t d = 0; d <= half_bandwidth(); ++d) {
        const auto& diag = band_.diagonal(d);
        for (std::size_t j = 0; j < diag.size(); ++j) {
            m(j + d, j) = diag[j];
            m(j, j + d) = std::conj(diag[j]);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Banded Cholesky and triangular solves
// ---------------------------------------------------------------------------

BandedLowerTriangular banded_cholesky(const BandedHermitianMatrix& psi, OpCounter* ops) {
    const std::size_t n = psi.dim();
    const std::size_t q = psi.half_bandwidth();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(psi(i, i).real()));
    const double pivot_floor = 1e-14 * max_diag;

    BandedLowerTriangular l(n, q);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j_start = i >= q ? i - q : 0;
        for (std::size_t j = j_start; j <= i; ++j) {
            if (j == i) {
                double s = psi(i, i).real();
                for (std::size_t p = j_start; p < i; ++p) s -= abs2(l(i, p));
                count_mul(ops, i - j_start);
                count_add(ops, i - j_start);
                if (!(s > pivot_floor))
                    throw FactorizationError("banded_cholesky: non-positive pivot at index " + std::to_string(i), i);
                l.ref(i, i) = std::sqrt(s);
            } else {
                cplx s = psi(i, j);
                for (std::size_t p = j_start; p < j; ++p) s -= l(i, p) * std::conj(l(j, p));
                l.ref(i, j) = s / l(j, j);
                count_mul(ops, j - j_start + 1);
                count_add(ops, j - j_start);
            }
        }
    }
    return l;
}

CVector forward_substitution(const BandedLowerTriangular& l, std::span<const cplx> b, OpCounter* ops) {
    const std::size_t n = l.dim();
    const std::size_t q = l.bandwidth();
    if (b.size() != n) throw std::invalid_argument("forward_substitution: length mismatch");
    CVector z(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx diag = l(i, i);
        if (diag == cplx{}) throw FactorizationError("forward_substitution: zero diagonal at index " + std::to_string(i), i);
        const std::size_t j_start = i >= q ? i - q : 0;
        cplx acc = b[i];
        for (std::size_t j = j_start; j < i; ++j) acc -= l(i, j) * z[j];
        z[i] = acc / diag;
        count_mul(ops, i - j_start + 1);
        count_add(ops, i - j_start);
    }
    return z;
}

CVector backward_substitution(const BandedLowerTriangular& l, std::span<const cplx> z, OpCounter* ops) {
    const std::size_t n = l.dim();
    const std::size_t q = l.bandwidth();
    if (z.size() != n) throw std::invalid_argument("backward_substitution: length mismatch");
    CVector s(n);
    for (std::size_t ii = n; ii-- > 0;) {
        const cplx diag = l(ii, ii);
        if (diag == cplx{}) throw FactorizationError("backward_substitution: zero diagonal at index " + std::to_string(ii), ii);
        const std::size_t j_end = std::min(n - 1, ii + q);
        cplx acc = z[ii];
        for (std::size_t j = ii + 1; j <= j_end; ++j) acc -= std::conj(l(j, ii)) * s[j];
        s[ii] = acc / std::conj(diag);
        count_mul(ops, j_end - ii + 1);
        count_add(ops, j_end - ii);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Dense Hermitian helpers
// ---------------------------------------------------------------------------

CMatrix dense_cholesky(const CMatrix& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("dense_cholesky: matrix not square");
    CMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= abs2(l(j, k));
        if (!(d > 0.0)) throw FactorizationError("dense_cholesky: matrix not positive definite at index " + std::to_string(j), j);
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = a(i, j);
            const cplx* li = &l(i, 0);
            const cplx* lj = &l(j, 0);
            for (std::size_t k = 0; k < j; ++k) s -= li[k] * std::conj(lj[k]);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

CVector dense_cholesky_solve(const CMatrix& l, std::span<const cplx> b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw std::invalid_argument("dense_cholesky_solve: length mismatch");
    CVector z(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx acc = b[i];
        const cplx* li = &l(i, 0);
        for (std::size_t j = 0; j < i; ++j) acc -= li[j] * z[j];
        z[i] = acc / l(i, i);
    }
    CVector x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        cplx acc = z[ii];
        for (std::size_t j = ii + 1; j < n; ++j) acc -= std::conj(l(j, ii)) * x[j];
        x[ii] = acc / std::conj(l(ii, ii));
    }
    return x;
}

bool is_hermitian(const CMatrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.max_abs());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i; j < a.cols(); ++j)
            if (std::abs(a(i, j) - std::conj(a(j, i))) > tol * scale) return false;
    return true;
}

std::vector<double> hermitian_eigenvalues(const CMatrix& theta) {
    if (!is_hermitian(theta, 1e-10)) throw std::invalid_argument("hermitian_eigenvalues: input is not Hermitian");
    const std::size_t n = theta.rows();
    CMatrix a = theta;
    for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();

    const double total_norm = a.frobenius_norm();
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += abs2(a(i, j));
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 100 && off_norm() > 1e-12 * total_norm; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double mag = std::abs(a(p, q));
                if (mag == 0.0) continue;
                const cplx phase = a(p, q) / mag;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx sp = s * std::conj(phase);

                // A <- A U with U(:,p) = [c; -s conj(phase)], U(:,q) = [s; c conj(phase)]
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx akp = a(k, p);
                    const cplx akq = a(k, q);
                    a(k, p) = c * akp - sp * akq;
                    a(k, q) = s * akp + c * std::conj(phase) * akq;
                }
                // A <- U^H A
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx apk = a(p, k);
                    const cplx aqk = a(q, k);
                    a(p, k) = c * apk - s * phase * aqk;
                    a(q, k) = s * apk + c * phase * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
            }
        }
    }

    std::vector<double> eig(n);
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        eig[i] = a(i, i).real();
        trace += eig[i];
    }
    const double clamp = 1e-9 * std::abs(trace);
    for (auto& v : eig)
        if (v < 0.0 && v >= -clamp) v = 0.0;
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

std::size_t numerical_rank(std::span<const double> eigenvalues, double rel_tol) {
    double largest = 0.0;
    for (double v : eigenvalues) largest = std::max(largest, v);
    if (largest <= 0.0) return 0;
    return static_cast<std::size_t>(
        std::count_if(eigenvalues.begin(), eigenvalues.end(), [&](double v) { return v > rel_tol * largest; }));
}

// ---------------------------------------------------------------------------
// Scalar special functions
// ---------------------------------------------------------------------------

double q_function_approx(double x) {
    return std::exp(-x * x / 2.0) / 12.0 + std::exp(-2.0 * x * x / 3.0) / 4.0;
}

// libm's erfc is accurate to a few ulp over the whole real line.
double erfc(double x) { return std::erfc(x); }

}  // namespace zpafdm
