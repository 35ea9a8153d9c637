#include "oracle.hpp"

#include "zpafdm/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace zpafdm;

namespace {

BandedHermitianMatrix to_banded(const oracle::Mat& psi, std::size_t q) {
    const auto n = static_cast<std::size_t>(psi.rows());
    BandedHermitianMatrix b(n, q);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j; i < n && i - j <= q; ++i) b.set_lower(i, j, psi(i, j));
    return b;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("dft of an impulse is flat") {
    CVector v(4);
    v[0] = 1.0;
    const auto out = dft_unitary(v, false);
    for (auto z : out) CHECK(std::abs(z - cplx(0.5, 0.0)) < 1e-15);
}

TEST_CASE("fast and direct transforms agree, power of two and not") {
    std::mt19937_64 rng(3);
    for (std::size_t n : {4u, 6u, 12u, 64u, 1024u}) {
        const auto v = oracle::to_cvector(oracle::random_vector(n, rng));
        FftPlan plan(n);
        for (bool inv : {false, true}) {
            CVector fast = v;
            plan.transform(fast, inv);
            CHECK(max_abs_diff(fast, plan.direct(v, inv)) < 1e-10);
        }
        CHECK(oracle::max_diff(oracle::dft(n) * oracle::to_eigen(v), dft_unitary(v, false)) < 1e-10);
    }
}

TEST_CASE("dft round trip up to 1024") {
    std::mt19937_64 rng(4);
    for (std::size_t n = 1; n <= 1024; n *= 2) {
        const auto v = oracle::to_cvector(oracle::random_vector(n, rng));
        CHECK(max_abs_diff(dft_unitary(dft_unitary(v, false), true), v) <= 1e-10);
    }
}

TEST_CASE("banded cholesky of the identity") {
    BandedHermitianMatrix psi(4, 0);
    for (std::size_t i = 0; i < 4; ++i) psi.set_lower(i, i, 1.0);
    const auto l = banded_cholesky(psi);
    CHECK(l.to_dense().max_abs_diff(CMatrix::identity(4)) == 0.0);
}

TEST_CASE("banded cholesky of a 2x2") {
    BandedHermitianMatrix psi(2, 1);
    psi.set_lower(0, 0, 4.0);
    psi.set_lower(1, 0, 2.0);
    psi.set_lower(1, 1, 4.0);
    const auto l = banded_cholesky(psi);
    CHECK(std::abs(l(0, 0) - 2.0) < 1e-15);
    CHECK(std::abs(l(1, 0) - 1.0) < 1e-15);
    CHECK(std::abs(l(1, 1) - std::sqrt(3.0)) < 1e-15);
    CHECK(std::abs(l(0, 1)) == 0.0);

    const CVector b{2.0, 1.0 + std::sqrt(3.0)};
    const auto z = forward_substitution(l, b);
    CHECK(std::abs(z[0] - 1.0) < 1e-12);
    CHECK(std::abs(z[1] - 1.0) < 1e-12);

    const auto s = backward_substitution(l, z);
    const auto back = l.multiply_adjoint(s);
    CHECK(max_abs_diff(back, z) < 1e-12);
}

TEST_CASE("banded cholesky matches the dense factor, N=32 Q=4") {
    std::mt19937_64 rng(5);
    const auto psi = oracle::banded_hpd(32, 4, rng);
    const auto l = banded_cholesky(to_banded(psi, 4));
    const oracle::Mat ld = oracle::to_eigen(l.to_dense());
    CHECK((ld * ld.adjoint() - psi).cwiseAbs().maxCoeff() <= 1e-10);
    const oracle::Mat ref = psi.llt().matrixL();
    CHECK((ld - ref).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("banded cholesky and solves over 200 random instances") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<std::size_t> dn(2, 128), dq(0, 16);
    double worst_factor = 0.0, worst_solve = 0.0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = dn(rng);
        const std::size_t q = std::min(dq(rng), n - 1);
        const auto psi = oracle::banded_hpd(n, q, rng);
        const auto l = banded_cholesky(to_banded(psi, q));
        const oracle::Mat ref = psi.llt().matrixL();
        const double scale = ref.cwiseAbs().maxCoeff();
        worst_factor = std::max(worst_factor, oracle::max_diff(ref, l.to_dense()) / scale);

        const auto b = oracle::to_cvector(oracle::random_vector(n, rng));
        const auto s = backward_substitution(l, forward_substitution(l, b));
        const oracle::Vec res = psi * oracle::to_eigen(s) - oracle::to_eigen(b);
        worst_solve = std::max(worst_solve, res.cwiseAbs().maxCoeff() / max_abs(b));
        const oracle::Vec dense_solve = psi.llt().solve(oracle::to_eigen(b));
        CHECK(oracle::max_diff(dense_solve, s) <= 1e-9 * dense_solve.cwiseAbs().maxCoeff());
    }
    CHECK(worst_factor <= 1e-9);
    CHECK(worst_solve <= 1e-8);
}

TEST_CASE("substitution round trip on a random band") {
    std::mt19937_64 rng(7);
    const std::size_t n = 40, q = 5;
    BandedLowerTriangular l(n, q);
    std::normal_distribution<double> g;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j; i < n && i - j <= q; ++i)
            l.ref(i, j) = i == j ? cplx(2.0 + std::abs(g(rng)), 0.0) : cplx(g(rng), g(rng)) * 0.3;
    const auto z = oracle::to_cvector(oracle::random_vector(n, rng));
    CHECK(max_abs_diff(forward_substitution(l, l.multiply(z)), z) <= 1e-10);
    CHECK(max_abs_diff(backward_substitution(l, l.multiply_adjoint(z)), z) <= 1e-10);

    const auto id = BandedLowerTriangular::identity(n);
    CHECK(max_abs_diff(forward_substitution(id, z), z) == 0.0);
    CHECK(max_abs_diff(backward_substitution(id, z), z) == 0.0);
}

TEST_CASE("zero pivot is rejected") {
    BandedLowerTriangular l(3, 1);
    l.ref(0, 0) = 1.0;
    l.ref(2, 2) = 1.0;
    const CVector b{1.0, 1.0, 1.0};
    CHECK_THROWS_AS(forward_substitution(l, b), FactorizationError);
    CHECK_THROWS_AS(backward_substitution(l, b), FactorizationError);

    BandedHermitianMatrix psi(2, 1);
    psi.set_lower(0, 0, 1.0);
    psi.set_lower(1, 0, 1.0);
    psi.set_lower(1, 1, 1.0);
    CHECK_THROWS_AS(banded_cholesky(psi), FactorizationError);
}

TEST_CASE("banded cholesky count grows linearly in N") {
    std::mt19937_64 rng(8);
    std::vector<double> ns, counts;
    for (std::size_t n : {64u, 128u, 256u, 512u}) {
        OpCounter ops;
        banded_cholesky(to_banded(oracle::banded_hpd(n, 4, rng), 4), &ops);
        ns.push_back(static_cast<double>(n));
        counts.push_back(static_cast<double>(ops.complex_multiplications));
    }
    CHECK(std::abs(slope(ns, counts) - 1.0) <= 0.1);
}

TEST_CASE("hermitian eigenvalues") {
    CMatrix d(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 3.0;
    auto ev = hermitian_eigenvalues(d);
    CHECK(std::abs(ev[0] - 3.0) < 1e-12);
    CHECK(std::abs(ev[1] - 1.0) < 1e-12);

    CMatrix t(2, 2);
    t(0, 0) = 2.0;
    t(0, 1) = 1.0;
    t(1, 0) = 1.0;
    t(1, 1) = 2.0;
    ev = hermitian_eigenvalues(t);
    CHECK(std::abs(ev[0] - 3.0) < 1e-12);
    CHECK(std::abs(ev[1] - 1.0) < 1e-12);

    CMatrix bad(2, 2);
    bad(0, 1) = 1.0;
    CHECK_THROWS_AS(hermitian_eigenvalues(bad), std::invalid_argument);
}

TEST_CASE("eigenvalues of Gram matrices: trace, determinant and rank") {
    std::mt19937_64 rng(9);
    for (std::size_t p : {1u, 2u, 3u, 4u}) {
        oracle::Mat phi(6, p);
        for (std::size_t c = 0; c < p; ++c) phi.col(c) = oracle::random_vector(6, rng);
        const oracle::Mat theta_e = phi.adjoint() * phi;
        CMatrix theta(p, p);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) theta(i, j) = theta_e(i, j);
        const auto ev = hermitian_eigenvalues(theta);
        const double trace = theta_e.trace().real();
        double sum = 0.0, prod = 1.0;
        for (double v : ev) {
            CHECK(v >= -1e-9);
            sum += v;
            prod *= v;
        }
        CHECK(std::abs(sum - trace) <= 1e-8 * trace);
        const double det = theta_e.determinant().real();
        CHECK(std::abs(prod - det) <= 1e-8 * std::abs(det));
        CHECK(numerical_rank(ev) == p);
    }
    // rank-deficient: two identical columns
    oracle::Mat phi(5, 2);
    phi.col(0) = oracle::random_vector(5, rng);
    phi.col(1) = phi.col(0);
    const oracle::Mat theta_e = phi.adjoint() * phi;
    CMatrix theta(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) theta(i, j) = theta_e(i, j);
    const auto ev = hermitian_eigenvalues(theta);
    CHECK(numerical_rank(ev) == 1);
}

TEST_CASE("two-exponential Q approximation") {
    CHECK(q_function_approx(0.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const double at2 = std::exp(-2.0) / 12.0 + std::exp(-8.0 / 3.0) / 4.0;
    CHECK(q_function_approx(2.0) == doctest::Approx(at2).epsilon(1e-14));
    CHECK(q_function_approx(2.0) == doctest::Approx(0.028649).epsilon(1e-4));
    CHECK(q_function_approx(3.0) < q_function_approx(2.0));
    CHECK(q_function_approx(2.0) < q_function_approx(1.0));
}

TEST_CASE("erfc") {
    CHECK(zpafdm::erfc(0.0) == 1.0);
    CHECK(std::abs(zpafdm::erfc(1.0) - 0.15729920705028513) <= 1e-12);
    for (double x : {0.1, 0.5, 1.3, 2.7, 5.0}) CHECK(std::abs(zpafdm::erfc(-x) - (2.0 - zpafdm::erfc(x))) <= 1e-12);
}

TEST_CASE("dense cholesky solve") {
    std::mt19937_64 rng(10);
    const auto psi = oracle::banded_hpd(12, 11, rng);
    CMatrix a(12, 12);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) a(i, j) = psi(i, j);
    const auto b = oracle::to_cvector(oracle::random_vector(12, rng));
    const oracle::Vec ref = psi.ldlt().solve(oracle::to_eigen(b));
    CHECK(oracle::max_diff(ref, dense_cholesky_solve(dense_cholesky(a), b)) <= 1e-10);
}

}  // TEST_SUITE
