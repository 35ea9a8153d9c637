#include "oracle.hpp"

#include "zpafdm/detectors.hpp"
#include "zpafdm/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace zpafdm;

namespace {

AfdmConfig zp(std::size_t n, std::size_t guard, double nu_max = 1.0) {
    AfdmConfig cfg;
    cfg.n = n;
    cfg.guard_len = guard;
    const auto p = default_chirp_params(nu_max, n);
    cfg.c1 = p.c1;
    cfg.c2 = p.c2;
    return cfg;
}

struct Instance {
    AfdmConfig cfg;
    ChannelRealization real;
    CVector x;
    CVector r;  // time-domain received samples
    CVector y;  // A r
};

Instance draw(std::size_t n, std::size_t q, double snr, const Constellation& c, std::uint64_t seed) {
    Instance in;
    in.cfg = zp(n, q);
    auto rng = stream_rng(seed, n, q);
    in.real = sample_realization(ChannelProfile::consecutive(q + 1, 1.0), rng);
    std::uniform_int_distribution<std::size_t> pick(0, c.order() - 1);
    in.x.resize(n);
    for (auto& v : in.x) v = c.points[pick(rng)];
    DaftOperator op(in.cfg);
    in.r = build_td_matrix(in.real, in.cfg).multiply(op.idaft(in.x));
    add_awgn(in.r, 1.0 / snr, rng);
    in.y = op.daft(in.r);
    return in;
}

/// Brute force over every index vector, counting in base M.
std::vector<unsigned> brute_force(const oracle::Mat& heff, const oracle::Vec& y, const Constellation& c) {
    const std::size_t n = y.size(), m = c.order();
    std::vector<unsigned> idx(n, 0), best;
    double best_d = std::numeric_limits<double>::infinity();
    while (true) {
        oracle::Vec x(n);
        for (std::size_t i = 0; i < n; ++i) x(i) = c.points[idx[i]];
        const double d = (y - heff * x).squaredNorm();
        if (d < best_d) best_d = d, best = idx;
        std::size_t k = n;
        while (k > 0 && ++idx[k - 1] == m) idx[--k] = 0;
        if (k == 0) break;
    }
    return best;
}

}  // namespace

TEST_SUITE("detectors") {

TEST_CASE("detector names round trip") {
    for (auto k : {DetectorKind::Ml, DetectorKind::MmseConventional, DetectorKind::MmseBanded, DetectorKind::MrcTd})
        CHECK(parse_detector(to_string(k)) == k);
    CHECK_THROWS_AS(parse_detector("zf"), std::invalid_argument);
}

TEST_CASE("ML recovers a noiseless frame") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    auto in = draw(4, 1, 1e12, c, 1);
    DaftOperator op(in.cfg);
    const auto heff = effective_matrix(build_td_matrix(in.real, in.cfg), op);
    const auto y = heff.multiply(in.x);
    const auto res = detect_ml(y, heff, c);
    CHECK(max_abs_diff(res.soft, in.x) == 0.0);
}

TEST_CASE("ML ties resolve to the lexicographically smallest vector") {
    const auto c = Constellation::make(ModulationKind::Bpsk);
    const auto heff = CMatrix::identity(2);
    const CVector y{0.0, 1.0};  // equidistant from (+1,+1) and (-1,+1)
    const auto res = detect_ml(y, heff, c);
    CHECK(res.hard == std::vector<unsigned>{0, 0});
}

TEST_CASE("ML matches an independent brute force") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto in = draw(4, 1, db_to_linear(3.0), c, seed);
        DaftOperator op(in.cfg);
        const auto heff = effective_matrix(build_td_matrix(in.real, in.cfg), op);
        const auto res = detect_ml(in.y, heff, c);
        CHECK(res.hard == brute_force(oracle::to_eigen(heff), oracle::to_eigen(in.y), c));
    }
}

TEST_CASE("ML refuses search spaces above the cap") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    const auto heff = CMatrix::identity(11);
    const CVector y(11);
    CHECK_THROWS_AS(detect_ml(y, heff, c), CapExceededError);
}

TEST_CASE("conventional MMSE") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    SUBCASE("identity channel shrinks") {
        const CVector y{cplx(0.3, -1.2), cplx(2.0, 0.5), cplx(-0.1, 0.0)};
        const double snr = 4.0;
        const auto res = detect_mmse_conventional(y, CMatrix::identity(3), snr, c);
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(res.soft[i] - y[i] * snr / (1.0 + snr)) < 1e-14);
    }
    SUBCASE("high SNR approaches zero forcing") {
        // dominant first tap keeps H (lower-triangular, diagonal h_0) well conditioned
        const auto cfg = zp(16, 2);
        ChannelRealization real;
        real.paths = {{cplx(1.0, 0.2), 0, 0.3}, {cplx(0.0, 0.3), 1, -0.5}, {cplx(0.2, -0.1), 2, 0.8}};
        DaftOperator op(cfg);
        const auto heff = effective_matrix(build_td_matrix(real, cfg), op);
        const auto he = oracle::to_eigen(heff);
        Eigen::JacobiSVD<oracle::Mat> svd(he);
        REQUIRE(svd.singularValues()(0) / svd.singularValues()(15) < 10.0);
        std::mt19937_64 rng(3);
        const auto y = oracle::to_cvector(oracle::random_vector(16, rng));
        const oracle::Vec zf = he.partialPivLu().solve(oracle::to_eigen(y));
        const auto res = detect_mmse_conventional(y, heff, 1e12, c);
        CHECK(oracle::max_diff(zf, res.soft) <= 1e-4);
    }
    SUBCASE("textbook formula, N=8") {
        auto in = draw(8, 2, 5.0, c, 4);
        DaftOperator op(in.cfg);
        const auto heff = effective_matrix(build_td_matrix(in.real, in.cfg), op);
        const auto he = oracle::to_eigen(heff);
        const oracle::Mat g = (he.adjoint() * he + oracle::Mat::Identity(8, 8) / 5.0).inverse() * he.adjoint();
        const auto res = detect_mmse_conventional(in.y, heff, 5.0, c);
        CHECK(oracle::max_diff(g * oracle::to_eigen(in.y), res.soft) <= 1e-9);
        CHECK(res.hard == slice(res.soft, c));
        CHECK(res.ops.complex_multiplications == 3 * 512 + 64);
    }
}

TEST_CASE("banded MMSE") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    SUBCASE("identity channel") {
        const auto cfg = zp(16, 2);
        DaftOperator op(cfg);
        ChannelRealization real;
        real.paths = {{1.0, 0, 0.0}};
        std::mt19937_64 rng(5);
        const auto r = oracle::to_cvector(oracle::random_vector(16, rng));
        const double snr = 7.0;
        CVector s(16);
        for (std::size_t i = 0; i < 16; ++i) s[i] = r[i] * snr / (1.0 + snr);
        const auto res = detect_mmse_banded(r, build_td_matrix(real, cfg), snr, op, c);
        CHECK(max_abs_diff(res.soft, op.daft(s)) < 1e-13);
    }
    SUBCASE("N=64, Q=8 against the conventional detector") {
        auto in = draw(64, 8, db_to_linear(10.0), c, 6);
        DaftOperator op(in.cfg);
        const auto h = build_td_matrix(in.real, in.cfg);
        const auto banded = detect_mmse_banded(in.r, h, db_to_linear(10.0), op, c);
        const auto conv = detect_mmse_conventional(in.y, effective_matrix(h, op), db_to_linear(10.0), c);
        CHECK(max_abs_diff(banded.soft, conv.soft) <= 1e-8);
        CHECK(banded.hard == conv.hard);
    }
    SUBCASE("band-limited Gram and matched filter match dense products") {
        auto in = draw(24, 3, 2.0, c, 7);
        const auto h = build_td_matrix(in.real, in.cfg);
        const oracle::Mat hd = oracle::to_eigen(h.to_dense());
        const oracle::Mat psi = hd.adjoint() * hd + oracle::Mat::Identity(24, 24) / 2.0;
        CHECK(oracle::max_diff(psi, assemble_regularized_gram(h.banded(), 2.0).to_dense()) <= 1e-12);
        CHECK(oracle::max_diff(hd.adjoint() * oracle::to_eigen(in.r), matched_filter(h.banded(), in.r)) <= 1e-12);
    }
    SUBCASE("count at N=256, Q=63 below 5% of the conventional count") {
        auto in = draw(256, 63, 10.0, c, 8);
        DaftOperator op(in.cfg);
        const auto h = build_td_matrix(in.real, in.cfg);
        const auto banded = detect_mmse_banded(in.r, h, 10.0, op, c);
        const auto conv = detect_mmse_conventional(in.y, effective_matrix(h, op), 10.0, c);
        CHECK(double(banded.ops.complex_multiplications) < 0.05 * double(conv.ops.complex_multiplications));
    }
    SUBCASE("cyclic-prefix channel is refused") {
        auto cfg = zp(16, 2);
        cfg.prefix = PrefixMode::CyclicPrefix;
        DaftOperator op(cfg);
        ChannelRealization real;
        real.paths = {{1.0, 0, 0.0}, {0.5, 1, 0.0}};
        const CVector r(16);
        CHECK_THROWS(detect_mmse_banded(r, build_td_matrix(real, cfg), 1.0, op, c));
    }
}

TEST_CASE("MRC-TD") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    SUBCASE("identity channel converges in one sweep") {
        const auto cfg = zp(8, 1);
        DaftOperator op(cfg);
        ChannelRealization real;
        real.paths = {{1.0, 0, 0.0}};
        std::mt19937_64 rng(9);
        const auto r = oracle::to_cvector(oracle::random_vector(8, rng));
        MrcTdOptions opt;
        opt.max_iterations = 1;
        const double snr = 3.0;
        const auto st = mrc_td_iterate(r, build_td_matrix(real, cfg), snr, opt);
        for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(st.s[i] - r[i] / (1.0 + 1.0 / snr)) < 1e-14);
        CHECK(st.iterations == 1);
    }
    SUBCASE("converged estimate solves the normal equations") {
        MrcTdOptions opt;
        opt.max_iterations = 100;
        opt.tolerance = 1e-10;
        int checked = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto in = draw(32, 3, db_to_linear(10.0), c, seed);
            const auto h = build_td_matrix(in.real, in.cfg);
            const auto st = mrc_td_iterate(in.r, h, db_to_linear(10.0), opt);
            if (!st.converged) continue;
            ++checked;
            const oracle::Mat hd = oracle::to_eigen(h.to_dense());
            const oracle::Mat psi = hd.adjoint() * hd + oracle::Mat::Identity(32, 32) / db_to_linear(10.0);
            const oracle::Vec res = psi * oracle::to_eigen(st.s) - hd.adjoint() * oracle::to_eigen(in.r);
            CHECK(res.cwiseAbs().maxCoeff() <= 1e-8);
        }
        CHECK(checked >= 10);
    }
    SUBCASE("literal d_n charging changes counts only") {
        auto in = draw(32, 3, 10.0, c, 10);
        DaftOperator op(in.cfg);
        const auto h = build_td_matrix(in.real, in.cfg);
        MrcTdOptions hoisted, literal;
        literal.literal_dn_count = true;
        const auto a = detect_mrc_td(in.r, h, 10.0, op, hoisted, c);
        const auto b = detect_mrc_td(in.r, h, 10.0, op, literal, c);
        CHECK(max_abs_diff(a.soft, b.soft) == 0.0);
        CHECK(b.ops.complex_multiplications > a.ops.complex_multiplications);
    }
    SUBCASE("all-zero column is flagged") {
        const auto cfg = zp(4, 1);
        DaftOperator op(cfg);
        ChannelRealization real;
        real.paths = {{0.0, 0, 0.0}};
        const CVector r{1.0, 1.0, 1.0, 1.0};
        const auto res = detect_mrc_td(r, build_td_matrix(real, cfg), 1e300, op, MrcTdOptions{}, c);
        CHECK(res.degenerate_columns == 4);
    }
    SUBCASE("options are validated") {
        MrcTdOptions bad;
        bad.max_iterations = 0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad.max_iterations = 1;
        bad.tolerance = 0.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }
}

TEST_CASE("MRC-TD sweeps are Gauss-Seidel sweeps on the time-domain normal equations") {
    // x <- (D + L)^{-1} (b - L^H x) for Psi = L + D + L^H, b = H^H r, from x = 0
    const auto c = Constellation::make(ModulationKind::Qpsk);
    const double snr = db_to_linear(15.0);
    for (std::uint64_t t = 0; t < 5; ++t) {
        auto in = draw(64, 2, snr, c, 2000 + t);
        const auto h = build_td_matrix(in.real, in.cfg);
        const oracle::Mat hd = oracle::to_eigen(h.to_dense());
        const oracle::Mat psi = hd.adjoint() * hd + oracle::Mat::Identity(64, 64) / snr;
        const oracle::Mat dl = psi.triangularView<Eigen::Lower>();
        const oracle::Mat u = psi.triangularView<Eigen::StrictlyUpper>();
        const oracle::Vec b = hd.adjoint() * oracle::to_eigen(in.r);
        oracle::Vec x = oracle::Vec::Zero(64);
        MrcTdOptions opt;
        opt.tolerance = std::numeric_limits<double>::denorm_min();
        for (std::size_t k = 1; k <= 40; ++k) {
            x = dl.triangularView<Eigen::Lower>().solve(b - u * x);
            if (k % 10 != 0) continue;
            opt.max_iterations = k;
            CHECK(oracle::max_diff(x, mrc_td_iterate(in.r, h, snr, opt).s) <= 1e-10 * x.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("slicing") {
    const auto bpsk = Constellation::make(ModulationKind::Bpsk);
    const CVector soft{0.1};
    CHECK(bpsk.points[slice(soft, bpsk)[0]].real() > 0.0);
    const auto qpsk = Constellation::make(ModulationKind::Qpsk);
    CHECK(slice(qpsk.points, qpsk) == std::vector<unsigned>{0, 1, 2, 3});
    const CVector origin{0.0};
    CHECK(slice(origin, qpsk)[0] == 0);
}

TEST_CASE("ML frame errors do not exceed the linear detectors'") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    const double snr = db_to_linear(10.0);
    int ml = 0, conv = 0, banded = 0, mrc = 0;
    for (std::uint64_t t = 0; t < 10000; ++t) {
        auto in = draw(4, 1, snr, c, 50000 + t);
        DaftOperator op(in.cfg);
        const auto h = build_td_matrix(in.real, in.cfg);
        const auto heff = effective_matrix(h, op);
        const auto truth = slice(in.x, c);
        ml += detect_ml(in.y, heff, c).hard != truth;
        conv += detect_mmse_conventional(in.y, heff, snr, c).hard != truth;
        banded += detect_mmse_banded(in.r, h, snr, op, c).hard != truth;
        mrc += detect_mrc_td(in.r, h, snr, op, MrcTdOptions{}, c).hard != truth;
    }
    CHECK(ml <= conv);
    CHECK(ml <= banded);
    CHECK(ml <= mrc);
}

TEST_CASE("detection is deterministic") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    auto in = draw(32, 3, 10.0, c, 77);
    DaftOperator op(in.cfg);
    const auto h = build_td_matrix(in.real, in.cfg);
    const auto a = detect_mrc_td(in.r, h, 10.0, op, MrcTdOptions{}, c);
    const auto b = detect_mrc_td(in.r, h, 10.0, op, MrcTdOptions{}, c);
    CHECK(max_abs_diff(a.soft, b.soft) == 0.0);
    CHECK(a.ops.complex_multiplications == b.ops.complex_multiplications);
    const auto d = detect_mmse_banded(in.r, h, 10.0, op, c);
    const auto e = detect_mmse_banded(in.r, h, 10.0, op, c);
    CHECK(max_abs_diff(d.soft, e.soft) == 0.0);
}

}  // TEST_SUITE

TEST_SUITE("mrc_convergence") {

TEST_CASE("convergence census, N=64, Q=2, 15 dB") {
    const auto c = Constellation::make(ModulationKind::Qpsk);
    MrcTdOptions opt;  // K = 30, epsilon = 1e-8
    const double snr = db_to_linear(15.0);
    int converged = 0;
    for (std::uint64_t t = 0; t < 1000; ++t) {
        auto in = draw(64, 2, snr, c, 1000 + t);
        converged += mrc_td_iterate(in.r, build_td_matrix(in.real, in.cfg), snr, opt).converged;
    }
    CHECK(converged >= 990);
}

}  // TEST_SUITE
