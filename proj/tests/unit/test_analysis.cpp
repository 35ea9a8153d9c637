#include "oracle.hpp"

#include "zpafdm/analysis.hpp"
#include "zpafdm/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

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

std::vector<PathGeometry> random_geometry(std::size_t paths, std::uint64_t seed) {
    auto rng = stream_rng(seed, paths, 0);
    return geometry_of(sample_realization(ChannelProfile::consecutive(paths, 1.0), rng));
}

double gauss_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Exact Gray-labelled AWGN BER of a square constellation: per-axis decision
/// intervals between adjacent levels, symbol transition probabilities as the
/// product of the two axis probabilities.
double exact_awgn_ber(const Constellation& c, double snr) {
    std::set<double> re, im;
    for (auto p : c.points) re.insert(p.real()), im.insert(p.imag());
    const double sigma = std::sqrt(0.5 / snr);
    auto interval_prob = [&](const std::set<double>& levels, double sent, double target) {
        std::vector<double> l(levels.begin(), levels.end());
        const auto k = std::find(l.begin(), l.end(), target) - l.begin();
        const double lo = k == 0 ? -INFINITY : 0.5 * (l[k - 1] + l[k]);
        const double hi = k + 1 == static_cast<long>(l.size()) ? INFINITY : 0.5 * (l[k] + l[k + 1]);
        return gauss_tail((lo - sent) / sigma) - gauss_tail((hi - sent) / sigma);
    };
    double ber = 0.0;
    for (unsigned i = 0; i < c.order(); ++i)
        for (unsigned j = 0; j < c.order(); ++j) {
            const double pij = interval_prob(re, c.points[i].real(), c.points[j].real()) *
                               interval_prob(im, c.points[i].imag(), c.points[j].imag());
            ber += pij * c.bit_errors(i, j);
        }
    return ber / (c.order() * c.bits_per_symbol);
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("unconditional PEP scalar values") {
    const std::vector<double> ev{1.7, 0.4};
    CHECK(pep_unconditional(ev, 0.0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const std::vector<double> one{16.0};
    CHECK(pep_unconditional(one, 1.0, 4) == doctest::Approx(1.0 / 24.0 + 3.0 / 28.0).epsilon(1e-14));
}

TEST_CASE("PEP diversity order equals the rank") {
    const auto cfg = zp(6, 3);
    for (std::size_t p : {2u, 3u, 4u}) {
        SubchannelSet set(cfg, random_geometry(p, 1));
        const CVector delta{2.0, 0.0, -2.0, 0.0, 0.0, 2.0};
        const auto ctx = pairwise_context(set, delta);
        const double lo = std::log10(pep_unconditional(ctx.eigenvalues, db_to_linear(30.0), p));
        const double hi = std::log10(pep_unconditional(ctx.eigenvalues, db_to_linear(60.0), p));
        const double slope = (hi - lo) / 3.0;
        CHECK(std::abs(slope + static_cast<double>(ctx.rank)) <= 0.05);
        CHECK(ctx.rank <= p);
    }
}

TEST_CASE("PEP is symmetric under sign flip of the difference") {
    SubchannelSet set(zp(6, 3), random_geometry(3, 2));
    const CVector d{2.0, -2.0, 0.0, 2.0, 0.0, 0.0};
    CVector m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m[i] = -d[i];
    const auto a = pairwise_context(set, d), b = pairwise_context(set, m);
    for (double snr : {1.0, 10.0, 100.0})
        CHECK(pep_unconditional(a.eigenvalues, snr, 3) == pep_unconditional(b.eigenvalues, snr, 3));
}

TEST_CASE("Rayleigh average of the conditional PEP gives the closed form") {
    SubchannelSet set(zp(6, 3), random_geometry(3, 3));
    const CVector d{2.0, 0.0, 0.0, -2.0, 0.0, 0.0};
    const auto ctx = pairwise_context(set, d);
    const double snr = 5.0;
    auto rng = stream_rng(4, 0, 0);
    double mean = 0.0;
    const int draws = 200000;
    for (int t = 0; t < draws; ++t) {
        CVector h(3);
        for (auto& g : h) g = complex_gaussian(rng, 1.0 / 3.0);
        mean += pep_conditional(ctx, h, snr);
    }
    CHECK(mean / draws == doctest::Approx(pep_unconditional(ctx.eigenvalues, snr, 3)).epsilon(0.01));
}

TEST_CASE("phi and theta") {
    SubchannelSet set(zp(6, 3), random_geometry(4, 5));
    std::mt19937_64 rng(6);
    const auto d = oracle::to_cvector(oracle::random_vector(6, rng));
    const auto ctx = pairwise_context(set, d);
    REQUIRE(ctx.phi.rows() == 6);
    REQUIRE(ctx.phi.cols() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(max_abs_diff(ctx.phi.column(i), set.matrix(i).multiply(d)) < 1e-14);
    const oracle::Mat phi = oracle::to_eigen(ctx.phi);
    CHECK(oracle::max_diff(phi.adjoint() * phi, ctx.theta) < 1e-12);
}

TEST_CASE("union bound with one sample and one path") {
    AfdmConfig cfg;
    cfg.n = 1;
    cfg.guard_len = 0;
    SubchannelSet set(cfg, {{0, 0.0}});
    const auto bpsk = Constellation::make(ModulationKind::Bpsk);
    for (double snr : {0.0, 1.0, 10.0, 100.0}) {
        const double expected = (1.0 / 12.0) / (1.0 + snr) + 0.25 / (1.0 + 4.0 * snr / 3.0);
        CHECK(ml_union_bound(set, bpsk, snr, 1).raw == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("grouped union bound equals the naive double sum") {
    const auto bpsk = Constellation::make(ModulationKind::Bpsk);
    const auto qpsk = Constellation::make(ModulationKind::Qpsk);
    for (std::size_t n : {1u, 2u, 3u}) {
        const std::size_t paths = n == 1 ? 1 : 2;
        SubchannelSet set(zp(n, 1), random_geometry(paths, 10 + n));
        for (double snr : {0.3, 3.0, 30.0}) {
            CHECK(std::abs(ml_union_bound(set, bpsk, snr, paths).raw - ml_union_bound_naive(set, bpsk, snr, paths).raw) <=
                  1e-12);
            CHECK(std::abs(ml_union_bound(set, qpsk, snr, paths).raw - ml_union_bound_naive(set, qpsk, snr, paths).raw) <=
                  1e-12);
        }
    }
}

TEST_CASE("union bound: clipping, monotonicity and diversity ordering") {
    const auto bpsk = Constellation::make(ModulationKind::Bpsk);
    const auto cfg = zp(6, 3);
    std::vector<double> snrs;
    for (double db = 0; db <= 20; db += 5) snrs.push_back(db_to_linear(db));
    std::vector<double> at20;
    for (std::size_t p : {2u, 3u, 4u}) {
        std::vector<double> mean(snrs.size(), 0.0);
        for (std::uint64_t d = 0; d < 10; ++d) {
            const auto b = ml_union_bound(SubchannelSet(cfg, random_geometry(p, 100 + d)), bpsk, snrs, p);
            for (std::size_t k = 0; k < b.size(); ++k) {
                CHECK(b[k].clipped == std::min(1.0, b[k].raw));
                mean[k] += b[k].raw / 10.0;
            }
        }
        for (std::size_t k = 1; k < mean.size(); ++k) CHECK(mean[k] < mean[k - 1]);
        at20.push_back(mean.back());
    }
    CHECK(at20[2] < at20[1]);
    CHECK(at20[1] < at20[0]);
}

TEST_CASE("union bound refuses oversize enumerations") {
    SubchannelSet set(zp(9, 1), random_geometry(1, 7));
    CHECK_THROWS_AS(ml_union_bound(set, Constellation::make(ModulationKind::Qpsk), 1.0, 1), CapExceededError);
}

TEST_CASE("MMSE bias matrix") {
    SUBCASE("identity channel") {
        const double snr = 6.0;
        const auto b = mmse_bias_matrix(CMatrix::identity(4), snr);
        CHECK(b.t.max_abs_diff(CMatrix::identity(4) * cplx(snr / (1.0 + snr))) < 1e-14);
        for (double s : b.sinr) CHECK(s == doctest::Approx(snr).epsilon(1e-12));
    }
    auto rng = stream_rng(20, 0, 0);
    const auto cfg = zp(16, 3);
    const auto real = sample_realization(ChannelProfile::consecutive(4, 1.0), rng);
    DaftOperator op(cfg);
    const auto heff = effective_matrix(build_td_matrix(real, cfg), op);
    SUBCASE("T matches the explicit MMSE product") {
        const auto he = oracle::to_eigen(heff);
        const double snr = 3.0;
        const oracle::Mat g = (he.adjoint() * he + oracle::Mat::Identity(16, 16) / snr).inverse() * he.adjoint();
        CHECK(oracle::max_diff(g * he, mmse_bias_matrix(heff, snr).t) <= 1e-10);
    }
    SUBCASE("interference-plus-noise variance is T(1 - T)") {
        const double snr = db_to_linear(5.0);
        const auto he = oracle::to_eigen(heff);
        const oracle::Mat g = (he.adjoint() * he + oracle::Mat::Identity(16, 16) / snr).inverse() * he.adjoint();
        const auto bias = mmse_bias_matrix(heff, snr);
        const auto qpsk = Constellation::make(ModulationKind::Qpsk);
        std::vector<double> var(16, 0.0);
        std::uniform_int_distribution<unsigned> pick(0, 3);
        const int draws = 100000;
        for (int t = 0; t < draws; ++t) {
            oracle::Vec x(16);
            for (int i = 0; i < 16; ++i) x(i) = qpsk.points[pick(rng)];
            oracle::Vec w = oracle::random_vector(16, rng) / std::sqrt(snr);
            const oracle::Vec est = g * (he * x + w);
            for (int i = 0; i < 16; ++i) var[i] += std::norm(est(i) - bias.t(i, i) * x(i));
        }
        for (int i = 0; i < 16; ++i) {
            const double tii = bias.t(i, i).real();
            CHECK(var[i] / draws == doctest::Approx(tii * (1.0 - tii)).epsilon(0.03));
        }
    }
    SUBCASE("SINR grows with SNR and T tends to the identity") {
        std::vector<double> prev(16, 0.0);
        for (double db = 0; db <= 30; db += 2) {
            const auto b = mmse_bias_matrix(heff, db_to_linear(db));
            for (int i = 0; i < 16; ++i) {
                CHECK(b.sinr[i] > prev[i]);
                prev[i] = b.sinr[i];
            }
        }
        // the 60 dB limit needs a well-conditioned H_eff: dominant first tap
        ChannelRealization strong;
        strong.paths = {{cplx(1.0, 0.2), 0, 0.3}, {cplx(0.0, 0.3), 1, -0.5}, {cplx(0.2, -0.1), 2, 0.8}};
        const auto heff_strong = effective_matrix(build_td_matrix(strong, cfg), op);
        const auto b = mmse_bias_matrix(heff_strong, db_to_linear(60.0));
        cplx trace{};
        for (int i = 0; i < 16; ++i) {
            CHECK(std::abs(b.t(i, i) - 1.0) <= 1e-3);
            trace += b.t(i, i);
        }
        CHECK(std::abs(trace.imag()) < 1e-10);
    }
}

TEST_CASE("closed-form MMSE BER on the identity channel") {
    for (double db : {0.0, 5.0, 10.0}) {
        const double g = db_to_linear(db);
        CHECK(mmse_theoretical_ber(CMatrix::identity(8), g, ModulationKind::Bpsk) ==
              doctest::Approx(0.5 * std::erfc(std::sqrt(g))).epsilon(1e-12));
    }
    const double qpsk = mmse_theoretical_ber(CMatrix::identity(8), 10.0, ModulationKind::Qpsk);
    CHECK(qpsk == doctest::Approx(0.5 * std::erfc(std::sqrt(5.0))).epsilon(1e-12));
    CHECK(qpsk == doctest::Approx(7.83e-4).epsilon(2e-3));
}

TEST_CASE("modulation constants") {
    auto k = modulation_constants(ModulationKind::Bpsk);
    CHECK(k.a_m == 0.5);
    CHECK(k.b_m == 1.0);
    k = modulation_constants(ModulationKind::Qpsk);
    CHECK(k.a_m == 0.5);
    CHECK(k.b_m == 0.5);
    k = modulation_constants(ModulationKind::Qam16);
    CHECK(k.a_m == 0.375);
    CHECK(k.b_m == 0.1);
}

TEST_CASE("erfc-form constants against exact Gray AWGN BER") {
    for (auto kind : {ModulationKind::Bpsk, ModulationKind::Qpsk}) {
        const auto c = Constellation::make(kind);
        const auto k = modulation_constants(kind);
        for (double db : {0.0, 10.0, 20.0}) {
            const double g = db_to_linear(db);
            CHECK(k.a_m * std::erfc(std::sqrt(k.b_m * g)) == doctest::Approx(exact_awgn_ber(c, g)).epsilon(1e-9));
        }
    }
    const auto c = Constellation::make(ModulationKind::Qam16);
    const auto k = modulation_constants(ModulationKind::Qam16);
    for (double db : {10.0, 15.0, 20.0}) {
        const double g = db_to_linear(db);
        CHECK(k.a_m * std::erfc(std::sqrt(k.b_m * g)) == doctest::Approx(exact_awgn_ber(c, g)).epsilon(0.05));
    }
}

TEST_CASE("realization-averaged MMSE BER reports a standard error") {
    const auto cfg = zp(16, 2);
    const std::vector<double> snrs{1.0, 10.0};
    const auto est = mmse_theoretical_ber(cfg, ChannelProfile::consecutive(3, 1.0), snrs, ModulationKind::Qpsk, 50, 9);
    REQUIRE(est.size() == 2);
    CHECK(est[0].mean > est[1].mean);
    CHECK(est[0].std_err > 0.0);
    CHECK(est[0].std_err < est[0].mean);
    const auto again = mmse_theoretical_ber(cfg, ChannelProfile::consecutive(3, 1.0), snrs, ModulationKind::Qpsk, 50, 9);
    CHECK(again[1].mean == est[1].mean);
}

}  // TEST_SUITE
