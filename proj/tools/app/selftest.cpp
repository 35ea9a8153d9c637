#include "app/selftest.hpp"

#include "app/commands.hpp"
#include "zpafdm/analysis.hpp"
#include "zpafdm/channel.hpp"
#include "zpafdm/detectors.hpp"
#include "zpafdm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>

namespace zpafdm::app {

namespace {

AfdmConfig zp_config(std::size_t n, std::size_t guard, double nu_max) {
    AfdmConfig c;
    c.n = n;
    c.guard_len = guard;
    c.prefix = PrefixMode::ZeroPad;
    const ChirpParams cp = default_chirp_params(nu_max, n);
    c.c1 = cp.c1;
    c.c2 = cp.c2;
    return c;
}

CVector random_vector(std::size_t n, Rng& rng) {
    CVector v(n);
    for (auto& x : v) x = complex_gaussian(rng, 1.0);
    return v;
}

CVector random_symbols(std::size_t n, const Constellation& c, Rng& rng) {
    std::uniform_int_distribution<unsigned> pick(0, static_cast<unsigned>(c.order() - 1));
    CVector v(n);
    for (auto& x : v) x = c.points[pick(rng)];
    return v;
}

// Dense A diag(exp(-j 2 pi nu p / N)) Pi^l A^H with the shift truncated at the
// frame edge, built by explicit matrix products.
CMatrix constructive_subchannel(const DaftOperator& op, std::size_t l, double nu) {
    const std::size_t n = op.size();
    CMatrix d(n, n);
    for (std::size_t p = 0; p < n; ++p)
        d(p, p) = std::polar(1.0, -2.0 * std::numbers::pi * nu * double(p) / double(n));
    CMatrix shift(n, n);
    for (std::size_t p = l; p < n; ++p) shift(p, p - l) = 1.0;
    const CMatrix a = op.dense();
    return a * d * shift * a.adjoint();
}

CheckResult make(const std::string& name, double measured, double tol, std::string detail = {}) {
    return {name, measured, tol, measured <= tol, std::move(detail)};
}

CheckResult daft_unitarity() {
    double worst = 0.0;
    for (std::size_t n : {16u, 12u}) {
        const DaftOperator op(zp_config(n, 4, 1.0));
        const CMatrix a = op.dense();
        worst = std::max(worst, (a.adjoint() * a).max_abs_diff(CMatrix::identity(n)));
    }
    return make("daft unitarity (N=16, N=12)", worst, 1e-10);
}

CheckResult daft_fast_vs_dense() {
    Rng rng = stream_rng(11, 0, 0);
    double worst = 0.0;
    for (std::size_t n : {16u, 12u}) {
        const DaftOperator op(zp_config(n, 4, 2.0));
        const CMatrix a = op.dense();
        const CVector v = random_vector(n, rng);
        worst = std::max(worst, max_abs_diff(op.daft(v), a.multiply(v)));
        worst = std::max(worst, max_abs_diff(op.idaft(v), a.adjoint().multiply(v)));
    }
    return make("fast daft/idaft vs dense matrix", worst, 1e-10);
}

CheckResult subchannel_closed_form() {
    const AfdmConfig cfg = zp_config(16, 4, 1.0);
    const DaftOperator op(cfg);
    double worst = 0.0;
    const double dopplers[] = {0.0, 0.37, -0.81, 1.0, -1.0, 0.5};
    for (std::size_t l = 0; l <= 4; ++l)
        for (double nu : dopplers)
            worst = std::max(worst, subchannel_matrix(l, nu, cfg).max_abs_diff(constructive_subchannel(op, l, nu)));
    return make("closed-form subchannel entries vs A D Pi A^H (N=16)", worst, 1e-9);
}

CheckResult effective_vs_subchannels() {
    const AfdmConfig cfg = zp_config(16, 3, 1.0);
    const DaftOperator op(cfg);
    const ChannelProfile profile = ChannelProfile::consecutive(4, 1.0);
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 5; ++t) {
        Rng rng = stream_rng(12, 0, t);
        const auto real = sample_realization(profile, rng);
        CMatrix sum(16, 16);
        for (const auto& p : real.paths) sum += subchannel_matrix(p.delay, p.doppler, cfg) * p.gain;
        worst = std::max(worst, effective_matrix(build_td_matrix(real, cfg), op).max_abs_diff(sum));
    }
    return make("effective channel vs sum of subchannels", worst, 1e-9);
}

CheckResult td_matrix_vs_propagation() {
    double worst = 0.0;
    for (PrefixMode mode : {PrefixMode::ZeroPad, PrefixMode::CyclicPrefix}) {
        AfdmConfig cfg = zp_config(16, 4, 1.0);
        cfg.prefix = mode;
        const ChannelProfile profile = ChannelProfile::consecutive(4, 1.0);
        for (std::uint64_t t = 0; t < 5; ++t) {
            Rng rng = stream_rng(13, std::uint64_t(mode), t);
            const auto real = sample_realization(profile, rng);
            const CVector s = random_vector(16, rng);
            const CVector r = strip_prefix(propagate(assemble_frame(s, cfg), real, cfg), cfg);
            worst = std::max(worst, max_abs_diff(r, build_td_matrix(real, cfg).multiply(s)));
        }
    }
    return make("channel matrix vs sample propagation (zp, cpp)", worst, 1e-10);
}

CheckResult cholesky_vs_dense() {
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 6; ++t) {
        Rng rng = stream_rng(14, 0, t);
        const std::size_t n = 20, q = 1 + t % 4;
        BandedLowerTriangular h(n, q);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = j; i < std::min(n, j + q + 1); ++i) h.ref(i, j) = complex_gaussian(rng, 1.0);
        const BandedHermitianMatrix psi = assemble_regularized_gram(h, 10.0);
        const CMatrix dense = dense_cholesky(psi.to_dense());
        worst = std::max(worst, banded_cholesky(psi).to_dense().max_abs_diff(dense));
    }
    return make("banded cholesky vs dense cholesky", worst, 1e-9);
}

CheckResult banded_vs_conventional(bool inject) {
    BandedMmseOptions options;
    if (inject)
        options.factor_hook = [](BandedLowerTriangular& l) {
            if (l.dim() > 2 && l.bandwidth() > 0) l.ref(2, 1) += 1e-3;
        };
    const Constellation c = Constellation::make(ModulationKind::Qpsk);
    double worst = 0.0;
    std::size_t hard_mismatch = 0, trials = 0;
    for (std::size_t q : {2u, 4u}) {
        const AfdmConfig cfg = zp_config(16, q, 1.0);
        const DaftOperator op(cfg);
        const ChannelProfile profile = ChannelProfile::consecutive(q + 1, 1.0);
        for (std::uint64_t t = 0; t < 10; ++t) {
            Rng rng = stream_rng(15, q, t);
            const double snr = db_to_linear(5.0 * double(t % 5));
            const auto real = sample_realization(profile, rng);
            const TdChannelMatrix h = build_td_matrix(real, cfg);
            CVector r = h.multiply(op.idaft(random_symbols(16, c, rng)));
            add_awgn(r, 1.0 / snr, rng);
            const auto banded = detect_mmse_banded(r, h, snr, op, c, options);
            const auto conv = detect_mmse_conventional(op.daft(r), effective_matrix(h, op), snr, c);
            worst = std::max(worst, max_abs_diff(banded.soft, conv.soft));
            hard_mismatch += banded.hard != conv.hard;
            ++trials;
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu/%zu hard mismatches", hard_mismatch, trials);
    CheckResult res = make("banded vs conventional mmse estimates", worst, 1e-8, buf);
    res.passed = res.passed && hard_mismatch == 0;
    return res;
}

CheckResult mrc_fixed_point() {
    MrcTdOptions options;
    options.max_iterations = 100;
    options.tolerance = 1e-10;
    double worst = 0.0;
    std::size_t converged = 0, trials = 0;
    for (std::uint64_t t = 0; t < 20; ++t) {
        const std::size_t q = 1 + t % 4;
        const AfdmConfig cfg = zp_config(16, q, 1.0);
        const DaftOperator op(cfg);
        Rng rng = stream_rng(16, 0, t);
        const double snr = db_to_linear(5.0 + 5.0 * double(t % 4));
        const auto real = sample_realization(ChannelProfile::consecutive(q + 1, 1.0), rng);
        const TdChannelMatrix h = build_td_matrix(real, cfg);
        CVector r = h.multiply(random_vector(16, rng));
        add_awgn(r, 1.0 / snr, rng);
        const MrcTdState st = mrc_td_iterate(r, h, snr, options);
        ++trials;
        if (!st.converged) continue;
        ++converged;
        const BandedHermitianMatrix psi = assemble_regularized_gram(h.banded(), snr);
        worst = std::max(worst, max_abs_diff(psi.multiply(st.s), matched_filter(h.banded(), r)));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu/%zu converged", converged, trials);
    CheckResult res = make("mrc-td fixed point residual", worst, 1e-8, buf);
    res.passed = res.passed && converged > 0;
    return res;
}

CheckResult union_grouped_vs_naive() {
    double worst = 0.0;
    const struct {
        std::size_t n;
        ModulationKind m;
    } cases[] = {{4, ModulationKind::Bpsk}, {3, ModulationKind::Qpsk}};
    for (const auto& cs : cases) {
        const AfdmConfig cfg = zp_config(cs.n, 1, 1.0);
        const std::vector<PathGeometry> geometry{{0, 0.3}, {1, -0.7}};
        const SubchannelSet set(cfg, geometry);
        const Constellation c = Constellation::make(cs.m);
        for (double db : {0.0, 10.0, 20.0}) {
            const double snr = db_to_linear(db);
            const double grouped = ml_union_bound(set, c, snr, 2).raw;
            const double naive = ml_union_bound_naive(set, c, snr, 2).raw;
            worst = std::max(worst, std::abs(grouped - naive) / std::max(naive, 1e-300));
        }
    }
    return make("grouped vs naive union bound (relative)", worst, 1e-12);
}

CheckResult gray_mapping() {
    std::size_t failures = 0;
    double energy_err = 0.0;
    for (ModulationKind m : {ModulationKind::Bpsk, ModulationKind::Qpsk, ModulationKind::Qam16}) {
        const Constellation c = Constellation::make(m);
        double e = 0.0;
        for (const auto& p : c.points) e += std::norm(p);
        energy_err = std::max(energy_err, std::abs(e / double(c.order()) - 1.0));
        std::vector<unsigned> labels(c.order());
        for (unsigned k = 0; k < labels.size(); ++k) labels[k] = k;
        const auto bits = demap_symbols(labels, c);
        if (bits_to_indices(bits, c) != labels) ++failures;
        const CVector mapped = map_bits(bits, c);
        for (unsigned k = 0; k < labels.size(); ++k)
            if (std::abs(mapped[k] - c.points[k]) > 0.0) ++failures;
        // nearest neighbours differ in exactly one bit
        double dmin = 1e300;
        for (unsigned a = 0; a < c.order(); ++a)
            for (unsigned b = a + 1; b < c.order(); ++b) dmin = std::min(dmin, std::abs(c.points[a] - c.points[b]));
        for (unsigned a = 0; a < c.order(); ++a)
            for (unsigned b = a + 1; b < c.order(); ++b)
                if (std::abs(std::abs(c.points[a] - c.points[b]) - dmin) < 1e-9 && c.bit_errors(a, b) != 1)
                    ++failures;
    }
    CheckResult res = make("gray mapping bijection and adjacency", energy_err, 1e-12,
                           std::to_string(failures) + " label failures");
    res.passed = res.passed && failures == 0;
    return res;
}

CheckResult mmse_bias_range() {
    const AfdmConfig cfg = zp_config(16, 3, 1.0);
    const DaftOperator op(cfg);
    double worst_ber = 0.0;
    std::size_t bad = 0;
    for (std::uint64_t t = 0; t < 5; ++t) {
        Rng rng = stream_rng(17, 0, t);
        const auto real = sample_realization(ChannelProfile::consecutive(4, 1.0), rng);
        const CMatrix heff = effective_matrix(build_td_matrix(real, cfg), op);
        const MmseBias bias = mmse_bias_matrix(heff, 10.0);
        for (double s : bias.sinr) bad += !(s > 0.0);
        worst_ber = std::max(worst_ber, mmse_theoretical_ber(heff, 10.0, ModulationKind::Qpsk));
    }
    CheckResult res = make("mmse sinr positive, ber at most 1/2", worst_ber, 0.5, std::to_string(bad) + " bad sinr");
    res.passed = res.passed && bad == 0;
    return res;
}

CheckResult pep_rank() {
    const AfdmConfig cfg = zp_config(6, 2, 1.0);
    const std::vector<PathGeometry> geometry{{0, 0.2}, {1, -0.6}, {2, 0.9}};
    const SubchannelSet set(cfg, geometry);
    Rng rng = stream_rng(18, 0, 0);
    std::size_t violations = 0;
    double most_negative = 0.0;
    for (int t = 0; t < 20; ++t) {
        const CVector delta = random_vector(6, rng);
        const auto ctx = pairwise_context(set, delta);
        violations += ctx.rank > set.paths();
        for (double e : ctx.eigenvalues) most_negative = std::min(most_negative, e);
    }
    CheckResult res = make("pairwise gram eigenvalues non-negative, rank <= P", -most_negative, 0.0,
                           std::to_string(violations) + " rank violations");
    res.passed = res.passed && violations == 0;
    return res;
}

CheckResult energy_audit() {
    const Constellation c = Constellation::make(ModulationKind::Qpsk);
    AfdmConfig zp = zp_config(16, 4, 1.0);
    AfdmConfig cpp = zp;
    cpp.prefix = PrefixMode::CyclicPrefix;
    const DaftOperator op(zp);
    Rng rng = stream_rng(19, 0, 0);
    double e_zp = 0.0, e_cpp = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const CVector s = op.idaft(random_symbols(16, c, rng));
        for (const auto& v : normalize_power(assemble_frame(s, zp), zp)) e_zp += std::norm(v);
        for (const auto& v : normalize_power(assemble_frame(s, cpp), cpp)) e_cpp += std::norm(v);
    }
    return make("zp vs cpp mean frame energy (relative)", std::abs(e_zp / e_cpp - 1.0), 0.005);
}

CheckResult worker_determinism(unsigned workers) {
    Config cfg;
    cfg.set("waveform.n", "8");
    cfg.set("waveform.guard", "2");
    cfg.set("channel.p", "3");
    cfg.set("sim.modulation", "qpsk");
    cfg.set("detector.arms", "zp-afdm/mmse-banded,zp-afdm/mrc-td,cpp-afdm/mmse-conv");
    cfg.set("sim.snr_db", "0,6,12");
    cfg.set("sim.target_errors", "40");
    cfg.set("sim.max_frames", "300");
    cfg.set("sim.batch_frames", "7");
    ResolvedRun run = resolve(cfg);
    auto render = [&](unsigned w) {
        run.experiment.workers = w;
        std::string all;
        for (const auto& curve : run_ber_sweep(run.experiment)) all += render_ber_csv(run, curve, "fixed");
        return all;
    };
    const bool same = render(1) == render(std::max(2u, workers));
    return {"bit-identical csv at 1 and " + std::to_string(std::max(2u, workers)) + " workers", same ? 0.0 : 1.0, 0.0,
            same, ""};
}

}  // namespace

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
    const std::vector<std::function<CheckResult()>> checks{
        daft_unitarity,
        daft_fast_vs_dense,
        subchannel_closed_form,
        effective_vs_subchannels,
        td_matrix_vs_propagation,
        cholesky_vs_dense,
        [&] { return banded_vs_conventional(options.inject_fault); },
        mrc_fixed_point,
        union_grouped_vs_naive,
        gray_mapping,
        mmse_bias_range,
        pep_rank,
        energy_audit,
        [&] { return worker_determinism(options.workers); },
    };
    std::vector<CheckResult> out;
    for (const auto& check : checks) {
        try {
            out.push_back(check());
        } catch (const std::exception& ex) {
            out.push_back({"(check threw)", 1.0, 0.0, false, ex.what()});
        }
    }
    return out;
}

bool print_selftest_report(const std::vector<CheckResult>& results, std::ostream& out) {
    std::size_t passed = 0;
    char line[256];
    for (const auto& r : results) {
        std::snprintf(line, sizeof line, "%-4s %-55s %11.3e <= %9.3e  %s\n", r.passed ? "ok" : "FAIL", r.name.c_str(),
                      r.measured, r.tolerance, r.detail.c_str());
        out << line;
        passed += r.passed;
    }
    out << passed << "/" << results.size() << " checks passed\n";
    return passed == results.size();
}

}  // namespace zpafdm::app
