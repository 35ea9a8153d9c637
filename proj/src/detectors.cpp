#include "zpafdm/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace zpafdm {

std::string to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::Ml: return "ml";
        case DetectorKind::MmseConventional: return "mmse-conv";
        case DetectorKind::MmseBanded: return "mmse-banded";
        case DetectorKind::MrcTd: return "mrc-td";
    }
    return "unknown";
}

DetectorKind parse_detector(const std::string& name) {
    if (name == "ml") return DetectorKind::Ml;
    if (name == "mmse-conv") return DetectorKind::MmseConventional;
    if (name == "mmse-banded") return DetectorKind::MmseBanded;
    if (name == "mrc-td") return DetectorKind::MrcTd;
    throw std::invalid_argument("unknown detector '" + name + "'");
}

void MrcTdOptions::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("MRC-TD: at least one iteration required");
    if (!(tolerance > 0.0)) throw std::invalid_argument("MRC-TD: tolerance must be positive");
}

namespace {

void check_snr(double snr) {
    if (!(snr > 0.0) || !std::isfinite(snr)) throw std::invalid_argument("detector: snr must be finite and positive");
}

const BandedLowerTriangular& zero_pad_band(const TdChannelMatrix& h) {
    if (h.mode() != PrefixMode::ZeroPad)
        throw std::invalid_argument("detector requires a zero-padded (lower-triangular) channel matrix");
    return h.banded();
}

}  // namespace

// ---------------------------------------------------------------------------
// ML
// ---------------------------------------------------------------------------

DetectionResult detect_ml(std::span<const cplx> y, const CMatrix& heff, const Constellation& c) {
    const std::size_t n = heff.cols();
    const std::size_t m = c.order();
    if (y.size() != heff.rows()) throw std::invalid_argument("detect_ml: length mismatch");
    if (n == 0) throw std::invalid_argument("detect_ml: empty system");

    double space = 1.0;
    for (std::size_t k = 0; k < n; ++k) space *= static_cast<double>(m);
    if (space > static_cast<double>(kMlSearchCap))
        throw CapExceededError("detect_ml: search space " + std::to_string(m) + "^" + std::to_string(n) +
                               " exceeds the cap of 2^20 candidates");

    DetectionResult res;
    const std::size_t rows = heff.rows();
    // contribution(k, a) = H_eff(:, k) * point a, stored contiguously
    CVector contribution(n * m * rows);
    auto contrib = [&](std::size_t k, std::size_t a) { return contribution.data() + (k * m + a) * rows; };
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t r = 0; r < rows; ++r) contrib(k, a)[r] = heff(r, k) * c.points[a];
    count_mul(&res.ops, n * m * rows);

    // Depth-first lexicographic enumeration; partial[k] = y - sum_{j<k} contribution[j][idx_j].
    CVector partial((n + 1) * rows);
    std::copy(y.begin(), y.end(), partial.begin());
    std::vector<unsigned> idx(n, 0);
    std::vector<unsigned> best(n, 0);
    double best_metric = std::numeric_limits<double>::infinity();
    std::uint64_t leaves = 0;

    std::size_t level = 0;
    bool more = true;
    while (more) {
        const cplx* add = contrib(level, idx[level]);
        const cplx* from = partial.data() + level * rows;
        cplx* to = partial.data() + (level + 1) * rows;
        for (std::size_t r = 0; r < rows; ++r) to[r] = from[r] - add[r];
        if (level + 1 < n) {
            ++level;
            idx[level] = 0;
            continue;
        }
        double metric = 0.0;
        for (std::size_t r = 0; r < rows; ++r) metric += abs2(partial[n * rows + r]);
        ++leaves;
        if (metric < best_metric) {
            best_metric = metric;
            best = idx;
        }
        // advance the odometer
        while (++idx[level] == m) {
            if (level == 0) {
                more = false;
                break;
            }
            --level;
        }
    }
    count_mul(&res.ops, leaves * rows);
    res.hard = best;
    res.soft.resize(n);
    for (std::size_t k = 0; k < n; ++k) res.soft[k] = c.points[best[k]];
    return res;
}

// ---------------------------------------------------------------------------
// Conventional MMSE
// ---------------------------------------------------------------------------

DetectionResult detect_mmse_conventional(std::span<const cplx> y, const CMatrix& heff, double snr,
                                         const Constellation& c) {
    check_snr(snr);
    const std::size_t n = heff.cols();
    if (heff.rows() != n || y.size() != n) throw std::invalid_argument("detect_mmse_conventional: dimension mismatch");

    // Lower triangle of H^H H + I/snr, accumulated row by row of H_eff.
    CMatrix gram(n, n);
    for (std::size_t p = 0; p < n; ++p) {
        const cplx* hp = &heff(p, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const cplx hc = std::conj(hp[i]);
            if (hc == cplx{}) continue;
            cplx* gi = &gram(i, 0);
            for (std::size_t j = 0; j <= i; ++j) gi[j] += hc * hp[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        gram(i, i) += 1.0 / snr;
        for (std::size_t j = 0; j < i; ++j) gram(j, i) = std::conj(gram(i, j));
    }

    CVector rhs(n);
    for (std::size_t p = 0; p < n; ++p) {
        const cplx* hp = &heff(p, 0);
        for (std::size_t i = 0; i < n; ++i) rhs[i] += std::conj(hp[i]) * y[p];
    }

    const CMatrix l = dense_cholesky(gram);

    DetectionResult res;
    res.soft = dense_cholesky_solve(l, rhs);
    res.hard = slice(res.soft, c);
    // Charged as the explicit-inverse flow G = (H^H H + I/snr)^{-1} H^H, x = G y:
    // Gram N^3, inverse N^3, G N^3, G y N^2.
    const std::uint64_t nn = n;
    count_mul(&res.ops, 3 * nn * nn * nn + nn * nn);
    count_add(&res.ops, 3 * nn * nn * (nn > 0 ? nn - 1 : 0) + nn * (nn > 0 ? nn - 1 : 0) + nn);
    return res;
}

// ---------------------------------------------------------------------------
// Banded MMSE
// ---------------------------------------------------------------------------

BandedHermitianMatrix assemble_regularized_gram(const BandedLowerTriangular& h, double snr, OpCounter* ops) {
    check_snr(snr);
    const std::size_t n = h.dim();
    const std::size_t q = h.bandwidth();
    BandedHermitianMatrix psi(n, q);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j_start = i >= q ? i - q : 0;
        for (std::size_t j = j_start; j <= i; ++j) {
            // columns i and j overlap on rows i..min(j + q, n - 1)
            const std::size_t p_end = std::min(j + q, n - 1);
            cplx acc{};
            for (std::size_t p = i; p <= p_end; ++p) acc += std::conj(h(p, i)) * h(p, j);
            count_mul(ops, p_end - i + 1);
            count_add(ops, p_end - i);
            if (j == i) acc += 1.0 / snr;
            psi.set_lower(i, j, acc);
        }
    }
    count_add(ops, n);
    return psi;
}

CVector matched_filter(const BandedLowerTriangular& h, std::span<const cplx> r, OpCounter* ops) {
    const std::size_t n = h.dim();
    const std::size_t q = h.bandwidth();
    if (r.size() != n) throw std::invalid_argument("matched_filter: length mismatch");
    CVector b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j_end = std::min(n - 1, i + q);
        cplx acc{};
        for (std::size_t p = i; p <= j_end; ++p) acc += std::conj(h(p, i)) * r[p];
        b[i] = acc;
        count_mul(ops, j_end - i + 1);
        count_add(ops, j_end - i);
    }
    return b;
}

DetectionResult detect_mmse_banded(std::span<const cplx> r, const TdChannelMatrix& h, double snr,
                                   const DaftOperator& op, const Constellation& c, const BandedMmseOptions& options) {
    const auto& band = zero_pad_band(h);
    if (r.size() != band.dim() || op.size() != band.dim())
        throw std::invalid_argument("detect_mmse_banded: dimension mismatch");

    DetectionResult res;
    const BandedHermitianMatrix psi = assemble_regularized_gram(band, snr, &res.ops);
    BandedLowerTriangular l = banded_cholesky(psi, &res.ops);
    if (options.factor_hook) options.factor_hook(l);
    const CVector b = matched_filter(band, r, &res.ops);
    const CVector z = forward_substitution(l, b, &res.ops);
    const CVector s = backward_substitution(l, z, &res.ops);
    res.soft = op.daft(s, &res.ops);
    res.hard = slice(res.soft, c);
    return res;
}

// ---------------------------------------------------------------------------
// MRC-TD
// ---------------------------------------------------------------------------

MrcTdState mrc_td_iterate(std::span<const cplx> r, const TdChannelMatrix& h, double snr, const MrcTdOptions& options,
                          OpCounter* ops) {
    check_snr(snr);
    options.validate();
    const auto& band = zero_pad_band(h);
    const std::size_t n = band.dim();
    if (r.size() != n) throw std::invalid_argument("detect_mrc_td: length mismatch");
    const auto& delays = h.delays();
    const double reg = 1.0 / snr;

    // column_energy[n] = d_n = sum over P_n of |H(p, n)|^2
    auto column_energy = [&](std::size_t col) {
        double d = 0.0;
        std::uint64_t terms = 0;
        for (std::size_t l : delays) {
            if (col + l >= n) break;
            d += abs2(band(col + l, col));
            ++terms;
        }
        count_mul(ops, terms);
        count_add(ops, terms);
        return d;
    };

    MrcTdState state;
    state.s.assign(n, cplx{});
    CVector residual(r.begin(), r.end());
    std::vector<double> energy(n);
    for (std::size_t col = 0; col < n; ++col) {
        energy[col] = column_energy(col);
        if (energy[col] == 0.0) ++state.degenerate_columns;
    }

    for (std::size_t k = 1; k <= options.max_iterations; ++k) {
        double change = 0.0;
        for (std::size_t col = 0; col < n; ++col) {
            const double d = options.literal_dn_count && k > 1 ? column_energy(col) : energy[col];
            cplx g = d * state.s[col];
            std::uint64_t terms = 0;
            for (std::size_t l : delays) {
                const std::size_t p = col + l;
                if (p >= n) break;
                g += std::conj(band(p, col)) * residual[p];
                ++terms;
            }
            const cplx updated = g / (d + reg);
            const cplx step = updated - state.s[col];
            for (std::size_t l : delays) {
                const std::size_t p = col + l;
                if (p >= n) break;
                residual[p] -= band(p, col) * step;
            }
            state.s[col] = updated;
            change += abs2(step);
            count_mul(ops, 2 * terms + 2);
            count_add(ops, 2 * terms + 2);
        }
        state.iterations = k;
        if (std::sqrt(change) < options.tolerance) {
            state.converged = true;
            break;
        }
    }
    return state;
}

DetectionResult detect_mrc_td(std::span<const cplx> r, const TdChannelMatrix& h, double snr, const DaftOperator& op,
                              const MrcTdOptions& options, const Constellation& c) {
    if (op.size() != h.dim()) throw std::invalid_argument("detect_mrc_td: dimension mismatch");
    DetectionResult res;
    MrcTdState state = mrc_td_iterate(r, h, snr, options, &res.ops);
    res.soft = op.daft(state.s, &res.ops);
    res.hard = slice(res.soft, c);
    res.iterations = state.iterations;
    res.converged = state.converged;
    res.degenerate_columns = state.degenerate_columns;
    return res;
}

}  // namespace zpafdm
