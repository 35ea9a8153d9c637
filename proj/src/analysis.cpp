#include "zpafdm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace zpafdm {

ModulationBerConstants modulation_constants(ModulationKind kind) {
    switch (kind) {
        case ModulationKind::Bpsk: return {0.5, 1.0};
        case ModulationKind::Qpsk: return {0.5, 0.5};
        case ModulationKind::Qam16: return {0.375, 0.1};
    }
    throw std::invalid_argument("modulation_constants: unsupported modulation");
}

std::vector<PathGeometry> geometry_of(const ChannelRealization& real) {
    std::vector<PathGeometry> g;
    g.reserve(real.paths.size());
    for (const auto& p : real.paths) g.push_back({p.delay, p.doppler});
    return g;
}

// ---------------------------------------------------------------------------
// Pairwise error probability
// ---------------------------------------------------------------------------

SubchannelSet::SubchannelSet(const AfdmConfig& config, std::vector<PathGeometry> geometry)
    : config_(config), geometry_(std::move(geometry)) {
    config_.validate();
    matrices_.reserve(geometry_.size());
    for (const auto& g : geometry_) matrices_.push_back(subchannel_matrix(g.delay, g.doppler, config_));
}

CMatrix SubchannelSet::phi(std::span<const cplx> delta) const {
    if (delta.size() != dim()) throw std::invalid_argument("SubchannelSet::phi: length mismatch");
    CMatrix out(dim(), paths());
    for (std::size_t i = 0; i < paths(); ++i) out.set_column(i, matrices_[i].multiply(delta));
    return out;
}

namespace {

CMatrix gram_of(const CMatrix& phi) {
    const std::size_t p = phi.cols();
    CMatrix theta(p, p);
    for (std::size_t r = 0; r < phi.rows(); ++r)
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) theta(i, j) += std::conj(phi(r, i)) * phi(r, j);
    return theta;
}

// Eigenvalues of Theta(delta) for a SubchannelSet given precomputed H_i.
std::vector<double> pep_eigenvalues(const SubchannelSet& set, std::span<const cplx> delta) {
    return hermitian_eigenvalues(gram_of(set.phi(delta)));
}

}  // namespace

PairwiseErrorContext pairwise_context(const SubchannelSet& set, std::span<const cplx> delta) {
    PairwiseErrorContext ctx;
    ctx.delta.assign(delta.begin(), delta.end());
    ctx.phi = set.phi(delta);
    ctx.theta = gram_of(ctx.phi);
    ctx.eigenvalues = hermitian_eigenvalues(ctx.theta);
    for (auto& v : ctx.eigenvalues) v = std::max(v, 0.0);
    ctx.rank = numerical_rank(ctx.eigenvalues);
    return ctx;
}

double pep_conditional(const PairwiseErrorContext& ctx, std::span<const cplx> gains, double snr) {
    if (gains.size() != ctx.phi.cols()) throw std::invalid_argument("pep_conditional: gain count mismatch");
    const double energy = std::pow(norm2(ctx.phi.multiply(gains)), 2);
    return q_function_approx(std::sqrt(energy * snr / 2.0));
}

double pep_unconditional(std::span<const double> eigenvalues, double snr, std::size_t paths) {
    if (paths == 0) throw std::invalid_argument("pep_unconditional: at least one path required");
    const double p = static_cast<double>(paths);
    double prod4 = 1.0;
    double prod3 = 1.0;
    for (double lambda : eigenvalues) {
        const double l = std::max(lambda, 0.0);
        prod4 /= 1.0 + l * snr / (4.0 * p);
        prod3 /= 1.0 + l * snr / (3.0 * p);
    }
    return prod4 / 12.0 + prod3 / 4.0;
}

// ---------------------------------------------------------------------------
// Union bound
// ---------------------------------------------------------------------------

namespace {

void check_enumerable(std::size_t n, const Constellation& c) {
    double space = 1.0;
    for (std::size_t k = 0; k < n; ++k) space *= static_cast<double>(c.order());
    if (space > static_cast<double>(kUnionBoundCap))
        throw CapExceededError("ml_union_bound: " + std::to_string(c.order()) + "^" + std::to_string(n) +
                               " symbol vectors exceed the enumeration cap of 2^16");
}

struct DifferenceClass {
    cplx value;
    double pairs = 0.0;       // ordered symbol pairs (a, b) with a - b = value
    double bit_errors = 0.0;  // summed over those pairs
};

std::vector<DifferenceClass> difference_classes(const Constellation& c) {
    std::map<std::pair<long long, long long>, DifferenceClass> classes;
    for (unsigned a = 0; a < c.order(); ++a) {
        for (unsigned b = 0; b < c.order(); ++b) {
            const cplx d = c.points[a] - c.points[b];
            const auto key = std::make_pair(std::llround(d.real() * 1e9), std::llround(d.imag() * 1e9));
            auto& cls = classes[key];
            cls.value = d;
            cls.pairs += 1.0;
            cls.bit_errors += c.bit_errors(a, b);
        }
    }
    std::vector<DifferenceClass> out;
    // the zero difference goes first so the all-zero vector is the first enumerated
    for (auto& [key, cls] : classes)
        if (key.first == 0 && key.second == 0) out.insert(out.begin(), cls);
        else out.push_back(cls);
    return out;
}

double normalizer(std::size_t n, const Constellation& c) {
    return std::pow(static_cast<double>(c.order()), static_cast<double>(n)) * static_cast<double>(n) *
           static_cast<double>(c.bits_per_symbol);
}

}  // namespace

std::vector<UnionBound> ml_union_bound(const SubchannelSet& set, const Constellation& c,
                                       std::span<const double> snrs, std::size_t paths) {
    const std::size_t n = set.dim();
    check_enumerable(n, c);
    const auto classes = difference_classes(c);
    const std::size_t k = classes.size();

    std::vector<double> sums(snrs.size(), 0.0);
    std::vector<std::size_t> digit(n, 0);
    CVector delta(n);
    // digit vector 0...0 is the all-zero difference and is skipped
    while (true) {
        std::size_t pos = n;
        while (pos-- > 0) {
            if (++digit[pos] < k) break;
            digit[pos] = 0;
        }
        if (pos == static_cast<std::size_t>(-1)) break;

        double multiplicity = 1.0;
        double error_share = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const auto& cls = classes[digit[t]];
            delta[t] = cls.value;
            multiplicity *= cls.pairs;
            error_share += cls.bit_errors / cls.pairs;
        }
        const double weight = multiplicity * error_share;
        const auto eig = pep_eigenvalues(set, delta);
        for (std::size_t s = 0; s < snrs.size(); ++s) sums[s] += weight * pep_unconditional(eig, snrs[s], paths);
    }

    const double norm = normalizer(n, c);
    std::vector<UnionBound> out(snrs.size());
    for (std::size_t s = 0; s < snrs.size(); ++s) {
        out[s].raw = sums[s] / norm;
        out[s].clipped = std::min(out[s].raw, 1.0);
    }
    return out;
}

UnionBound ml_union_bound(const SubchannelSet& set, const Constellation& c, double snr, std::size_t paths) {
    const double snrs[] = {snr};
    return ml_union_bound(set, c, snrs, paths).front();
}

UnionBound ml_union_bound_naive(const SubchannelSet& set, const Constellation& c, double snr, std::size_t paths) {
    const std::size_t n = set.dim();
    check_enumerable(n, c);
    std::size_t total = 1;
    for (std::size_t t = 0; t < n; ++t) total *= c.order();

    auto decode = [&](std::size_t code) {
        std::vector<unsigned> idx(n);
        for (std::size_t t = n; t-- > 0;) {
            idx[t] = static_cast<unsigned>(code % c.order());
            code /= c.order();
        }
        return idx;
    };

    double sum = 0.0;
    CVector delta(n);
    for (std::size_t a = 0; a < total; ++a) {
        const auto x = decode(a);
        for (std::size_t b = 0; b < total; ++b) {
            if (a == b) continue;
            const auto xh = decode(b);
            double errors = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                delta[t] = c.points[x[t]] - c.points[xh[t]];
                errors += c.bit_errors(x[t], xh[t]);
            }
            const auto ctx = pairwise_context(set, delta);
            sum += pep_unconditional(ctx.eigenvalues, snr, paths) * errors;
        }
    }
    UnionBound out;
    out.raw = sum / normalizer(n, c);
    out.clipped = std::min(out.raw, 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// MMSE SINR analysis
// ---------------------------------------------------------------------------

MmseBias mmse_bias_matrix(const CMatrix& heff, double snr) {
    if (!(snr > 0.0) || !std::isfinite(snr)) throw std::invalid_argument("mmse_bias_matrix: snr must be finite and positive");
    const std::size_t n = heff.cols();
    if (heff.rows() != n) throw std::invalid_argument("mmse_bias_matrix: H_eff must be square");

    CMatrix gram(n, n);
    for (std::size_t p = 0; p < n; ++p) {
        const cplx* hp = &heff(p, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const cplx hc = std::conj(hp[i]);
            cplx* gi = &gram(i, 0);
            for (std::size_t j = 0; j < n; ++j) gi[j] += hc * hp[j];
        }
    }
    const double reg = 1.0 / snr;
    CMatrix psi = gram;
    for (std::size_t i = 0; i < n; ++i) psi(i, i) += reg;
    const CMatrix l = dense_cholesky(psi);

    // T = Psi^{-1} H^H H = I - reg * Psi^{-1}
    MmseBias out;
    out.t = CMatrix(n, n);
    CVector unit(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(unit.begin(), unit.end(), cplx{});
        unit[j] = 1.0;
        const CVector col = dense_cholesky_solve(l, unit);
        for (std::size_t i = 0; i < n; ++i) out.t(i, j) = (i == j ? 1.0 : 0.0) - reg * col[i];
    }

    out.sinr.resize(n);
    constexpr double tol = 1e-10;
    for (std::size_t i = 0; i < n; ++i) {
        const cplx d = out.t(i, i);
        if (std::abs(d.imag()) > tol || d.real() < -tol || d.real() > 1.0 + tol)
            throw std::runtime_error("mmse_bias_matrix: diagonal entry " + std::to_string(i) +
                                     " outside (0, 1); internal consistency failure");
        const double t = std::clamp(d.real(), 0.0, 1.0);
        out.sinr[i] = t < 1.0 ? t / (1.0 - t) : std::numeric_limits<double>::infinity();
    }
    return out;
}

double mmse_ber_from_sinr(std::span<const double> sinr, ModulationBerConstants k) {
    if (sinr.empty()) return 0.0;
    double sum = 0.0;
    for (double beta : sinr) sum += k.a_m * erfc(std::sqrt(k.b_m * beta));
    return sum / static_cast<double>(sinr.size());
}

double mmse_theoretical_ber(const CMatrix& heff, double snr, ModulationKind modulation) {
    return mmse_ber_from_sinr(mmse_bias_matrix(heff, snr).sinr, modulation_constants(modulation));
}

namespace {

CMatrix gram_lower(const CMatrix& heff) {
    const std::size_t n = heff.cols();
    CMatrix gram(n, n);
    for (std::size_t p = 0; p < n; ++p) {
        const cplx* hp = &heff(p, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const cplx hc = std::conj(hp[i]);
            cplx* gi = &gram(i, 0);
            for (std::size_t j = 0; j <= i; ++j) gi[j] += hc * hp[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) gram(j, i) = std::conj(gram(i, j));
    return gram;
}

// SINR from the diagonal of Psi^{-1} = L^{-H} L^{-1}: T(i,i) = 1 - reg * sum_k |L^{-1}(k, i)|^2.
std::vector<double> sinr_from_gram(const CMatrix& gram, double snr) {
    const std::size_t n = gram.rows();
    const double reg = 1.0 / snr;
    CMatrix psi = gram;
    for (std::size_t i = 0; i < n; ++i) psi(i, i) += reg;
    const CMatrix l = dense_cholesky(psi);

    // column i of L^{-1} by forward substitution; it is zero above row i
    std::vector<double> inv_diag(n, 0.0);
    CVector col(n);
    for (std::size_t i = 0; i < n; ++i) {
        double energy = 0.0;
        for (std::size_t k = i; k < n; ++k) {
            cplx acc = k == i ? cplx{1.0} : cplx{};
            const cplx* lk = &l(k, 0);
            for (std::size_t j = i; j < k; ++j) acc -= lk[j] * col[j];
            col[k] = acc / lk[k];
            energy += abs2(col[k]);
        }
        inv_diag[i] = energy;
    }
    std::vector<double> sinr(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::clamp(1.0 - reg * inv_diag[i], 0.0, 1.0);
        sinr[i] = t < 1.0 ? t / (1.0 - t) : std::numeric_limits<double>::infinity();
    }
    return sinr;
}

}  // namespace

std::vector<TheoryEstimate> mmse_theoretical_ber(const AfdmConfig& config, const ChannelProfile& profile,
                                                 std::span<const double> snrs, ModulationKind modulation,
                                                 std::size_t realizations, std::uint64_t seed) {
    if (realizations == 0) throw std::invalid_argument("mmse_theoretical_ber: at least one realization required");
    const DaftOperator op(config);
    const auto k = modulation_constants(modulation);
    std::vector<double> sum(snrs.size(), 0.0);
    std::vector<double> sum_sq(snrs.size(), 0.0);
    for (std::size_t r = 0; r < realizations; ++r) {
        Rng rng = stream_rng(seed, 0, r);
        const auto real = sample_realization(profile, rng);
        const CMatrix gram = gram_lower(effective_matrix(build_td_matrix(real, config), op));
        for (std::size_t s = 0; s < snrs.size(); ++s) {
            const double ber = mmse_ber_from_sinr(sinr_from_gram(gram, snrs[s]), k);
            sum[s] += ber;
            sum_sq[s] += ber * ber;
        }
    }
    const double count = static_cast<double>(realizations);
    std::vector<TheoryEstimate> out(snrs.size());
    for (std::size_t s = 0; s < snrs.size(); ++s) {
        out[s].mean = sum[s] / count;
        const double var = realizations > 1 ? std::max(0.0, (sum_sq[s] - count * out[s].mean * out[s].mean) / (count - 1.0)) : 0.0;
        out[s].std_err = std::sqrt(var / count);
    }
    return out;
}

}  // namespace zpafdm
