#include "zpafdm/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

namespace zpafdm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

cplx doppler_phase(double doppler, double t, std::size_t n) {
    return std::polar(1.0, -kTwoPi * doppler * t / static_cast<double>(n));
}

// exp(-j 2 pi nu t / N) for t = t0, t0 + 1, ...; advanced by a unit-step rotation
// and re-evaluated exactly every 32 samples.
class DopplerRamp {
public:
    DopplerRamp(double doppler, double t0, std::size_t n)
        : doppler_(doppler), t_(t0), n_(n), step_(doppler_phase(doppler, 1.0, n)) {}

    cplx next() {
        if (count_++ % 32 == 0) cur_ = doppler_phase(doppler_, t_, n_);
        const cplx v = cur_;
        cur_ *= step_;
        t_ += 1.0;
        return v;
    }

private:
    double doppler_;
    double t_;
    std::size_t n_;
    cplx step_;
    cplx cur_;
    std::size_t count_ = 0;
};

std::vector<std::size_t> distinct_delays(const ChannelRealization& real) {
    std::set<std::size_t> s;
    for (const auto& p : real.paths) s.insert(p.delay);
    return {s.begin(), s.end()};
}

}  // namespace

// SplitMix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return Rng(mix64(mix64(mix64(seed) ^ stream) ^ index));
}

ChannelProfile ChannelProfile::consecutive(std::size_t paths, double nu_max) {
    ChannelProfile p;
    p.paths = paths;
    p.nu_max = nu_max;
    p.delays.resize(paths);
    for (std::size_t i = 0; i < paths; ++i) p.delays[i] = i;
    return p;
}

std::size_t ChannelProfile::max_delay() const {
    return delays.empty() ? 0 : *std::max_element(delays.begin(), delays.end());
}

void ChannelProfile::validate() const {
    if (paths == 0) throw std::invalid_argument("ChannelProfile: at least one path required");
    if (delays.size() != paths)
        throw std::invalid_argument("ChannelProfile: " + std::to_string(delays.size()) + " delays for " +
                                    std::to_string(paths) + " paths");
    if (std::set<std::size_t>(delays.begin(), delays.end()).size() != delays.size())
        throw std::invalid_argument("ChannelProfile: delays must be distinct");
    if (!(nu_max >= 0.0) || !std::isfinite(nu_max))
        throw std::invalid_argument("ChannelProfile: nu_max must be finite and non-negative");
}

std::size_t ChannelRealization::max_delay() const {
    std::size_t q = 0;
    for (const auto& p : paths) q = std::max(q, p.delay);
    return q;
}

cplx complex_gaussian(Rng& rng, double variance) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
    const double re = gauss(rng);
    const double im = gauss(rng);
    return {re, im};
}

ChannelRealization sample_realization(const ChannelProfile& profile, Rng& rng) {
    profile.validate();
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    ChannelRealization real;
    real.paths.reserve(profile.paths);
    for (std::size_t i = 0; i < profile.paths; ++i) {
        const cplx gain = complex_gaussian(rng, profile.gain_variance());
        const double doppler = profile.nu_max * std::cos(angle(rng));
        real.paths.push_back({gain, profile.delays[i], doppler});
    }
    return real;
}

// ---------------------------------------------------------------------------
// TdChannelMatrix
// ---------------------------------------------------------------------------

TdChannelMatrix::TdChannelMatrix(BandedLowerTriangular band, std::vector<std::size_t> delays)
    : mode_(PrefixMode::ZeroPad), n_(band.dim()), delays_(std::move(delays)), band_(std::move(band)) {}

TdChannelMatrix::TdChannelMatrix(CMatrix dense, std::vector<std::size_t> delays)
    : mode_(PrefixMode::CyclicPrefix), n_(dense.rows()), delays_(std::move(delays)), dense_(std::move(dense)) {}

const BandedLowerTriangular& TdChannelMatrix::banded() const {
    if (mode_ != PrefixMode::ZeroPad) throw std::logic_error("TdChannelMatrix: banded form requires zero padding");
    return band_;
}

cplx TdChannelMatrix::operator()(std::size_t p, std::size_t n) const {
    return mode_ == PrefixMode::ZeroPad ? band_(p, n) : dense_(p, n);
}

CVector TdChannelMatrix::multiply(std::span<const cplx> s, OpCounter* ops) const {
    if (mode_ == PrefixMode::ZeroPad) return band_.multiply(s, ops);
    if (s.size() != n_) throw std::invalid_argument("TdChannelMatrix::multiply: length mismatch");
    // each row holds one (possibly wrapped) entry per distinct delay
    CVector out(n_);
    for (std::size_t p = 0; p < n_; ++p) {
        cplx acc;
        for (std::size_t l : delays_) {
            const std::size_t col = p >= l ? p - l : p + n_ - l;
            acc += dense_(p, col) * s[col];
        }
        out[p] = acc;
    }
    count_mul(ops, n_ * delays_.size());
    return out;
}

CMatrix TdChannelMatrix::to_dense() const {
    return mode_ == PrefixMode::ZeroPad ? band_.to_dense() : dense_;
}

TdChannelMatrix build_td_matrix(const ChannelRealization& real, const AfdmConfig& config) {
    config.validate();
    const std::size_t n = config.n;
    for (const auto& path : real.paths)
        if (path.delay >= n)
            throw std::invalid_argument("build_td_matrix: delay " + std::to_string(path.delay) +
                                        " not below N = " + std::to_string(n));
    auto delays = distinct_delays(real);

    if (config.prefix == PrefixMode::ZeroPad) {
        BandedLowerTriangular band(n, real.max_delay());
        for (const auto& path : real.paths) {
            DopplerRamp ramp(path.doppler, double(path.delay), n);
            for (std::size_t p = path.delay; p < n; ++p) band.ref(p, p - path.delay) += path.gain * ramp.next();
        }
        return {std::move(band), std::move(delays)};
    }

    const double nd = static_cast<double>(n);
    CMatrix dense(n, n);
    for (const auto& path : real.paths) {
        DopplerRamp ramp(path.doppler, 0.0, n);
        for (std::size_t p = 0; p < n; ++p) {
            cplx v = path.gain * ramp.next();
            std::size_t col;
            if (p >= path.delay) {
                col = p - path.delay;
            } else {
                col = p + n - path.delay;
                const double t = double(p) - double(path.delay);
                double cycles = config.c1 * (nd * nd + 2.0 * nd * t);
                cycles -= std::floor(cycles);
                v *= std::polar(1.0, -kTwoPi * cycles);
            }
            dense(p, col) += v;
        }
    }
    return {std::move(dense), std::move(delays)};
}

CVector propagate(std::span<const cplx> frame, const ChannelRealization& real, const AfdmConfig& config) {
    if (frame.size() != config.frame_len()) throw std::invalid_argument("propagate: frame length mismatch");
    const double offset = config.prefix == PrefixMode::ZeroPad ? 0.0 : static_cast<double>(config.guard_len);
    CVector out(frame.size());
    for (const auto& path : real.paths) {
        DopplerRamp ramp(path.doppler, static_cast<double>(path.delay) - offset, config.n);
        for (std::size_t k = path.delay; k < frame.size(); ++k)
            out[k] += path.gain * ramp.next() * frame[k - path.delay];
    }
    return out;
}

void add_awgn(std::span<cplx> signal, double noise_var, Rng& rng) {
    if (noise_var <= 0.0) return;
    for (auto& v : signal) v += complex_gaussian(rng, noise_var);
}

CVector apply_channel(std::span<const cplx> frame, const ChannelRealization& real, const AfdmConfig& config,
                      double noise_var, Rng& rng) {
    CVector out = propagate(frame, real, config);
    add_awgn(out, noise_var, rng);
    return out;
}

CMatrix effective_matrix(const TdChannelMatrix& h, const DaftOperator& op, OpCounter* ops) {
    const std::size_t n = op.size();
    if (h.dim() != n) throw std::invalid_argument("effective_matrix: dimension mismatch");
    if (const CMatrix* a = op.cached_dense()) {
        // no fast transform for this length: A (H A^H) by dense products
        CMatrix ha(n, n);
        CVector col(n);
        for (std::size_t q = 0; q < n; ++q) {
            for (std::size_t k = 0; k < n; ++k) col[k] = std::conj((*a)(q, k));
            ha.set_column(q, h.multiply(col, ops));
        }
        count_mul(ops, n * n * n);
        return *a * ha;
    }
    CMatrix heff(n, n);
    CVector unit(n);
    for (std::size_t q = 0; q < n; ++q) {
        std::fill(unit.begin(), unit.end(), cplx{});
        unit[q] = 1.0;
        const CVector col = op.daft(h.multiply(op.idaft(unit, ops), ops), ops);
        heff.set_column(q, col);
    }
    return heff;
}

cplx subchannel_entry(std::size_t delay, double doppler, std::size_t p, std::size_t q, const AfdmConfig& config) {
    const std::size_t n = config.n;
    if (p >= n || q >= n) throw std::out_of_range("subchannel_entry: index outside [0, N)");
    if (delay >= n) throw std::invalid_argument("subchannel_entry: delay not below N");
    const double nd = static_cast<double>(n);
    const double ld = static_cast<double>(delay);

    // per-sample phase step of zeta, reduced to (-pi, pi]
    const double step_cycles = (double(p) - double(q) + doppler + 2.0 * nd * config.c1 * ld) / nd;
    double delta = kTwoPi * (step_cycles - std::round(step_cycles));

    cplx zeta;
    if (std::abs(delta) < 1e-9) {
        for (std::size_t k = delay; k < n; ++k) zeta += std::polar(1.0, -delta * double(k));
    } else {
        const cplx w_l = std::polar(1.0, -delta * ld);
        const cplx w_n = std::polar(1.0, -delta * nd);
        zeta = (w_l - w_n) / (1.0 - std::polar(1.0, -delta));
    }

    double cycles = config.c1 * ld * ld - double((q * delay) % n) / nd +
                    config.c2 * (double(q) * double(q) - double(p) * double(p));
    cycles -= std::floor(cycles);
    return std::polar(1.0 / nd, kTwoPi * cycles) * zeta;
}

CMatrix subchannel_matrix(std::size_t delay, double doppler, const AfdmConfig& config) {
    CMatrix m(config.n, config.n);
    for (std::size_t p = 0; p < config.n; ++p)
        for (std::size_t q = 0; q < config.n; ++q) m(p, q) = subchannel_entry(delay, doppler, p, q, config);
    return m;
}

}  // namespace zpafdm
