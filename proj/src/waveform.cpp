#include "zpafdm/waveform.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace zpafdm {

std::string to_string(PrefixMode mode) {
    return mode == PrefixMode::ZeroPad ? "zp" : "cpp";
}

void AfdmConfig::validate() const {
    if (n == 0) throw std::invalid_argument("AfdmConfig: N must be positive");
    if (!std::isfinite(c1) || !std::isfinite(c2)) throw std::invalid_argument("AfdmConfig: chirp rates must be finite");
    if (prefix == PrefixMode::CyclicPrefix && guard_len > n)
        throw std::invalid_argument("AfdmConfig: cyclic prefix longer than the frame");
}

ChirpParams default_chirp_params(double nu_max, std::size_t n) {
    if (nu_max < 0.0) throw std::invalid_argument("default_chirp_params: nu_max must be non-negative");
    if (n == 0) throw std::invalid_argument("default_chirp_params: N must be positive");
    const double nd = static_cast<double>(n);
    return {(2.0 * std::ceil(nu_max) + 1.0) / (2.0 * nd), 1.0 / (2.0 * nd * nd)};
}

cplx chirp_phase(double c, double k) {
    double cycles = c * k * k;
    cycles -= std::floor(cycles);
    const double angle = -2.0 * std::numbers::pi * cycles;
    return {std::cos(angle), std::sin(angle)};
}

DaftOperator::DaftOperator(const AfdmConfig& config) : config_(config), plan_(config.n) {
    config_.validate();
    chirp1_.resize(config_.n);
    chirp2_.resize(config_.n);
    for (std::size_t k = 0; k < config_.n; ++k) {
        chirp1_[k] = chirp_phase(config_.c1, static_cast<double>(k));
        chirp2_[k] = chirp_phase(config_.c2, static_cast<double>(k));
    }
    if (!plan_.is_fast()) dense_ = dense();
}

CVector DaftOperator::daft(std::span<const cplx> v, OpCounter* ops) const {
    if (v.size() != size()) throw std::invalid_argument("daft: length mismatch");
    CVector out(v.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = v[k] * chirp1_[k];
    plan_.transform(out, false, ops);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= chirp2_[k];
    count_mul(ops, 2 * out.size());
    return out;
}

CVector DaftOperator::idaft(std::span<const cplx> x, OpCounter* ops) const {
    if (x.size() != size()) throw std::invalid_argument("idaft: length mismatch");
    CVector out(x.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] * std::conj(chirp2_[k]);
    plan_.transform(out, true, ops);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= std::conj(chirp1_[k]);
    count_mul(ops, 2 * out.size());
    return out;
}

CMatrix DaftOperator::dense() const {
    const std::size_t n = size();
    const double nd = static_cast<double>(n);
    CMatrix a(n, n);
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t k = 0; k < n; ++k) {
            const double cycles = config_.c2 * double(m) * double(m) + double((m * k) % n) / nd +
                                  config_.c1 * double(k) * double(k);
            const double frac = cycles - std::floor(cycles);
            a(m, k) = std::polar(1.0 / std::sqrt(nd), -2.0 * std::numbers::pi * frac);
        }
    }
    return a;
}

CVector assemble_frame(std::span<const cplx> s, const AfdmConfig& config) {
    config.validate();
    if (s.size() != config.n) throw std::invalid_argument("assemble_frame: length mismatch");
    const std::size_t n = config.n;
    const std::size_t g = config.guard_len;
    CVector frame;
    frame.reserve(n + g);
    if (config.prefix == PrefixMode::ZeroPad) {
        frame.insert(frame.end(), s.begin(), s.end());
        frame.resize(n + g, cplx{});
        return frame;
    }
    // prefix sample at time t in [-g, -1] carries s[N + t] exp(-j 2 pi c1 (N^2 + 2 N t))
    const double nd = static_cast<double>(n);
    for (std::size_t k = 0; k < g; ++k) {
        const double t = static_cast<double>(k) - static_cast<double>(g);
        double cycles = config.c1 * (nd * nd + 2.0 * nd * t);
        cycles -= std::floor(cycles);
        frame.push_back(s[n - g + k] * std::polar(1.0, -2.0 * std::numbers::pi * cycles));
    }
    frame.insert(frame.end(), s.begin(), s.end());
    return frame;
}

CVector strip_prefix(std::span<const cplx> r, const AfdmConfig& config) {
    if (r.size() != config.frame_len()) throw std::invalid_argument("strip_prefix: length mismatch");
    const std::size_t offset = config.prefix == PrefixMode::ZeroPad ? 0 : config.guard_len;
    return CVector(r.begin() + offset, r.begin() + offset + config.n);
}

}  // namespace zpafdm
