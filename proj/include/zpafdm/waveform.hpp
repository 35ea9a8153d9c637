#pragma once

#include "zpafdm/numerics.hpp"

#include <cstddef>
#include <span>
#include <string>

namespace zpafdm {

enum class PrefixMode { ZeroPad, CyclicPrefix };

std::string to_string(PrefixMode mode);

/// Frame geometry and chirp rates. c1 = c2 = 0 turns the chirp transform into a
/// plain DFT, i.e. OFDM.
struct AfdmConfig {
    std::size_t n = 64;
    std::size_t guard_len = 16;
    PrefixMode prefix = PrefixMode::ZeroPad;
    double c1 = 0.0;
    double c2 = 0.0;

    std::size_t frame_len() const { return n + guard_len; }
    /// Throws std::invalid_argument on an unusable geometry.
    void validate() const;
};

struct ChirpParams {
    double c1;
    double c2;
};

/// c1 = (2 ceil(nu_max) + 1) / (2N), c2 = 1 / (2N^2).
ChirpParams default_chirp_params(double nu_max, std::size_t n);

/// Discrete affine Fourier transform A = L(c2) F L(c1), with
/// L(c) = diag(exp(-j 2 pi c n^2)). Immutable once built.
class DaftOperator {
public:
    explicit DaftOperator(const AfdmConfig& config);

    std::size_t size() const { return plan_.size(); }
    const AfdmConfig& config() const { return config_; }

    /// A v: time domain to affine-frequency domain.
    CVector daft(std::span<const cplx> v, OpCounter* ops = nullptr) const;
    /// A^H x: affine-frequency domain to time domain.
    CVector idaft(std::span<const cplx> x, OpCounter* ops = nullptr) const;

    /// Dense A, built entrywise from its definition.
    CMatrix dense() const;
    /// Dense A kept for lengths without a fast transform, else nullptr.
    const CMatrix* cached_dense() const { return dense_.rows() ? &dense_ : nullptr; }

private:
    AfdmConfig config_;
    FftPlan plan_;
    std::vector<cplx> chirp1_;  // exp(-j 2 pi c1 n^2)
    std::vector<cplx> chirp2_;  // exp(-j 2 pi c2 m^2)
    CMatrix dense_;
};

/// exp(-j 2 pi c k^2) with the phase reduced modulo one cycle before use.
cplx chirp_phase(double c, double k);

/// Appends guard_len zeros (ZeroPad) or prepends the chirp-periodic prefix
/// (CyclicPrefix).
CVector assemble_frame(std::span<const cplx> s, const AfdmConfig& config);

/// Receiver view: the N data samples of a received frame (samples 0..N-1 for
/// ZeroPad, guard_len..guard_len+N-1 for CyclicPrefix).
CVector strip_prefix(std::span<const cplx> r, const AfdmConfig& config);

}  // namespace zpafdm
