#pragma once

#include "zpafdm/channel.hpp"
#include "zpafdm/modulation.hpp"
#include "zpafdm/numerics.hpp"
#include "zpafdm/waveform.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace zpafdm {

/// Constants of the Gray-coded erfc-form BER approximation a * erfc(sqrt(b * sinr)).
struct ModulationBerConstants {
    double a_m;
    double b_m;
};

/// BPSK (1/2, 1), QPSK (1/2, 1/2), 16QAM (3/8, 1/10).
ModulationBerConstants modulation_constants(ModulationKind kind);

struct PathGeometry {
    std::size_t delay;
    double doppler;
};

std::vector<PathGeometry> geometry_of(const ChannelRealization& real);

/// The per-path zero-padded subchannel matrices H_i of one delay/Doppler geometry.
class SubchannelSet {
public:
    SubchannelSet(const AfdmConfig& config, std::vector<PathGeometry> geometry);

    std::size_t dim() const { return config_.n; }
    std::size_t paths() const { return matrices_.size(); }
    const CMatrix& matrix(std::size_t i) const { return matrices_[i]; }
    const std::vector<PathGeometry>& geometry() const { return geometry_; }

    /// Phi(delta) = [H_1 delta, ..., H_P delta], N x P.
    CMatrix phi(std::span<const cplx> delta) const;

private:
    AfdmConfig config_;
    std::vector<PathGeometry> geometry_;
    std::vector<CMatrix> matrices_;
};

struct PairwiseErrorContext {
    CVector delta;
    CMatrix phi;
    CMatrix theta;                    // phi^H phi, P x P
    std::vector<double> eigenvalues;  // descending, non-negative
    std::size_t rank = 0;
};

PairwiseErrorContext pairwise_context(const SubchannelSet& set, std::span<const cplx> delta);

/// PEP conditioned on the path gains, using the two-exponential Q approximation.
double pep_conditional(const PairwiseErrorContext& ctx, std::span<const cplx> gains, double snr);

/// Rayleigh-averaged PEP
/// (1/12) prod 1/(1 + lambda snr / 4P) + (1/4) prod 1/(1 + lambda snr / 3P).
double pep_unconditional(std::span<const double> eigenvalues, double snr, std::size_t paths);

struct UnionBound {
    double raw = 0.0;
    double clipped = 0.0;  // min(raw, 1)
};

/// Largest M^N the union bound enumerates.
inline constexpr std::uint64_t kUnionBoundCap = std::uint64_t{1} << 16;

/// ML BER union bound over all ordered pairs x != x_hat. Pairs are grouped by their
/// difference vector, which alone fixes both the PEP and the summed bit-error weight.
std::vector<UnionBound> ml_union_bound(const SubchannelSet& set, const Constellation& c,
                                       std::span<const double> snrs, std::size_t paths);
UnionBound ml_union_bound(const SubchannelSet& set, const Constellation& c, double snr, std::size_t paths);

/// Reference double sum over every ordered pair, without grouping.
UnionBound ml_union_bound_naive(const SubchannelSet& set, const Constellation& c, double snr, std::size_t paths);

struct MmseBias {
    CMatrix t;                 // G_AF H_eff
    std::vector<double> sinr;  // T(i,i) / (1 - T(i,i))
};

/// Throws std::runtime_error when a diagonal entry of T is not real within 1e-10
/// or falls outside (0, 1) beyond that tolerance.
MmseBias mmse_bias_matrix(const CMatrix& heff, double snr);

/// (1/N) sum_i a_M erfc(sqrt(b_M sinr_i)) for one channel.
double mmse_ber_from_sinr(std::span<const double> sinr, ModulationBerConstants k);
double mmse_theoretical_ber(const CMatrix& heff, double snr, ModulationKind modulation);

struct TheoryEstimate {
    double mean = 0.0;
    double std_err = 0.0;
};

/// Closed-form MMSE BER averaged over independent channel realizations, one
/// estimate per detector-side SNR. Realization r draws from stream_rng(seed, 0, r).
std::vector<TheoryEstimate> mmse_theoretical_ber(const AfdmConfig& config, const ChannelProfile& profile,
                                                 std::span<const double> snrs, ModulationKind modulation,
                                                 std::size_t realizations, std::uint64_t seed);

}  // namespace zpafdm
