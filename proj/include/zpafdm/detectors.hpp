#pragma once

#include "zpafdm/channel.hpp"
#include "zpafdm/modulation.hpp"
#include "zpafdm/numerics.hpp"
#include "zpafdm/waveform.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace zpafdm {

enum class DetectorKind { Ml, MmseConventional, MmseBanded, MrcTd };

std::string to_string(DetectorKind kind);
/// Accepts "ml", "mmse-conv", "mmse-banded", "mrc-td".
DetectorKind parse_detector(const std::string& name);

struct MrcTdOptions {
    std::size_t max_iterations = 30;
    double tolerance = 1e-8;
    /// Charge d_n once per iteration, as the loop is literally written, instead
    /// of once per detection. Estimates are unaffected.
    bool literal_dn_count = false;

    void validate() const;
};

struct DetectionResult {
    CVector soft;                 // affine-frequency domain estimate
    std::vector<unsigned> hard;   // nearest constellation indices of soft
    std::size_t iterations = 0;   // MRC-TD sweeps performed
    bool converged = true;
    std::size_t degenerate_columns = 0;  // MRC-TD columns with d_n = 0
    OpCounter ops;
};

/// Largest search space detect_ml will enumerate.
inline constexpr std::uint64_t kMlSearchCap = std::uint64_t{1} << 20;

/// Exhaustive search of argmin ||y - H_eff x||^2 over the constellation^N.
/// Ties resolve to the lexicographically smallest index vector.
DetectionResult detect_ml(std::span<const cplx> y, const CMatrix& heff, const Constellation& c);

/// Affine-frequency MMSE (H_eff^H H_eff + I/snr)^{-1} H_eff^H y through a dense
/// Cholesky solve.
DetectionResult detect_mmse_conventional(std::span<const cplx> y, const CMatrix& heff, double snr,
                                         const Constellation& c);

/// Psi = H^H H + I/snr over the band |i - j| <= Q, each entry a band-limited
/// inner product of two columns.
BandedHermitianMatrix assemble_regularized_gram(const BandedLowerTriangular& h, double snr, OpCounter* ops = nullptr);

/// b = H^H r with row sums limited to the band.
CVector matched_filter(const BandedLowerTriangular& h, std::span<const cplx> r, OpCounter* ops = nullptr);

struct BandedMmseOptions {
    /// Called on the Cholesky factor before the triangular solves. Used by the
    /// self-test to inject a fault.
    std::function<void(BandedLowerTriangular&)> factor_hook;
};

/// Time-domain MMSE through a banded Cholesky factorization of Psi, followed by
/// the DAFT of the time-domain estimate. Requires a zero-padded channel.
DetectionResult detect_mmse_banded(std::span<const cplx> r, const TdChannelMatrix& h, double snr,
                                   const DaftOperator& op, const Constellation& c,
                                   const BandedMmseOptions& options = {});

/// Iterative maximum-ratio combining with in-place residual cancellation over the
/// non-zero entries of each column of H, swept n = 0..N-1. Requires a
/// zero-padded channel.
DetectionResult detect_mrc_td(std::span<const cplx> r, const TdChannelMatrix& h, double snr, const DaftOperator& op,
                              const MrcTdOptions& options, const Constellation& c);

/// Time-domain MRC-TD estimate before the final DAFT; exposed for fixed-point checks.
struct MrcTdState {
    CVector s;
    std::size_t iterations = 0;
    bool converged = false;
    std::size_t degenerate_columns = 0;
};
MrcTdState mrc_td_iterate(std::span<const cplx> r, const TdChannelMatrix& h, double snr, const MrcTdOptions& options,
                          OpCounter* ops = nullptr);

}  // namespace zpafdm
