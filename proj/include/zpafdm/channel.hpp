#pragma once

#include "zpafdm/numerics.hpp"
#include "zpafdm/waveform.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace zpafdm {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, index); depends on nothing else, so
/// the work unit that uses it can run on any thread in any order.
Rng stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// SplitMix64 finalizer, used to hash (seed, stream, index) into one engine seed.
std::uint64_t mix64(std::uint64_t z);

/// Statistical description of a doubly-selective channel: P paths with fixed
/// integer delays, Rayleigh gains of variance 1/P and Jakes Doppler up to nu_max.
struct ChannelProfile {
    std::size_t paths = 1;
    double nu_max = 0.0;
    std::vector<std::size_t> delays{0};

    /// Delays {0, 1, ..., P-1}, so the delay spread is Q = P - 1.
    static ChannelProfile consecutive(std::size_t paths, double nu_max);

    double gain_variance() const { return 1.0 / static_cast<double>(paths); }
    std::size_t max_delay() const;
    void validate() const;
};

struct PathTap {
    cplx gain;
    std::size_t delay;
    double doppler;
};

struct ChannelRealization {
    std::vector<PathTap> paths;

    std::size_t max_delay() const;
};

/// Draws one CN(0, 1/P) random variable.
cplx complex_gaussian(Rng& rng, double variance);

ChannelRealization sample_realization(const ChannelProfile& profile, Rng& rng);

/// Time-domain channel matrix H = sum_i h_i D(nu_i) Pi^{l_i}. Zero padding keeps it
/// lower-triangular with bandwidth Q; the chirp-periodic prefix wraps the delayed
/// entries into the upper-right corner, so that form is stored densely.
class TdChannelMatrix {
public:
    TdChannelMatrix(BandedLowerTriangular band, std::vector<std::size_t> delays);
    TdChannelMatrix(CMatrix dense, std::vector<std::size_t> delays);

    PrefixMode mode() const { return mode_; }
    std::size_t dim() const { return n_; }
    /// Sorted distinct path delays; row n + l of column n is the only possible
    /// non-zero for each l.
    const std::vector<std::size_t>& delays() const { return delays_; }
    std::size_t max_delay() const { return delays_.empty() ? 0 : delays_.back(); }

    /// Banded form; throws std::logic_error for a cyclic-prefix channel.
    const BandedLowerTriangular& banded() const;

    cplx operator()(std::size_t p, std::size_t n) const;
    CVector multiply(std::span<const cplx> s, OpCounter* ops = nullptr) const;
    CMatrix to_dense() const;

private:
    PrefixMode mode_;
    std::size_t n_;
    std::vector<std::size_t> delays_;
    BandedLowerTriangular band_;
    CMatrix dense_;
};

TdChannelMatrix build_td_matrix(const ChannelRealization& real, const AfdmConfig& config);

/// Noiseless sample-by-sample propagation of a whole transmitted frame through the
/// time-varying taps. Time zero is the first data sample, so prefix samples sit at
/// negative times.
CVector propagate(std::span<const cplx> frame, const ChannelRealization& real, const AfdmConfig& config);

void add_awgn(std::span<cplx> signal, double noise_var, Rng& rng);

/// propagate() followed by white CN(0, noise_var) noise over the full frame.
CVector apply_channel(std::span<const cplx> frame, const ChannelRealization& real, const AfdmConfig& config,
                      double noise_var, Rng& rng);

/// H_eff = A H A^H, built one column at a time through the fast transforms.
CMatrix effective_matrix(const TdChannelMatrix& h, const DaftOperator& op, OpCounter* ops = nullptr);

/// Closed-form (p, q) entry of the zero-padded subchannel matrix A D(nu) Pi^l A^H.
cplx subchannel_entry(std::size_t delay, double doppler, std::size_t p, std::size_t q, const AfdmConfig& config);

/// Dense subchannel matrix assembled from subchannel_entry().
CMatrix subchannel_matrix(std::size_t delay, double doppler, const AfdmConfig& config);

}  // namespace zpafdm
