#pragma once

#include "zpafdm/channel.hpp"
#include "zpafdm/detectors.hpp"
#include "zpafdm/modulation.hpp"
#include "zpafdm/waveform.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace zpafdm {

/// One simulated link: waveform (prefix mode, chirp or plain OFDM) plus detector.
struct ArmSpec {
    PrefixMode prefix = PrefixMode::ZeroPad;
    bool ofdm = false;  // c1 = c2 = 0
    DetectorKind detector = DetectorKind::MmseBanded;

    /// e.g. "zp-afdm/mmse-banded", "cp-ofdm/mmse-conv".
    std::string name() const;
    static ArmSpec parse(const std::string& name);
};

struct ExperimentSpec {
    std::size_t n = 64;
    std::size_t guard_len = 16;
    double c1 = 0.0;  // AFDM arms; OFDM arms use zero
    double c2 = 0.0;
    ChannelProfile profile;
    ModulationKind modulation = ModulationKind::Qpsk;
    std::vector<ArmSpec> arms;
    std::vector<double> snr_db;  // per-symbol SNR of the cyclic-prefix reference
    std::uint64_t target_bit_errors = 500;
    std::uint64_t max_frames = 100000;
    std::uint64_t master_seed = 1;
    unsigned workers = 1;
    std::size_t batch_frames = 64;
    MrcTdOptions mrc;

    AfdmConfig waveform(const ArmSpec& arm) const;
    /// Throws std::invalid_argument describing the first problem found.
    void validate() const;
};

struct BerPoint {
    double snr_db = 0.0;
    std::uint64_t frames = 0;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    std::uint64_t failed_frames = 0;  // detector threw; excluded from bits/errors
    double ber = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double mean_mults = 0.0;
    double mean_iters = 0.0;
};

struct BerCurve {
    ArmSpec arm;
    std::vector<BerPoint> points;
};

struct Interval {
    double low;
    double high;
};

/// 95% Wilson score interval for errors out of trials.
Interval binomial_ci95(std::uint64_t errors, std::uint64_t trials);

struct PowerNormalization {
    double amplitude = 1.0;       // applied to the N data samples
    double snr_multiplier = 1.0;  // amplitude^2, folded into the detector-side SNR
};

/// Equal total frame energy for both prefix modes: a zero-padded frame carries
/// its guard energy in the data samples, amplitude sqrt((N + guard) / N).
PowerNormalization power_normalization(const AfdmConfig& config);
CVector normalize_power(std::span<const cplx> frame, const AfdmConfig& config);

double db_to_linear(double db);

/// Monte-Carlo BER sweep. At each SNR point frames run until every arm has
/// target_bit_errors errors or max_frames frames are done. All arms in a frame
/// share symbols, channel and noise. Frame f at SNR index k draws only from
/// stream_rng(master_seed, k, f), so results do not depend on the worker count.
std::vector<BerCurve> run_ber_sweep(const ExperimentSpec& spec);

struct ComplexityRow {
    std::size_t n = 0;
    DetectorKind detector = DetectorKind::MmseConventional;
    double mean_mults = 0.0;
};

struct ComplexityCensusSpec {
    std::vector<std::size_t> n_values{64, 128, 256, 512};
    std::size_t q = 4;
    std::size_t k = 10;  // MRC-TD sweeps, all of them performed
    double snr_db = 15.0;
    std::size_t instances = 10;
    double nu_max = 1.0;
    std::uint64_t seed = 1;
    std::vector<DetectorKind> detectors{DetectorKind::MmseConventional, DetectorKind::MmseBanded,
                                        DetectorKind::MrcTd};
};

/// Mean multiplication counts per detector over random zero-padded AFDM
/// instances with delays {0..q}.
std::vector<ComplexityRow> run_complexity_census(const ComplexityCensusSpec& spec);

/// Least-squares slope of log(mean_mults) against log(n) for one detector.
double loglog_slope(std::span<const ComplexityRow> rows, DetectorKind detector);

}  // namespace zpafdm
