#include "zpafdm/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

namespace zpafdm {

namespace {

struct ArmResult {
    std::uint64_t bit_errors = 0;
    bool failed = false;
    std::uint64_t mults = 0;
    std::size_t iterations = 0;
};

struct FrameResult {
    std::vector<ArmResult> arms;
};

// Everything about an arm that does not change from frame to frame.
struct ArmContext {
    ArmSpec arm;
    AfdmConfig config;
    DaftOperator op;
    PowerNormalization power;
};

bool needs_effective_matrix(DetectorKind d) {
    return d == DetectorKind::Ml || d == DetectorKind::MmseConventional;
}

DetectionResult run_detector(const ArmContext& ctx, std::span<const cplx> r, const TdChannelMatrix& h,
                             const CMatrix* heff, double snr, const Constellation& c, const MrcTdOptions& mrc) {
    switch (ctx.arm.detector) {
        case DetectorKind::Ml:
            return detect_ml(ctx.op.daft(r), *heff, c);
        case DetectorKind::MmseConventional:
            return detect_mmse_conventional(ctx.op.daft(r), *heff, snr, c);
        case DetectorKind::MmseBanded:
            return detect_mmse_banded(r, h, snr, ctx.op, c);
        case DetectorKind::MrcTd:
            return detect_mrc_td(r, h, snr, ctx.op, mrc, c);
    }
    throw std::logic_error("run_detector: unknown detector");
}

FrameResult simulate_frame(const ExperimentSpec& spec, const std::vector<ArmContext>& arms, const Constellation& c,
                           double snr, std::size_t snr_index, std::uint64_t frame) {
    Rng rng = stream_rng(spec.master_seed, snr_index, frame);
    const std::size_t nbits = spec.n * c.bits_per_symbol;

    std::vector<std::uint8_t> bits(nbits);
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& b : bits) b = static_cast<std::uint8_t>(coin(rng));
    const CVector x = map_bits(bits, c);
    const ChannelRealization real = sample_realization(spec.profile, rng);
    CVector noise(spec.n + spec.guard_len);
    for (auto& v : noise) v = complex_gaussian(rng, 1.0);
    const double sigma = std::sqrt(1.0 / snr);

    FrameResult out;
    out.arms.resize(arms.size());

    // Arms on the same waveform share the channel matrix and received samples.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> waveform_owner;
    std::vector<std::optional<TdChannelMatrix>> td(arms.size());
    std::vector<CVector> received(arms.size());
    std::vector<std::optional<CMatrix>> heff(arms.size());

    for (std::size_t a = 0; a < arms.size(); ++a) {
        const ArmContext& ctx = arms[a];
        const auto key = std::make_pair(static_cast<std::size_t>(ctx.arm.prefix), std::size_t(ctx.arm.ofdm));
        auto [it, inserted] = waveform_owner.emplace(key, a);
        const std::size_t owner = it->second;
        if (inserted) {
            const CVector frame_tx = normalize_power(assemble_frame(ctx.op.idaft(x), ctx.config), ctx.config);
            CVector rx = propagate(frame_tx, real, ctx.config);
            for (std::size_t k = 0; k < rx.size(); ++k) rx[k] += sigma * noise[k];
            CVector r = strip_prefix(rx, ctx.config);
            // undo the transmit boost so the detector sees the unscaled channel
            const double inv = 1.0 / ctx.power.amplitude;
            for (auto& v : r) v *= inv;
            received[a] = std::move(r);
            td[a].emplace(build_td_matrix(real, ctx.config));
        }
        const TdChannelMatrix& h = *td[owner];
        if (needs_effective_matrix(ctx.arm.detector) && !heff[owner]) heff[owner] = effective_matrix(h, ctx.op);

        const double arm_snr = snr * ctx.power.snr_multiplier;
        ArmResult& res = out.arms[a];
        try {
            const DetectionResult det = run_detector(ctx, received[owner], h, heff[owner] ? &*heff[owner] : nullptr,
                                                     arm_snr, c, spec.mrc);
            const auto rx_bits = demap_symbols(det.hard, c);
            for (std::size_t k = 0; k < nbits; ++k) res.bit_errors += rx_bits[k] != bits[k];
            res.mults = det.ops.complex_multiplications;
            res.iterations = det.iterations;
        } catch (const std::runtime_error&) {
            res.failed = true;
        }
    }
    return out;
}

// Runs f(i) for i in [0, count) on up to `workers` threads.
template <typename F>
void parallel_for(std::size_t count, unsigned workers, F&& f) {
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count && !failed; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::string ArmSpec::name() const {
    std::string w = prefix == PrefixMode::ZeroPad ? "zp-" : (ofdm ? "cp-" : "cpp-");
    w += ofdm ? "ofdm" : "afdm";
    return w + "/" + to_string(detector);
}

ArmSpec ArmSpec::parse(const std::string& name) {
    const auto slash = name.find('/');
    if (slash == std::string::npos) throw std::invalid_argument("arm '" + name + "': expected waveform/detector");
    const std::string w = name.substr(0, slash);
    ArmSpec arm;
    if (w == "zp-afdm") {
        arm.prefix = PrefixMode::ZeroPad;
    } else if (w == "cpp-afdm") {
        arm.prefix = PrefixMode::CyclicPrefix;
    } else if (w == "zp-ofdm") {
        arm.prefix = PrefixMode::ZeroPad;
        arm.ofdm = true;
    } else if (w == "cp-ofdm") {
        arm.prefix = PrefixMode::CyclicPrefix;
        arm.ofdm = true;
    } else {
        throw std::invalid_argument("arm '" + name + "': unknown waveform '" + w + "'");
    }
    arm.detector = parse_detector(name.substr(slash + 1));
    return arm;
}

AfdmConfig ExperimentSpec::waveform(const ArmSpec& arm) const {
    AfdmConfig c;
    c.n = n;
    c.guard_len = guard_len;
    c.prefix = arm.prefix;
    c.c1 = arm.ofdm ? 0.0 : c1;
    c.c2 = arm.ofdm ? 0.0 : c2;
    return c;
}

void ExperimentSpec::validate() const {
    profile.validate();
    mrc.validate();
    if (arms.empty()) throw std::invalid_argument("experiment: at least one detector arm required");
    if (snr_db.empty()) throw std::invalid_argument("experiment: SNR grid is empty");
    for (std::size_t i = 0; i < snr_db.size(); ++i) {
        if (!std::isfinite(snr_db[i])) throw std::invalid_argument("experiment: SNR values must be finite");
        if (i > 0 && !(snr_db[i] > snr_db[i - 1]))
            throw std::invalid_argument("experiment: SNR grid must be strictly increasing");
    }
    if (max_frames == 0) throw std::invalid_argument("experiment: max_frames must be positive");
    if (batch_frames == 0) throw std::invalid_argument("experiment: batch_frames must be positive");
    if (profile.max_delay() >= n) throw std::invalid_argument("experiment: channel delay not below N");
    for (const auto& arm : arms) {
        const AfdmConfig cfg = waveform(arm);
        cfg.validate();
        if (arm.prefix == PrefixMode::ZeroPad && guard_len < profile.max_delay())
            throw std::invalid_argument("experiment: zero-padding guard " + std::to_string(guard_len) +
                                        " shorter than the delay spread " + std::to_string(profile.max_delay()));
        if (arm.prefix == PrefixMode::CyclicPrefix && guard_len < profile.max_delay())
            throw std::invalid_argument("experiment: prefix shorter than the delay spread");
        if (arm.prefix == PrefixMode::CyclicPrefix &&
            (arm.detector == DetectorKind::MmseBanded || arm.detector == DetectorKind::MrcTd))
            throw std::invalid_argument("experiment: arm " + arm.name() + " needs a zero-padded waveform");
        if (arm.detector == DetectorKind::Ml) {
            const double space = std::pow(double(Constellation::make(modulation).order()), double(n));
            if (space > double(kMlSearchCap))
                throw CapExceededError("ML search space " + std::to_string(space) + " exceeds the limit of " +
                                       std::to_string(kMlSearchCap) + " candidates");
        }
    }
}

Interval binomial_ci95(std::uint64_t errors, std::uint64_t trials) {
    if (trials == 0) return {0.0, 1.0};
    constexpr double z = 1.959963984540054;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(errors) / n;
    const double denom = 1.0 + z * z / n;
    const double centre = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

PowerNormalization power_normalization(const AfdmConfig& config) {
    PowerNormalization p;
    if (config.prefix == PrefixMode::ZeroPad && config.guard_len > 0) {
        p.snr_multiplier = static_cast<double>(config.n + config.guard_len) / static_cast<double>(config.n);
        p.amplitude = std::sqrt(p.snr_multiplier);
    }
    return p;
}

CVector normalize_power(std::span<const cplx> frame, const AfdmConfig& config) {
    if (frame.size() != config.frame_len()) throw std::invalid_argument("normalize_power: frame length mismatch");
    CVector out(frame.begin(), frame.end());
    const double a = power_normalization(config).amplitude;
    if (a != 1.0)
        for (auto& v : out) v *= a;
    return out;
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

std::vector<BerCurve> run_ber_sweep(const ExperimentSpec& spec) {
    spec.validate();
    const Constellation c = Constellation::make(spec.modulation);
    std::vector<ArmContext> arms;
    arms.reserve(spec.arms.size());
    for (const auto& arm : spec.arms) {
        const AfdmConfig cfg = spec.waveform(arm);
        arms.push_back({arm, cfg, DaftOperator(cfg), power_normalization(cfg)});
    }
    const std::uint64_t bits_per_frame = spec.n * c.bits_per_symbol;

    std::vector<BerCurve> curves(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) curves[a].arm = arms[a].arm;

    for (std::size_t k = 0; k < spec.snr_db.size(); ++k) {
        const double snr = db_to_linear(spec.snr_db[k]);
        std::vector<BerPoint> pts(arms.size());
        std::vector<double> mult_sum(arms.size(), 0.0), iter_sum(arms.size(), 0.0);
        std::uint64_t frames = 0;

        auto done = [&] {
            if (frames >= spec.max_frames) return true;
            if (spec.target_bit_errors == 0) return false;
            for (const auto& p : pts)
                if (p.bit_errors < spec.target_bit_errors) return false;
            return true;
        };

        std::vector<FrameResult> batch;
        while (!done()) {
            const std::size_t count =
                static_cast<std::size_t>(std::min<std::uint64_t>(spec.batch_frames, spec.max_frames - frames));
            batch.assign(count, {});
            const std::uint64_t base = frames;
            parallel_for(count, spec.workers,
                         [&](std::size_t i) { batch[i] = simulate_frame(spec, arms, c, snr, k, base + i); });
            // in-order accumulation with a per-frame stop check keeps the result
            // independent of batch size and worker count
            for (std::size_t i = 0; i < count && !done(); ++i) {
                ++frames;
                for (std::size_t a = 0; a < arms.size(); ++a) {
                    const ArmResult& r = batch[i].arms[a];
                    BerPoint& p = pts[a];
                    if (r.failed) {
                        ++p.failed_frames;
                        continue;
                    }
                    p.bits += bits_per_frame;
                    p.bit_errors += r.bit_errors;
                    mult_sum[a] += static_cast<double>(r.mults);
                    iter_sum[a] += static_cast<double>(r.iterations);
                }
            }
        }

        for (std::size_t a = 0; a < arms.size(); ++a) {
            BerPoint& p = pts[a];
            p.snr_db = spec.snr_db[k];
            p.frames = frames;
            const std::uint64_t ok = frames - p.failed_frames;
            p.ber = p.bits ? static_cast<double>(p.bit_errors) / static_cast<double>(p.bits) : 0.0;
            const Interval ci = binomial_ci95(p.bit_errors, p.bits);
            p.ci_low = ci.low;
            p.ci_high = ci.high;
            p.mean_mults = ok ? mult_sum[a] / static_cast<double>(ok) : 0.0;
            p.mean_iters = ok ? iter_sum[a] / static_cast<double>(ok) : 0.0;
            curves[a].points.push_back(p);
        }
    }
    return curves;
}

std::vector<ComplexityRow> run_complexity_census(const ComplexityCensusSpec& spec) {
    if (spec.instances == 0) throw std::invalid_argument("complexity census: instances must be positive");
    if (spec.k == 0) throw std::invalid_argument("complexity census: K must be positive");
    const Constellation c = Constellation::make(ModulationKind::Qpsk);
    const double snr = db_to_linear(spec.snr_db);
    MrcTdOptions mrc;
    mrc.max_iterations = spec.k;
    // every sweep is performed: the stopping test never fires
    mrc.tolerance = std::numeric_limits<double>::denorm_min();

    std::vector<ComplexityRow> rows;
    for (std::size_t ni = 0; ni < spec.n_values.size(); ++ni) {
        const std::size_t n = spec.n_values[ni];
        if (spec.q >= n) throw std::invalid_argument("complexity census: Q must be below N");
        AfdmConfig cfg;
        cfg.n = n;
        cfg.guard_len = spec.q;
        cfg.prefix = PrefixMode::ZeroPad;
        const ChirpParams cp = default_chirp_params(spec.nu_max, n);
        cfg.c1 = cp.c1;
        cfg.c2 = cp.c2;
        const DaftOperator op(cfg);
        const ChannelProfile profile = ChannelProfile::consecutive(spec.q + 1, spec.nu_max);

        std::vector<double> sums(spec.detectors.size(), 0.0);
        for (std::size_t inst = 0; inst < spec.instances; ++inst) {
            Rng rng = stream_rng(spec.seed, ni, inst);
            CVector x(n);
            std::uniform_int_distribution<unsigned> pick(0, static_cast<unsigned>(c.order() - 1));
            for (auto& v : x) v = c.points[pick(rng)];
            const ChannelRealization real = sample_realization(profile, rng);
            const TdChannelMatrix h = build_td_matrix(real, cfg);
            CVector r = h.multiply(op.idaft(x));
            add_awgn(r, 1.0 / snr, rng);

            std::optional<CMatrix> heff;
            for (std::size_t d = 0; d < spec.detectors.size(); ++d) {
                DetectionResult det;
                switch (spec.detectors[d]) {
                    case DetectorKind::MmseConventional:
                    case DetectorKind::Ml: {
                        if (!heff) heff = effective_matrix(h, op);
                        const CVector y = op.daft(r);
                        det = spec.detectors[d] == DetectorKind::Ml ? detect_ml(y, *heff, c)
                                                                    : detect_mmse_conventional(y, *heff, snr, c);
                        break;
                    }
                    case DetectorKind::MmseBanded:
                        det = detect_mmse_banded(r, h, snr, op, c);
                        break;
                    case DetectorKind::MrcTd:
                        det = detect_mrc_td(r, h, snr, op, mrc, c);
                        break;
                }
                sums[d] += static_cast<double>(det.ops.complex_multiplications);
            }
        }
        for (std::size_t d = 0; d < spec.detectors.size(); ++d)
            rows.push_back({n, spec.detectors[d], sums[d] / static_cast<double>(spec.instances)});
    }
    return rows;
}

double loglog_slope(std::span<const ComplexityRow> rows, DetectorKind detector) {
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        if (r.detector != detector || r.mean_mults <= 0.0) continue;
        xs.push_back(std::log(static_cast<double>(r.n)));
        ys.push_back(std::log(r.mean_mults));
    }
    if (xs.size() < 2) throw std::invalid_argument("loglog_slope: need at least two sizes");
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / double(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("loglog_slope: all sizes equal");
    return sxy / sxx;
}

}  // namespace zpafdm
