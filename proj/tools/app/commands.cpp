#include "app/commands.hpp"

#include "zpafdm/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace zpafdm::app {

namespace {

namespace fs = std::filesystem;

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ArmSpec theory_arm(const Config& c, DetectorKind d) {
    try {
        ArmSpec arm = ArmSpec::parse(c.raw("theory.waveform") + "/" + to_string(d));
        return arm;
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("theory.waveform: ") + ex.what(), "theory.waveform");
    }
}

std::vector<double> detector_snrs(const ResolvedRun& run, const AfdmConfig& cfg) {
    const double mult = power_normalization(cfg).snr_multiplier;
    std::vector<double> out;
    for (double db : run.experiment.snr_db) out.push_back(db_to_linear(db) * mult);
    return out;
}

std::vector<TheoryRow> ml_bound_rows(const ResolvedRun& run) {
    const ExperimentSpec& e = run.experiment;
    const Config& c = run.config;
    const ArmSpec arm = theory_arm(c, DetectorKind::Ml);
    if (arm.prefix != PrefixMode::ZeroPad)
        throw ConfigError("theory.mode = ml-bound needs a zero-padded theory.waveform", "theory.waveform");
    const AfdmConfig cfg = e.waveform(arm);
    const Constellation con = Constellation::make(e.modulation);
    const double space = std::pow(double(con.order()), double(e.n));
    if (space > double(kUnionBoundCap))
        throw CapExceededError("union bound refused: M^N = " + g17(space) + " exceeds the enumeration limit of " +
                               std::to_string(kUnionBoundCap));
    const std::vector<double> snrs = detector_snrs(run, cfg);
    const std::size_t paths = e.profile.paths;

    std::vector<double> sum(snrs.size(), 0.0), sum_sq(snrs.size(), 0.0);
    std::size_t draws = 0;
    auto accumulate = [&](const std::vector<PathGeometry>& geometry) {
        const SubchannelSet set(cfg, geometry);
        const auto bounds = ml_union_bound(set, con, snrs, paths);
        for (std::size_t i = 0; i < snrs.size(); ++i) {
            sum[i] += bounds[i].raw;
            sum_sq[i] += bounds[i].raw * bounds[i].raw;
        }
        ++draws;
    };

    if (c.raw("theory.dopplers") != "auto") {
        const auto dopplers = c.get_double_list("theory.dopplers");
        if (dopplers.size() != paths)
            throw ConfigError("theory.dopplers must list one Doppler per path", "theory.dopplers");
        std::vector<PathGeometry> geometry;
        for (std::size_t i = 0; i < paths; ++i) geometry.push_back({e.profile.delays[i], dopplers[i]});
        accumulate(geometry);
    } else {
        const std::uint64_t count = c.get_uint("theory.doppler_draws");
        if (count == 0) throw ConfigError("theory.doppler_draws must be positive", "theory.doppler_draws");
        const std::uint64_t seed = c.get_uint("theory.seed");
        for (std::uint64_t d = 0; d < count; ++d) {
            Rng rng = stream_rng(seed, 1, d);
            accumulate(geometry_of(sample_realization(e.profile, rng)));
        }
    }

    std::vector<TheoryRow> rows;
    const double n = static_cast<double>(draws);
    for (std::size_t i = 0; i < snrs.size(); ++i) {
        const double mean = sum[i] / n;
        const double var = draws > 1 ? std::max(0.0, (sum_sq[i] - n * mean * mean) / (n - 1.0)) : 0.0;
        rows.push_back({e.snr_db[i], std::min(mean, 1.0), std::sqrt(var / n), "ml-bound", mean});
    }
    return rows;
}

std::vector<TheoryRow> mmse_rows(const ResolvedRun& run) {
    const ExperimentSpec& e = run.experiment;
    const Config& c = run.config;
    const AfdmConfig cfg = e.waveform(theory_arm(c, DetectorKind::MmseConventional));
    const std::uint64_t realizations = c.get_uint("theory.realizations");
    if (realizations == 0) throw ConfigError("theory.realizations must be positive", "theory.realizations");
    const auto est = mmse_theoretical_ber(cfg, e.profile, detector_snrs(run, cfg), e.modulation, realizations,
                                          c.get_uint("theory.seed"));
    std::vector<TheoryRow> rows;
    for (std::size_t i = 0; i < est.size(); ++i)
        rows.push_back({e.snr_db[i], est[i].mean, est[i].std_err, "mmse", est[i].mean});
    return rows;
}

std::string gnuplot_script(const std::vector<std::pair<std::string, std::string>>& series, const std::string& title) {
    std::ostringstream gp;
    gp << "set datafile separator ','\n"
       << "set datafile commentschars '#'\n"
       << "set logscale y\n"
       << "set format y '10^{%L}'\n"
       << "set grid\n"
       << "set xlabel 'SNR (dB)'\n"
       << "set ylabel 'BER'\n"
       << "set title '" << title << "'\n"
       << "plot ";
    for (std::size_t i = 0; i < series.size(); ++i) {
        gp << (i ? ", \\\n     " : "") << "'" << series[i].first << "' every ::1 using 1:" << series[i].second
           << " with linespoints title '" << series[i].first << "'";
    }
    gp << "\n";
    return gp.str();
}

}  // namespace

std::vector<TheoryRow> compute_theory(const ResolvedRun& run) {
    const std::string mode = run.config.raw("theory.mode");
    if (mode == "ml-bound") return ml_bound_rows(run);
    if (mode == "mmse") return mmse_rows(run);
    throw ConfigError("theory.mode must be ml-bound or mmse, got '" + mode + "'", "theory.mode");
}

std::string render_manifest(const ResolvedRun& run, const std::string& command, const std::string& timestamp) {
    std::ostringstream m;
    m << "# zpafdm result file, csv schema " << kCsvSchemaVersion << "\n"
      << "# tool_version = " << kToolVersion << "\n"
      << "# command = " << command << "\n"
      << "# timestamp = " << timestamp << "\n"
      << "# snr_axis = per-symbol SNR of the prefixed reference frame (unit symbol energy over noise variance);"
         " zero-padded frames carry the same total energy, data amplitude sqrt((N + guard) / N)\n";
    for (const auto& [k, v] : run.config.values()) m << "# config " << k << " = " << v << "\n";
    return m.str();
}

std::string render_ber_csv(const ResolvedRun& run, const BerCurve& curve, const std::string& timestamp) {
    std::ostringstream out;
    out << render_manifest(run, "ber-sim", timestamp);
    out << "# arm = " << curve.arm.name() << "\n";
    out << "# frames =";
    for (const auto& p : curve.points) out << " " << p.frames;
    out << "\n# failed_frames =";
    for (const auto& p : curve.points) out << " " << p.failed_frames;
    out << "\nsnr_db,bits,bit_errors,ber,ci_low,ci_high,mean_mults,mean_iters\n";
    for (const auto& p : curve.points)
        out << g17(p.snr_db) << "," << p.bits << "," << p.bit_errors << "," << g17(p.ber) << "," << g17(p.ci_low)
            << "," << g17(p.ci_high) << "," << g17(p.mean_mults) << "," << g17(p.mean_iters) << "\n";
    return out.str();
}

std::string render_theory_csv(const ResolvedRun& run, const std::vector<TheoryRow>& rows,
                              const std::string& timestamp) {
    std::ostringstream out;
    out << render_manifest(run, "ber-theory", timestamp);
    out << "snr_db,bound_or_ber,std_err,mode,raw_value\n";
    for (const auto& r : rows)
        out << g17(r.snr_db) << "," << g17(r.value) << "," << g17(r.std_err) << "," << r.mode << "," << g17(r.raw)
            << "\n";
    return out.str();
}

std::string render_complexity_csv(const ResolvedRun& run, const std::vector<ComplexityRow>& rows,
                                  const std::string& timestamp) {
    std::ostringstream out;
    out << render_manifest(run, "complexity", timestamp);
    out << "n,detector,mean_mults\n";
    std::vector<DetectorKind> seen;
    for (const auto& r : rows) {
        out << r.n << "," << to_string(r.detector) << "," << g17(r.mean_mults) << "\n";
        if (std::find(seen.begin(), seen.end(), r.detector) == seen.end()) seen.push_back(r.detector);
    }
    for (DetectorKind d : seen) {
        out << "# loglog_slope " << to_string(d) << " = ";
        try {
            out << g17(loglog_slope(rows, d)) << "\n";
        } catch (const std::invalid_argument&) {
            out << "n/a\n";
        }
    }
    return out.str();
}

Config config_from_manifest(const std::string& csv_text, const std::string& origin) {
    std::istringstream in(csv_text);
    std::string line, body;
    const std::string tag = "# config ";
    while (std::getline(in, line))
        if (line.rfind(tag, 0) == 0) body += line.substr(tag.size()) + "\n";
    if (body.empty()) throw ConfigError(origin + ": no embedded configuration found");
    return Config::from_string(body, origin);
}

void write_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        f << content;
        f.flush();
        if (!f) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string arm_file_stem(const ArmSpec& arm) {
    std::string s = arm.name();
    for (auto& ch : s)
        if (ch == '/') ch = '_';
    return s;
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string output_directory(const std::string& explicit_dir) {
    if (!explicit_dir.empty()) return explicit_dir;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return ".";
}

int cmd_ber_sim(const Config& config, const RunOptions& options, std::ostream& log) {
    const std::string& out_dir = options.out_dir;
    ResolvedRun run = resolve(config);
    run.experiment.workers = options.workers;
    const auto curves = run_ber_sweep(run.experiment);
    const std::string ts = utc_timestamp();
    const std::string name = run.config.raw("output.name");

    // everything is rendered before the first file is touched
    std::vector<std::pair<std::string, std::string>> files;
    std::vector<std::pair<std::string, std::string>> series;
    for (const auto& curve : curves) {
        const std::string file = name + "_" + arm_file_stem(curve.arm) + ".csv";
        files.emplace_back((fs::path(out_dir) / file).string(), render_ber_csv(run, curve, ts));
        series.emplace_back(file, "4");
    }
    if (run.config.get_bool("output.gnuplot"))
        files.emplace_back((fs::path(out_dir) / (name + "_ber.gp")).string(), gnuplot_script(series, name));
    for (const auto& [path, text] : files) {
        write_atomic(path, text);
        log << "wrote " << path << "\n";
    }
    return kExitOk;
}

int cmd_ber_theory(const Config& config, const RunOptions& options, std::ostream& log) {
    const std::string& out_dir = options.out_dir;
    const ResolvedRun run = resolve(config);
    const auto rows = compute_theory(run);
    const std::string name = run.config.raw("output.name");
    const std::string file = name + "_theory_" + run.config.raw("theory.mode") + ".csv";
    const std::string path = (fs::path(out_dir) / file).string();
    const std::string text = render_theory_csv(run, rows, utc_timestamp());
    std::string script;
    if (run.config.get_bool("output.gnuplot")) script = gnuplot_script({{file, "2"}}, name);
    write_atomic(path, text);
    log << "wrote " << path << "\n";
    if (!script.empty()) {
        const std::string gp = (fs::path(out_dir) / (name + "_theory.gp")).string();
        write_atomic(gp, script);
        log << "wrote " << gp << "\n";
    }
    return kExitOk;
}

int cmd_complexity(const Config& config, const RunOptions& options, std::ostream& log) {
    const std::string& out_dir = options.out_dir;
    const ResolvedRun run = resolve(config);
    const auto rows = run_complexity_census(resolve_census(run.config));
    const std::string path = (fs::path(out_dir) / (run.config.raw("output.name") + "_complexity.csv")).string();
    write_atomic(path, render_complexity_csv(run, rows, utc_timestamp()));
    log << "wrote " << path << "\n";
    return kExitOk;
}

int run_guarded(Command command, const Config& config, const RunOptions& options, std::ostream& log,
                std::ostream& err) {
    try {
        return command(config, options, log);
    } catch (const ConfigError& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const CapExceededError& ex) {
        err << "cap exceeded: " << ex.what() << "\n";
        return kExitCap;
    } catch (const std::invalid_argument& ex) {
        err << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& ex) {
        err << "numerical failure: " << ex.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace zpafdm::app
