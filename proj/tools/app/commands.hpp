#pragma once

#include "app/config.hpp"
#include "zpafdm/simulator.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace zpafdm::app {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kCsvSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitCap = 4 };

/// Environment variable naming the output directory when --out is not given.
inline constexpr const char* kOutDirEnv = "ZPAFDM_OUT_DIR";

struct TheoryRow {
    double snr_db;
    double value;    // clipped bound or BER
    double std_err;  // spread over realizations or Doppler draws, 0 for a single geometry
    std::string mode;
    double raw;      // before clipping
};

/// Union bound (theory.mode = ml-bound) or closed-form MMSE BER (theory.mode = mmse)
/// over sim.snr_db, on the same SNR axis as the simulation.
std::vector<TheoryRow> compute_theory(const ResolvedRun& run);

/// "# config key = value" lines for every resolved key plus run metadata.
std::string render_manifest(const ResolvedRun& run, const std::string& command, const std::string& timestamp);

std::string render_ber_csv(const ResolvedRun& run, const BerCurve& curve, const std::string& timestamp);
std::string render_theory_csv(const ResolvedRun& run, const std::vector<TheoryRow>& rows,
                              const std::string& timestamp);
std::string render_complexity_csv(const ResolvedRun& run, const std::vector<ComplexityRow>& rows,
                                  const std::string& timestamp);

/// Rebuilds the configuration embedded in a result file's manifest.
Config config_from_manifest(const std::string& csv_text, const std::string& origin = "<manifest>");

/// Writes to a temporary sibling, then renames over path.
void write_atomic(const std::string& path, const std::string& content);

std::string arm_file_stem(const ArmSpec& arm);
std::string utc_timestamp();

/// Output directory: explicit value, else the environment variable, else ".".
std::string output_directory(const std::string& explicit_dir);

/// Execution settings that never change results, so they stay out of the manifest.
struct RunOptions {
    std::string out_dir = ".";
    unsigned workers = 1;
};

int cmd_ber_sim(const Config& config, const RunOptions& options, std::ostream& log);
int cmd_ber_theory(const Config& config, const RunOptions& options, std::ostream& log);
int cmd_complexity(const Config& config, const RunOptions& options, std::ostream& log);

/// Runs one of the commands above and maps exceptions to exit codes, printing
/// the diagnostic to err.
using Command = int (*)(const Config&, const RunOptions&, std::ostream&);
int run_guarded(Command command, const Config& config, const RunOptions& options, std::ostream& log,
                std::ostream& err);

}  // namespace zpafdm::app
