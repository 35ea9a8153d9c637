#include "app/commands.hpp"
#include "app/config.hpp"
#include "app/selftest.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace zpafdm::app;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    unsigned workers = 1;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Configuration file (a result CSV reuses its manifest)");
    cmd->add_option("--set", args.overrides, "Override a configuration key, key=value")->take_all();
    cmd->add_option("--out", args.out_dir, std::string("Output directory (default $") + kOutDirEnv + " or .)");
    cmd->add_option("--workers", args.workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", args.seed, "Master seed, same as --set sim.master_seed=<u64>");
}

bool is_result_csv(const std::string& path) { return path.size() > 4 && path.substr(path.size() - 4) == ".csv"; }

int run(Command command, const CommonArgs& args) {
    Config config;
    try {
        if (!args.config_path.empty()) {
            if (is_result_csv(args.config_path)) {
                std::ifstream in(args.config_path);
                if (!in) throw ConfigError("cannot open '" + args.config_path + "'");
                std::stringstream ss;
                ss << in.rdbuf();
                config = config_from_manifest(ss.str(), args.config_path);
            } else {
                config = Config::from_file(args.config_path);
            }
        }
        for (const auto& o : args.overrides) config.set(o);
        if (args.seed) config.set("sim.master_seed", std::to_string(*args.seed));
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    }
    RunOptions options;
    options.out_dir = output_directory(args.out_dir);
    options.workers = args.workers;
    return run_guarded(command, config, options, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-padded AFDM link simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonArgs sim_args, theory_args, cx_args;
    auto* sim = app.add_subcommand("ber-sim", "Monte-Carlo BER sweep, one CSV per detector arm");
    add_common(sim, sim_args);
    auto* theory = app.add_subcommand("ber-theory", "ML union bound or closed-form MMSE BER");
    add_common(theory, theory_args);
    auto* cx = app.add_subcommand("complexity", "Multiplication counts per detector");
    add_common(cx, cx_args);

    SelftestOptions st_opts;
    auto* st = app.add_subcommand("selftest", "Oracle-equivalence and invariant checks at small N");
    st->add_flag("--inject-fault", st_opts.inject_fault, "Perturb the banded Cholesky factor (negative control)");
    st->add_option("--workers", st_opts.workers, "Worker count compared against a single worker")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (*sim) return run(cmd_ber_sim, sim_args);
    if (*theory) return run(cmd_ber_theory, theory_args);
    if (*cx) return run(cmd_complexity, cx_args);
    if (*st) return print_selftest_report(run_selftest(st_opts), std::cout) ? kExitOk : kExitNumerical;
    return kExitConfig;
}
