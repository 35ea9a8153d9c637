#include "app/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zpafdm::app {

namespace {

// Schema: key -> default value.
const std::vector<std::pair<std::string, std::string>>& schema() {
    static const std::vector<std::pair<std::string, std::string>> s{
        {"waveform.n", "64"},
        {"waveform.guard", "16"},
        {"waveform.c1", "auto"},
        {"waveform.c2", "auto"},
        {"channel.p", "3"},
        {"channel.nu_max", "1"},
        {"channel.delays", "auto"},
        {"detector.arms", "zp-afdm/mmse-banded"},
        {"detector.mrc_td.k", "30"},
        {"detector.mrc_td.epsilon", "1e-8"},
        {"detector.mrc_td.literal_dn_count", "false"},
        {"sim.modulation", "qpsk"},
        {"sim.snr_db", "0:5:20"},
        {"sim.target_errors", "500"},
        {"sim.max_frames", "100000"},
        {"sim.master_seed", "1"},
        {"sim.batch_frames", "64"},
        {"theory.mode", "mmse"},
        {"theory.waveform", "zp-afdm"},
        {"theory.realizations", "1000"},
        {"theory.doppler_draws", "100"},
        {"theory.dopplers", "auto"},
        {"theory.seed", "auto"},
        {"complexity.n_values", "64,128,256,512"},
        {"complexity.q", "4"},
        {"complexity.k", "10"},
        {"complexity.snr_db", "15"},
        {"complexity.instances", "10"},
        {"complexity.nu_max", "1"},
        {"complexity.seed", "auto"},
        {"output.name", "run"},
        {"output.gnuplot", "false"},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size() && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ConfigError::ConfigError(const std::string& what, std::string key, std::size_t line)
    : std::runtime_error(what), key_(std::move(key)), line_(line) {}

Config::Config() : origin_("<defaults>") {
    for (const auto& [k, v] : schema()) values_[k] = v;
}

const std::vector<std::string>& Config::known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& e : schema()) k.push_back(e.first);
        return k;
    }();
    return keys;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config c;
    c.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'", {}, number);
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number);
    }
    return c;
}

void Config::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "': expected key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value, std::size_t line) {
    if (!values_.count(key)) {
        const std::string where = line ? origin_ + ":" + std::to_string(line) + ": " : std::string{};
        throw ConfigError(where + "unknown key '" + key + "'", key, line);
    }
    values_[key] = value;
    lines_[key] = line;
}

std::size_t Config::line_of(const std::string& key) const {
    const auto it = lines_.find(key);
    return it == lines_.end() ? 0 : it->second;
}

void Config::fail(const std::string& key, const std::string& what) const {
    const std::size_t line = line_of(key);
    const std::string where = line ? origin_ + ":" + std::to_string(line) + ": " : std::string{};
    throw ConfigError(where + key + " = '" + raw(key) + "': " + what, key, line);
}

const std::string& Config::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'", key);
    return it->second;
}

std::string Config::get_string(const std::string& key) const { return raw(key); }

double Config::get_double(const std::string& key) const {
    double v;
    if (!parse_double(raw(key), v)) fail(key, "expected a number");
    return v;
}

std::uint64_t Config::get_uint(const std::string& key) const {
    const std::string& s = raw(key);
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); }))
        fail(key, "expected a non-negative integer");
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        fail(key, "integer out of range");
    }
}

bool Config::get_bool(const std::string& key) const {
    std::string s = raw(key);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(key, "expected true or false");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    const std::string& s = raw(key);
    std::vector<double> out;
    // start:step:stop, stop included
    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(trim(p));
        double a, step, b;
        if (parts.size() != 3 || !parse_double(parts[0], a) || !parse_double(parts[1], step) ||
            !parse_double(parts[2], b) || !(step > 0.0) || b < a)
            fail(key, "expected start:step:stop with step > 0 and stop >= start");
        const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i) out.push_back(a + step * static_cast<double>(i));
        return out;
    }
    for (const auto& item : split_list(s)) {
        double v;
        if (!parse_double(item, v)) fail(key, "'" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) fail(key, "empty list");
    return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(raw(key))) {
        if (!std::all_of(item.begin(), item.end(), [](unsigned char ch) { return std::isdigit(ch); }))
            fail(key, "'" + item + "' is not a non-negative integer");
        out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    if (out.empty()) fail(key, "empty list");
    return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key) const {
    auto out = split_list(raw(key));
    if (out.empty()) fail(key, "empty list");
    return out;
}

ResolvedRun resolve(const Config& config) {
    ResolvedRun run{{}, config};
    ExperimentSpec& e = run.experiment;
    Config& c = run.config;

    e.n = c.get_uint("waveform.n");
    e.guard_len = c.get_uint("waveform.guard");
    if (e.n == 0) throw ConfigError("waveform.n must be positive", "waveform.n");

    const std::size_t p = c.get_uint("channel.p");
    const double nu_max = c.get_double("channel.nu_max");
    if (p == 0) throw ConfigError("channel.p must be positive", "channel.p");
    if (nu_max < 0.0) throw ConfigError("channel.nu_max must be non-negative", "channel.nu_max");
    e.profile = ChannelProfile::consecutive(p, nu_max);
    if (c.raw("channel.delays") != "auto") {
        e.profile.delays = c.get_size_list("channel.delays");
        if (e.profile.delays.size() != p)
            throw ConfigError("channel.delays must list channel.p = " + std::to_string(p) + " delays",
                              "channel.delays");
    }
    {
        std::string list;
        for (std::size_t i = 0; i < e.profile.delays.size(); ++i)
            list += (i ? "," : "") + std::to_string(e.profile.delays[i]);
        c.set("channel.delays", list);
    }

    const ChirpParams chirp = default_chirp_params(nu_max, e.n);
    e.c1 = c.raw("waveform.c1") == "auto" ? chirp.c1 : c.get_double("waveform.c1");
    e.c2 = c.raw("waveform.c2") == "auto" ? chirp.c2 : c.get_double("waveform.c2");
    c.set("waveform.c1", format_double(e.c1));
    c.set("waveform.c2", format_double(e.c2));

    try {
        e.modulation = parse_modulation(c.raw("sim.modulation"));
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("sim.modulation: ") + ex.what(), "sim.modulation");
    }
    for (const auto& name : c.get_string_list("detector.arms")) {
        try {
            e.arms.push_back(ArmSpec::parse(name));
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(std::string("detector.arms: ") + ex.what(), "detector.arms");
        }
    }
    e.snr_db = c.get_double_list("sim.snr_db");
    e.target_bit_errors = c.get_uint("sim.target_errors");
    e.max_frames = c.get_uint("sim.max_frames");
    e.master_seed = c.get_uint("sim.master_seed");
    e.batch_frames = c.get_uint("sim.batch_frames");
    e.mrc.max_iterations = c.get_uint("detector.mrc_td.k");
    e.mrc.tolerance = c.get_double("detector.mrc_td.epsilon");
    e.mrc.literal_dn_count = c.get_bool("detector.mrc_td.literal_dn_count");

    if (c.raw("theory.seed") == "auto") c.set("theory.seed", std::to_string(e.master_seed));
    if (c.raw("complexity.seed") == "auto") c.set("complexity.seed", std::to_string(e.master_seed));

    try {
        e.validate();
    } catch (const CapExceededError&) {
        throw;
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
    return run;
}

ComplexityCensusSpec resolve_census(const Config& c) {
    ComplexityCensusSpec s;
    s.n_values = c.get_size_list("complexity.n_values");
    s.q = c.get_uint("complexity.q");
    s.k = c.get_uint("complexity.k");
    s.snr_db = c.get_double("complexity.snr_db");
    s.instances = c.get_uint("complexity.instances");
    s.nu_max = c.get_double("complexity.nu_max");
    s.seed = c.raw("complexity.seed") == "auto" ? c.get_uint("sim.master_seed") : c.get_uint("complexity.seed");
    if (s.instances < 10) throw ConfigError("complexity.instances must be at least 10", "complexity.instances");
    if (s.k == 0) throw ConfigError("complexity.k must be positive", "complexity.k");
    for (std::size_t n : s.n_values)
        if (s.q >= n) throw ConfigError("complexity.q must be below every N", "complexity.q");
    return s;
}

}  // namespace zpafdm::app
