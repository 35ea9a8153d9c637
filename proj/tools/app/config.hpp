#pragma once

#include "zpafdm/simulator.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace zpafdm::app {

/// Bad configuration input. line is 0 when the value came from an override or default.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::string key = {}, std::size_t line = 0);

    const std::string& key() const { return key_; }
    std::size_t line() const { return line_; }

private:
    std::string key_;
    std::size_t line_;
};

/// Flat key/value configuration with dotted section names, e.g.
///
///   waveform.n = 64
///   channel.p  = 3      # trailing comments allowed
///
/// Every key must belong to the fixed schema; defaults fill in the rest.
class Config {
public:
    Config();

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");

    /// "key=value" from the command line; replaces any earlier value.
    void set(const std::string& assignment);
    void set(const std::string& key, const std::string& value, std::size_t line = 0);

    const std::string& raw(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    /// All keys in sorted order with their current values.
    const std::map<std::string, std::string>& values() const { return values_; }

    static const std::vector<std::string>& known_keys();

private:
    std::size_t line_of(const std::string& key) const;
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

    std::map<std::string, std::string> values_;
    std::map<std::string, std::size_t> lines_;
    std::string origin_;
};

/// Fully resolved run: chirp rates, delay set and every default materialized.
struct ResolvedRun {
    ExperimentSpec experiment;
    Config config;  // with "auto" entries replaced by the values actually used
};

ResolvedRun resolve(const Config& config);

ComplexityCensusSpec resolve_census(const Config& config);

}  // namespace zpafdm::app
