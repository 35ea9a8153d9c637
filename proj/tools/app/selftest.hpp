#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zpafdm::app {

struct CheckResult {
    std::string name;
    double measured;
    double tolerance;
    bool passed;
    std::string detail;
};

struct SelftestOptions {
    /// Perturbs one entry of every banded Cholesky factor before the solves.
    bool inject_fault = false;
    unsigned workers = 4;  // second worker count of the determinism check
};

std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

/// Prints the per-check table and a summary line; returns true iff all passed.
bool print_selftest_report(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace zpafdm::app
