#pragma once

// Quick oracle-equivalence and gradient suites, shared by the CLI's
// `selfcheck` command.

#include <string>
#include <vector>

namespace beatforge::oracle {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

std::vector<SuiteResult> run_selfcheck();

}  // namespace beatforge::oracle
