#ifndef DGCIM_VERIFY_HPP
#define DGCIM_VERIFY_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dgcim {

// Built-in oracle-equivalence and invariant suite. Each criterion runs at its
// pinned tolerance and wall-time budget; the CLI `verify` subcommand and the
// acceptance test binary both drive this list.

struct VerifyOptions {
    double eta_perturbation = 0.0;  // fault-injection hook: offsets the analog
                                    // sensitivity away from the recovery constant
};

struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double limit_seconds = 0.0;
};

std::vector<CriterionResult> run_acceptance(const VerifyOptions& opts = VerifyOptions());

// Prints one PASS/FAIL line per criterion; returns true when all pass.
bool print_results(const std::vector<CriterionResult>& results, std::ostream& out);

}  // namespace dgcim

#endif
