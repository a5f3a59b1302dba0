#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace spinqsd::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfigError = 2, kNumericalAbort = 3 };

struct Options {
    std::string config_path;
    std::optional<std::string> out_dir;
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
    std::string log_level = "info";
};

/// Commands: simulate, oracle-exact, oracle-dephasing, convergence, sample-stats, validate-config.
int dispatch(const std::string& command, const Options& options, std::ostream& out, std::ostream& err);

std::string usage();

}  // namespace spinqsd::cli
