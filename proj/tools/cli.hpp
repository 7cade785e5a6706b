#pragma once

// Command-line front end. Every subcommand produces one table, rendered as
// CSV, JSON or aligned text; the resolved configuration is logged to the
// error stream as one JSON line.

#include <iosfwd>
#include <string>
#include <vector>

namespace hecke::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_verify_failed = 1,
    exit_usage = 2,
    exit_capacity = 3,
    /// Non-convergence or another runtime failure.
    exit_runtime = 4,
};

/// args excludes the program name. color enables ANSI emphasis in the
/// pretty format; NO_COLOR in the environment overrides it.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool color = false);

int main_entry(int argc, char** argv);

} // namespace hecke::cli
