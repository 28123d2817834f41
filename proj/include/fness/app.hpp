// app.hpp — subcommands of the floquet-ness command line tool.

#pragma once

#include "fness/io.hpp"

#include <string>
#include <vector>

namespace fness {

struct AppOptions {
    unsigned workers{0};
    bool converge{false}; // check: also sweep e_cut x nu_cut
};

const std::vector<std::string>& subcommands();

// Runs one subcommand and writes its CSVs into cfg.output_dir; returns the written paths.
std::vector<std::string> run_subcommand(const std::string& name, const RunConfig& cfg, const AppOptions& opts);

// 0 ok, 2 config error, 3 numerical failure, 4 convergence-guard failure
int exit_code_for(const std::exception& e) noexcept;
// {"error": kind, "message": text, "exit_code": n}
std::string error_record(const std::exception& e);

} // namespace fness
