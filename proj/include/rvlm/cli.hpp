#pragma once

namespace rvlm {

/// Subcommands: gen-pseudo, gen-zoom-data, emit-train-artifacts, ground,
/// evaluate, analyze. Returns 0 on success, 2 on usage/schema errors and 1 on
/// runtime failures.
int run_cli(int argc, char** argv);

}  // namespace rvlm
