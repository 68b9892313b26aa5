#pragma once

#include <CLI11.hpp>

namespace evtac::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitMetric = 4;

/// Each register_* call adds a subcommand. Commands with a metric threshold
/// write kExitMetric into `exit_code` when it is exceeded.
void register_simulate(CLI::App& app, int& exit_code);
void register_reconstruct(CLI::App& app, int& exit_code);
void register_calibrate(CLI::App& app, int& exit_code);
void register_stitch(CLI::App& app, int& exit_code);
void register_braille(CLI::App& app, int& exit_code);
void register_bench(CLI::App& app, int& exit_code);
void register_eval(CLI::App& app, int& exit_code);

}  // namespace evtac::cli
