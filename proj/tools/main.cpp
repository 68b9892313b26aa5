#include <cstdio>
#include <exception>

#include "commands.hpp"
#include "evtac/errors.hpp"

int main(int argc, char** argv) {
  using namespace evtac::cli;
  CLI::App app{"evtac: event-based roller tactile reconstruction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EVTAC_VERSION);
  int exit_code = kExitOk;
  register_simulate(app, exit_code);
  register_reconstruct(app, exit_code);
  register_calibrate(app, exit_code);
  register_stitch(app, exit_code);
  register_braille(app, exit_code);
  register_bench(app, exit_code);
  register_eval(app, exit_code);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  } catch (const evtac::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const evtac::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const evtac::UndefinedMetricError& e) {
    std::fprintf(stderr, "metric error: %s\n", e.what());
    return kExitMetric;
  } catch (const evtac::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 1;
  }
  return exit_code;
}
