// sqcool: spectra, rates, steady states and optimized cooling limits of a
// squeezing-assisted optomechanical cavity.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "sqcool/commands.hpp"
#include "sqcool/config.hpp"

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
  bool quiet = false;
};

void add_globals(CLI::App& cmd, GlobalOptions& g) {
  cmd.add_option("--config", g.config, "configuration file (INI, or a JSON result to re-run)")->required();
  cmd.add_option("--out", g.out, "output path (default: [output] path, else stdout)");
  cmd.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd.add_option("--seed", g.seed, "multi-start seed (overrides [run] seed)");
  cmd.add_option("--workers", g.workers, "worker threads (default: logical cores)");
  cmd.add_flag("--quiet", g.quiet, "suppress progress messages");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = sqcool::cli;
  CLI::App app{"Optomechanical cooling with intracavity and extracavity squeezing"};
  app.set_version_flag("--version", std::string(cli::version));
  app.require_subcommand(1);

  GlobalOptions g;
  for (const std::string& name : cli::command_names()) add_globals(*app.add_subcommand(name, "run " + name), g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_code::config;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  cli::RunConfig rc;
  try {
    rc = cli::build_run_config(cli::load_config(g.config), g.seed);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::exit_code::config;
  } catch (const sqcool::Error& e) {
    std::cerr << "error (" << sqcool::to_string(e.kind()) << "): " << e.what() << '\n';
    return cli::exit_code_for(e.kind());
  }

  cli::CommandOptions opt;
  opt.workers = g.workers > 0 ? g.workers : std::max(1u, std::thread::hardware_concurrency());
  opt.log = g.quiet ? nullptr : &std::cerr;

  const std::string path = !g.out.empty() ? g.out : rc.out_path.value_or("");
  std::ostringstream buffer;
  const int code = cli::run_command(command, rc, g.format, buffer, std::cerr, opt);
  if (buffer.str().empty()) return code;
  if (path.empty() || path == "-") {
    std::cout << buffer.str();
  } else {
    std::ofstream file(path, std::ios::binary);
    if (!(file << buffer.str())) {
      std::cerr << "error: cannot write '" << path << "'\n";
      return cli::exit_code::config;
    }
    if (opt.log) *opt.log << "wrote " << path << '\n';
  }
  return code;
}
