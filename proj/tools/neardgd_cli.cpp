#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "neardgd/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulator for nested decentralized gradient methods"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = 1;

  auto* run = app.add_subcommand(
      "run", "Run the configured variants and export trajectory CSVs");
  run->add_option("--config", config_path, "JSON run configuration")
      ->required();
  run->add_option("--out", out_dir,
                  "Output directory (default: config, then $NEARDGD_OUT)");
  run->add_option("--jobs", jobs, "Worker threads for the sweep")
      ->check(CLI::Range(1, 256));

  auto* verify = app.add_subcommand(
      "verify", "Audit the analysis bounds against measured trajectories");
  verify->add_option("--config", config_path, "JSON run configuration")
      ->required();
  verify->add_option("--out", out_dir, "Report directory");

  std::string records_dir;
  std::string axes = "iters,grads,comms,cost";
  long marker_every = 500;
  auto* plot = app.add_subcommand(
      "plot", "Re-render progress plots from exported records");
  plot->add_option("--records", records_dir, "Directory holding run CSVs")
      ->required();
  plot->add_option("--axes", axes, "Comma list of iters,grads,comms,cost");
  plot->add_option("--marker-every", marker_every,
                   "Marker decimation stride in iterations");
  plot->add_option("--out", out_dir, "Plot directory (default: records dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // bad CLI usage is a configuration error
  }

  std::optional<std::filesystem::path> out_override;
  if (!out_dir.empty()) out_override = std::filesystem::path(out_dir);

  if (run->parsed()) return neardgd::cmd_run(config_path, out_override, jobs);
  if (verify->parsed()) return neardgd::cmd_verify(config_path, out_override);
  return neardgd::cmd_plot(records_dir, axes, marker_every, out_override);
}
