#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "optonet/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"optonet - optical data center network simulator"};
  app.require_subcommand(1);

  optonet::cli::RunOptions run_opt;
  if (const char* env = std::getenv("OPTONET_OUT")) run_opt.out_dir = env;
  std::uint64_t seed_value = 0;
  auto* run = app.add_subcommand("run", "run one or more scenarios");
  run->add_option("scenarios", run_opt.scenario_paths, "scenario json files")
      ->required();
  run->add_option("--out", run_opt.out_dir, "output directory");
  auto* seed_opt =
      run->add_option("--seed", seed_value, "override the scenario seed");
  run->add_option("--jobs", run_opt.jobs, "parallel scenarios");
  run->add_flag("--trace", run_opt.trace, "write an event trace per run");

  std::string validate_path;
  auto* validate =
      app.add_subcommand("validate", "check a scenario without running it");
  validate->add_option("scenario", validate_path, "scenario json file")
      ->required();

  std::string oracle_path;
  std::uint32_t o_src = 0, o_dst = 0, o_ts = 0;
  int o_max_hop = 4;
  auto* oracle = app.add_subcommand(
      "oracle", "exhaustive earliest-arrival search on a small schedule");
  oracle->add_option("scenario", oracle_path, "scenario json file")->required();
  oracle->add_option("--src", o_src, "source node")->required();
  oracle->add_option("--dst", o_dst, "destination node")->required();
  oracle->add_option("--ts", o_ts, "arrival slice");
  oracle->add_option("--max-hop", o_max_hop, "transit hop bound");

  std::int64_t g_rot = 0, g_err = 0, g_bw = 100'000'000'000LL, g_sync = 0,
               g_head = 0;
  auto* guard = app.add_subcommand("guardband",
                                   "guardband and minimum slice arithmetic");
  guard->add_option("--rotation-variance-ns", g_rot);
  guard->add_option("--estimator-error-bytes", g_err);
  guard->add_option("--bandwidth-bps", g_bw);
  guard->add_option("--sync-error-ns", g_sync);
  guard->add_option("--headroom-ns", g_head);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    if (seed_opt->count() > 0) run_opt.seed_override = seed_value;
    return optonet::cli::cmd_run(run_opt, std::cout);
  }
  if (validate->parsed())
    return optonet::cli::cmd_validate(validate_path, std::cout);
  if (oracle->parsed())
    return optonet::cli::cmd_oracle(oracle_path, o_src, o_dst, o_ts, o_max_hop,
                                    std::cout);
  if (guard->parsed())
    return optonet::cli::cmd_guardband(g_rot, g_err, g_bw, g_sync, g_head,
                                       std::cout);
  return optonet::cli::kUnexpected;
}
