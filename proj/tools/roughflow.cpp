#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "roughflow/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = roughflow::cli;
  CLI::App app{"roughflow: rough paths, rough drivers and rough flows"};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "run a pipeline config");
  run->add_option("config", run_config, "config JSON")->required();
  run->add_option("--out", out, "output directory (overrides ROUGHFLOW_OUT and output_dir)");
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--jobs", jobs, "worker threads for Monte Carlo replication")->check(CLI::PositiveNumber);

  std::optional<std::string> list_config;
  auto* list = app.add_subcommand("list", "list kernels, vector-field families and checks");
  list->add_option("--config", list_config, "also list kernels registered in this config");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "check a config against the schema");
  validate->add_option("config", validate_config, "config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kSchemaViolation;
  }

  if (*run) {
    cli::RunOptions opt;
    if (out) opt.out = *out;
    opt.seed = seed;
    opt.jobs = jobs;
    return cli::command_run(run_config, opt, std::cout, std::cerr);
  }
  if (*list) {
    std::optional<std::filesystem::path> cfg;
    if (list_config) cfg = *list_config;
    return cli::command_list(cfg, std::cout, std::cerr);
  }
  return cli::command_validate(validate_config, std::cout, std::cerr);
}
