// Command-line front end: erm_lab --config run.cfg [--seed N] [--out path] [--threads k]

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "erm_lab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ERM lower-bound simulation laboratory"};
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 1;
  app.add_option("--config", config_path, "Run configuration (key = value lines)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Master seed, overrides the config");
  auto* out_opt = app.add_option("--out", out, "CSV output path, overrides the config");
  app.add_option("--threads", threads, "Worker threads; never changes output")->check(CLI::Range(1u, 1024u));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : erm_lab::cli::kConfigError;
  }

  erm_lab::cli::Overrides overrides;
  overrides.threads = threads;
  if (*seed_opt) overrides.seed = seed;
  if (*out_opt) overrides.output = out;

  std::string document;
  try {
    document = erm_lab::cli::detail::read_file(config_path);
  } catch (const erm_lab::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return erm_lab::cli::kConfigError;
  }
  const auto result = erm_lab::cli::run_document(document, overrides);
  if (result.exit_code == erm_lab::cli::kOk) {
    std::cout << "wrote " << result.csv_path << " and " << result.summary_path << '\n';
  } else {
    std::cerr << "error (exit " << result.exit_code << "): " << result.message << '\n';
  }
  return result.exit_code;
}
