// roughwave command-line front end.
//
//   roughwave advect      --config run.ini   [--out DIR] [--seed N] [--profile P]
//   roughwave wave        --config run.ini   [--out DIR] [--seed N] [--profile P]
//   roughwave study       --config study.ini [--out DIR] [--seed N] [--profile P]
//   roughwave coefficient --config coeff.ini [--out DIR] [--seed N] [--profile P]
//   roughwave check       --config DIR/manifest.ini
//
// Exit codes: 0 success, 1 solver or invariant-check failure, 2 config error.

#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "roughwave/cli.hpp"

namespace {

void add_common_flags(CLI::App* sub, roughwave::CliConfig& config,
                      std::string& profile_name, bool wants_output) {
  sub->add_option("--config", config.config_path,
                  "path to the configuration file")
      ->required();
  if (wants_output) {
    sub->add_option("--out", config.output_dir,
                    "directory that receives the artifacts");
    sub->add_option("--seed", config.seed_override,
                    "override the seed recorded in the config");
    sub->add_option("--profile", profile_name,
                    "resource profile: full or ci")
        ->check(CLI::IsMember({"full", "ci"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "solver kit for one-dimensional transport and wave equations with "
      "rough coefficients"};
  app.require_subcommand(1);

  roughwave::CliConfig config;
  std::string profile_name = "full";

  CLI::App* advect =
      app.add_subcommand("advect", "run one transport trajectory");
  CLI::App* wave = app.add_subcommand("wave", "run one wave trajectory");
  CLI::App* study =
      app.add_subcommand("study", "run a grid-refinement rate study");
  CLI::App* coefficient = app.add_subcommand(
      "coefficient", "sample a coefficient field and write it to disk");
  CLI::App* check = app.add_subcommand(
      "check", "re-run invariant checks on a stored trajectory");

  add_common_flags(advect, config, profile_name, true);
  add_common_flags(wave, config, profile_name, true);
  add_common_flags(study, config, profile_name, true);
  add_common_flags(coefficient, config, profile_name, true);
  add_common_flags(check, config, profile_name, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (advect->parsed()) config.command = roughwave::Command::advect;
  if (wave->parsed()) config.command = roughwave::Command::wave;
  if (study->parsed()) config.command = roughwave::Command::study;
  if (coefficient->parsed()) config.command = roughwave::Command::coefficient;
  if (check->parsed()) config.command = roughwave::Command::check;
  config.profile = profile_name == "ci" ? roughwave::Profile::ci
                                        : roughwave::Profile::full;

  return roughwave::run(config);
}
