// detangle <extract|model|analyze|extrapolate|synth|evaluate|pipeline> --config FILE [--seed N] [--out DIR]

#include "detangle/log.hpp"
#include "detangle/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"detangle: tabular disentanglement pipeline"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> pu_iters;
  std::optional<double> theta_hi, theta_lo, tau, neg_frac;

  for (const char* name : {"extract", "model", "analyze", "extrapolate", "synth", "evaluate", "pipeline"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
    sub->add_option("--config", config_path, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "global seed, overrides the config");
    sub->add_option("--out", out, "output directory, overrides the config");
    sub->add_option("--pu-iters", pu_iters, "PU iterations");
    sub->add_option("--theta-hi", theta_hi, "PU positive promotion threshold");
    sub->add_option("--theta-lo", theta_lo, "PU negative promotion threshold");
    sub->add_option("--tau", tau, "covering threshold for extracted rows");
    sub->add_option("--neg-frac", neg_frac, "fraction of candidates seeded as negatives");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    detangle::PipelineConfig cfg = detangle::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.output = *out;
    if (pu_iters) cfg.pu.iterations = *pu_iters;
    if (theta_hi) cfg.pu.theta_hi = *theta_hi;
    if (theta_lo) cfg.pu.theta_lo = *theta_lo;
    if (tau) cfg.pu.tau = *tau;
    if (neg_frac) cfg.pu.negative_fraction = *neg_frac;
    detangle::run_stage(stage, cfg);
  } catch (const detangle::StageError& e) {
    detangle::log::error(e.what());
    return 2;
  } catch (const std::exception& e) {
    detangle::log::error(std::string("setup: ") + e.what());
    return 1;
  }
  return 0;
}
