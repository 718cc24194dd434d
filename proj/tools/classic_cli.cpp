#include <iostream>

#include <CLI11.hpp>

#include "classic/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace classic::cli;
  CLI::App app{"Continual aspect-sentiment learning with task masks and contrastive knowledge sharing"};
  app.require_subcommand(1);

  classic::data::SyntheticSpec spec;
  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic task suite as JSONL");
  gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--tasks", spec.n_tasks, "Number of tasks")->capture_default_str();
  gen->add_option("--per-task", spec.examples_per_task, "Examples per task")->capture_default_str();
  gen->add_option("--flip", spec.flip_fraction, "Fraction of shared words flipped in odd tasks")->capture_default_str();
  gen->add_option("--classes", spec.n_classes, "2 or 3")->capture_default_str();
  gen->add_option("--out", data_out, "Output directory")->required();

  RunOptions run_opts;
  std::string baseline, mode;
  auto* run_cmd = app.add_subcommand("run", "Train a task sequence, or score a checkpoint");
  run_cmd->add_option("--config", run_opts.config, "INI run config")->required();
  run_cmd->add_option("--ablate", run_opts.ablate, "\"all\" for the ablation grid, or e.g. -CED,-CKS");
  run_cmd->add_option("--baseline", baseline, "classic | ncl | one");
  run_cmd->add_option("--mode", mode, "dil | til");
  run_cmd->add_option("--out", run_opts.out, "Output directory")->required();
  run_cmd->add_option("--checkpoint", run_opts.checkpoint, "Score this checkpoint instead of training");

  std::string ckpt_path, report_out;
  auto* masks_cmd = app.add_subcommand("mask-report", "Mask capacity and overlap of a checkpoint");
  masks_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  masks_cmd->add_option("--out", report_out, "Output JSON (stdout if omitted)");

  std::size_t trials = 20;
  std::uint64_t grad_seed = 1;
  double tolerance = 1e-4;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of every gradient");
  grad->add_option("--trials", trials, "Random instances per check")->capture_default_str();
  grad->add_option("--seed", grad_seed, "Seed")->capture_default_str();
  grad->add_option("--tolerance", tolerance, "Max relative error")->capture_default_str();

  std::string att_config;
  std::size_t probe = 8;
  auto* att = app.add_subcommand("attention-report", "Task attention weights on a probe batch");
  att->add_option("--config", att_config, "INI run config naming the data source")->required();
  att->add_option("--checkpoint", ckpt_path, "Classic checkpoint")->required();
  att->add_option("--probe", probe, "Probe batch size")->capture_default_str();
  att->add_option("--out", report_out, "Output JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return guarded(
      [&]() -> int {
        if (*gen) {
          gen_data(spec, data_out);
          std::cout << "wrote " << spec.n_tasks << " tasks to " << data_out << '\n';
        } else if (*run_cmd) {
          if (!baseline.empty()) run_opts.baseline = baseline;
          if (!mode.empty()) run_opts.mode = mode;
          run(run_opts, std::cout);
        } else if (*masks_cmd) {
          mask_report(ckpt_path, report_out, std::cout);
        } else if (*grad) {
          return grad_check(trials, grad_seed, tolerance, std::cout);
        } else if (*att) {
          attention_report(att_config, ckpt_path, probe, report_out, std::cout);
        }
        return kExitOk;
      },
      std::cerr);
}
