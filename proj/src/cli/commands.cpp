#include "classic/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "classic/attention/knowledge_attention.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/cli/config_file.hpp"
#include "classic/cli/grad_suite.hpp"
#include "classic/data/jsonl.hpp"
#include "classic/error.hpp"
#include "classic/harness/sequence.hpp"
#include "classic/model/checkpoint.hpp"

namespace classic::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

void emit_json(const nlohmann::json& j, const fs::path& out, std::ostream& sink) {
  if (out.empty()) {
    sink << j.dump(2) << '\n';
  } else {
    write_text(out, j.dump(2) + "\n");
  }
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void gen_data(const data::SyntheticSpec& spec, const fs::path& out) {
  const auto suite = data::generate_synthetic_suite(spec);
  data::write_suite(out, suite);
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : suite) {
    tasks.push_back({{"name", t.name}, {"train", t.train.size()}, {"valid", t.valid.size()}, {"test", t.test.size()}});
  }
  const nlohmann::json manifest = {{"generator", "synthetic"},
                                   {"seed", spec.seed},
                                   {"tasks", spec.n_tasks},
                                   {"per_task", spec.examples_per_task},
                                   {"flip", spec.flip_fraction},
                                   {"classes", spec.n_classes},
                                   {"splits", tasks}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
}

void run(const RunOptions& options, std::ostream& info) {
  if (options.out.empty()) throw ConfigError("--out is required");
  harness::RunConfig config = load_config(options.config);
  if (options.baseline) config.training.baseline = harness::parse_baseline(*options.baseline);
  if (options.mode) config.mode = harness::parse_eval_mode(*options.mode);
  const bool grid = options.ablate == "all";
  if (!grid && !options.ablate.empty()) config.training.ablation = parse_ablation(options.ablate);
  if (grid && config.training.baseline != harness::Baseline::kClassic) {
    throw ConfigError("--ablate all applies to the classic baseline only");
  }
  harness::validate(config);
  const auto suite = harness::load_data(config.data);

  if (!options.checkpoint.empty()) {
    const auto ckpt = model::read_checkpoint(options.checkpoint);
    const auto report = harness::evaluate_checkpoint(config, ckpt, suite, config.mode);
    write_text(options.out / "metrics.json", report.dump(2) + "\n");
    info << "scored " << options.checkpoint.string() << " -> " << (options.out / "metrics.json").string() << '\n';
    return;
  }

  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json run_info = {{"started", started}, {"config_digest", harness::config_digest(config)}};
  if (grid) {
    const auto table = harness::ablate(config, suite, harness::ablation_grid());
    write_text(options.out / "ablation.json", table.dump(2) + "\n");
    info << "wrote " << (options.out / "ablation.json").string() << '\n';
  } else {
    const auto outputs = harness::run_sequence(config, suite, true);
    write_text(options.out / "metrics.json", outputs.metrics.dump(2) + "\n");
    write_text(options.out / "training_log.jsonl", outputs.training_log);
    for (const auto& [seed, ckpt] : outputs.checkpoints) {
      const fs::path path = options.out / "checkpoints" / ("seed" + std::to_string(seed) + ".ckpt");
      fs::create_directories(path.parent_path());
      model::write_checkpoint(path, ckpt);
    }
    const auto& agg = outputs.metrics["aggregates"];
    info << "forward " << agg["forward"].dump() << "\nfinal " << agg["final"].dump() << '\n';
  }
  run_info["finished"] = utc_now();
  run_info["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run_info["config"] = format_config(config);
  write_text(options.out / "run_info.json", run_info.dump(2) + "\n");
}

void mask_report(const fs::path& checkpoint, const fs::path& out, std::ostream& stdout_sink) {
  const auto ckpt = model::read_checkpoint(checkpoint);
  if (!ckpt.meta.contains("mask_tasks")) throw CheckpointError("checkpoint holds no task masks");
  emit_json(masks::mask_report(model::load_masks(ckpt)), out, stdout_sink);
}

int grad_check(std::size_t trials, std::uint64_t seed, double tolerance, std::ostream& out) {
  if (trials == 0) throw ConfigError("--trials must be at least 1");
  bool ok = true;
  for (const auto& r : run_grad_suite(trials, seed, tolerance)) {
    out << (r.passed ? "ok   " : "FAIL ") << std::left << std::setw(20) << r.name << " trials=" << r.trials
        << " max_rel_error=" << std::scientific << std::setprecision(3) << r.max_error << std::defaultfloat << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

void attention_report(const fs::path& config_path, const fs::path& checkpoint, std::size_t probe, const fs::path& out,
                      std::ostream& stdout_sink) {
  if (probe < 1) throw ConfigError("--probe must be at least 1");
  const harness::RunConfig config = load_config(config_path);
  const auto ckpt = model::read_checkpoint(checkpoint);
  if (!ckpt.meta.contains("mask_tasks")) throw CheckpointError("checkpoint holds no task masks");
  const auto m = model::load_model(ckpt);
  const auto store = model::load_masks(ckpt);
  attention::AttentionParams params;
  params.w_f = ckpt.get("attention/w_f");
  params.w_g = ckpt.get("attention/w_g");
  params.w_v = ckpt.get("attention/w_v");
  params.w_q = ckpt.get("attention/w_q");
  params.gamma = ckpt.get("attention/gamma");

  std::vector<std::string> order;
  try {
    order = ckpt.meta.at("task_order").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint lacks task_order (") + e.what() + ")");
  }
  if (order.empty()) throw CheckpointError("checkpoint has no trained tasks");
  const auto suite = harness::load_data(config.data);
  auto it = std::find_if(suite.begin(), suite.end(), [&](const auto& t) { return t.name == order.front(); });
  if (it == suite.end()) throw DataError("task \"" + order.front() + "\" is not in the data source");
  std::vector<data::Example> examples(it->test.begin(),
                                      it->test.begin() + static_cast<std::ptrdiff_t>(std::min(probe, it->test.size())));

  ad::NoGradScope no_grad;
  const auto batch = data::encode(examples, m.config.tokenizer(), 1);
  std::vector<ad::Tensor> views;
  for (int id : store.task_ids()) {
    views.push_back(model::forward_masked(m, batch, store.get(id).binary, false, nullptr).representation);
  }
  nlohmann::json report = attention::alpha_report(views, params);
  report["probe_task"] = order.front();
  report["task_order"] = order;
  emit_json(report, out, stdout_sink);
}

}  // namespace classic::cli
