// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any fails. Optional argument: directory receiving the end-to-end metrics.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "classic/autodiff/ops.hpp"
#include "classic/autodiff/tape.hpp"
#include "classic/cli/commands.hpp"
#include "classic/cli/config_file.hpp"
#include "classic/cli/grad_suite.hpp"
#include "classic/harness/learner.hpp"
#include "classic/harness/sequence.hpp"
#include "classic/losses/losses.hpp"
#include "classic/masks/task_masks.hpp"
#include "oracles.hpp"

#ifndef CLASSIC_SOURCE_DIR
#define CLASSIC_SOURCE_DIR "."
#endif

using namespace classic;
using ad::Tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

Tensor random_matrix(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.uniform(-2, 2);
  return Tensor({n, d}, v);
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = cli::run_grad_suite(20, 1);
  const double secs = seconds_since(t0);
  Outcome o;
  double worst = 0;
  std::string worst_name;
  for (const auto& r : results) {
    o.pass = o.pass && r.passed;
    if (r.max_error >= worst) {
      worst = r.max_error;
      worst_name = r.name;
    }
  }
  o.pass = o.pass && secs < 120.0;
  o.detail = std::to_string(results.size()) + " checks x 20 trials, worst " + fmt(worst, 3) + " (" + worst_name +
             "), " + fmt(secs, 3) + " s";
  return o;
}

/// Trains four tasks and checks protected parameters and earlier-task
/// representations bit for bit.
Outcome protection(bool train_layer_norm) {
  harness::RunConfig c;
  c.model.train_layer_norm = train_layer_norm;
  c.model.seed = 11;
  c.training.epochs = 3;
  c.training.batch_size = 8;
  c.data.source = "synthetic";
  c.data.synthetic.n_tasks = 4;
  const auto suite = harness::load_data(c.data);
  harness::ContinualLearner learner(c.model, c.training, 3);
  for (const auto& t : suite) learner.add_task(t);
  const std::vector<data::Example> probe_rows(suite[0].test.begin(), suite[0].test.begin() + 8);
  const auto probe = data::encode(probe_rows, c.model.tokenizer(), 1);
  auto representation = [&](int task) {
    ad::NoGradScope off;
    return model::forward_masked(learner.model(), probe, learner.mask_store().get(task).binary, false, nullptr)
        .representation.clone();
  };

  Outcome o;
  std::size_t protected_values = 0, rep_checks = 0;
  std::vector<Tensor> reps;
  const auto backbone = model::backbone_checksum(learner.model());
  for (int t = 1; t <= 4; ++t) {
    std::vector<std::pair<Tensor, Tensor>> snapshots;  // (live, copy) of protected rows
    std::vector<std::vector<std::size_t>> rows;
    const auto layers = learner.model().maskable_layers();
    for (std::size_t l = 0; l < layers.size() && t > 1; ++l) {
      const auto& acc = learner.mask_store().accumulated()[l];
      std::vector<std::size_t> units;
      for (std::size_t u = 0; u < acc.size(); ++u) {
        if (acc.at(u) > 0.999) units.push_back(u);
      }
      rows.push_back(units);
      snapshots.emplace_back(layers[l]->weight, layers[l]->weight.clone());
      snapshots.emplace_back(layers[l]->bias, layers[l]->bias.clone());
    }
    learner.train_task(t);
    for (std::size_t l = 0; l < rows.size(); ++l) {
      const auto& [w, w0] = snapshots[2 * l];
      const auto& [b, b0] = snapshots[2 * l + 1];
      const std::size_t in = w.dim(1);
      for (std::size_t u : rows[l]) {
        protected_values += in + 1;
        if (std::memcmp(w.values().data() + u * in, w0.values().data() + u * in, in * sizeof(double)) != 0 ||
            b.at(u) != b0.at(u)) {
          o.pass = false;
        }
      }
    }
    if (!train_layer_norm) {
      for (int i = 1; i < t; ++i) {
        ++rep_checks;
        if (!bit_equal(representation(i), reps[static_cast<std::size_t>(i - 1)])) o.pass = false;
      }
    }
    reps.push_back(representation(t));
  }
  if (model::backbone_checksum(learner.model()) != backbone) o.pass = false;
  if (protected_values == 0) o.pass = false;
  o.detail = std::to_string(protected_values) + " protected values checked";
  if (!train_layer_norm) o.detail += ", " + std::to_string(rep_checks) + " earlier-task representations compared";
  return o;
}

Outcome loss_identities() {
  Outcome o;
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& name) {
    if (!ok) failed.push_back(name);
  };
  Rng rng(21);
  const auto z = random_matrix(3, 3, rng);
  check(losses::ced_loss({z}, 1.0, false).item() == 0.0, "ced t=1");
  for (std::size_t n : {2u, 3u, 4u}) {
    std::vector<double> row{0.4, -1.1, 0.7}, v;
    for (std::size_t i = 0; i < n; ++i) v.insert(v.end(), row.begin(), row.end());
    const Tensor same({n, 3}, v);
    const double expect = 2.0 * n * std::log(2.0 * n - 1.0);
    check(std::abs(losses::ced_pair_loss(same, same, 1.0).item() - expect) <= 1e-9, "ced identical N=" + std::to_string(n));
  }
  const Tensor twin({2, 3}, {0.2, 0.5, -0.3, 0.2, 0.5, -0.3});
  check(losses::csc_loss(twin, {1, 1}, 1.0).item() == 0.0 ||
            std::abs(losses::csc_loss(twin, {1, 1}, 1.0).item()) <= 1e-15,
        "csc identical pair");
  check(losses::csc_loss(random_matrix(2, 4, rng), {0, 1}, 1.0).item() == 0.0, "csc distinct labels");
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_matrix(4, 3, rng);
    const std::vector<int> y{0, 1, 0, static_cast<int>(rng.index(2))};
    check(losses::cks_loss(h, h, y, 0.7).item() == losses::csc_loss(h, y, 0.7).item(), "cks == csc");
    losses::LossTerms terms{losses::ce_loss(z, {0, 1, 2}), losses::csc_loss(h, y, 1.0),
                            losses::ced_loss({z, random_matrix(3, 3, rng)}, 1.0, false), losses::cks_loss(h, h, y, 1.0)};
    const double ce = terms.ce.item();
    const double total = losses::total_loss(terms, {0.0, 0.0, 0.0, 1.0}).total.item();
    check(std::memcmp(&ce, &total, sizeof(double)) == 0, "total with zero weights == ce");
  }
  o.pass = failed.empty();
  o.detail = o.pass ? "all identities hold" : "failed: " + failed.front();
  return o;
}

Outcome oracle_equivalence() {
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(3), d = 1 + rng.index(5);
    const double tau = rng.uniform(0.1, 2.0);
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.index(3));
    const auto a = random_matrix(n, d, rng), b = random_matrix(n, d, rng);
    const auto zt = random_matrix(n, 3, rng), zs = random_matrix(n, 3, rng);
    worst = std::max(worst, std::abs(losses::ced_pair_loss(zt, zs, tau).item() -
                                     oracle::ced_pair(oracle::rows_of(zt), oracle::rows_of(zs), tau)));
    worst = std::max(worst, std::abs(losses::csc_loss(a, y, tau).item() - oracle::csc(oracle::rows_of(a), y, tau)));
    worst = std::max(worst, std::abs(losses::cks_loss(a, b, y, tau).item() -
                                     oracle::cks(oracle::rows_of(a), oracle::rows_of(b), y, tau)));
  }
  return {worst <= 1e-10, "50 instances each of CED pair, CSC, CKS; max abs difference " + fmt(worst, 3)};
}

Outcome annealing() {
  bool ok = true;
  for (std::size_t big_b : {2u, 3u, 10u, 17u, 100u, 1000u}) {
    ok = ok && masks::anneal(1, big_b, 400) == 0.0025 && masks::anneal(big_b, big_b, 400) == 400.0;
    for (std::size_t b = 2; b <= big_b; ++b) ok = ok && masks::anneal(b, big_b, 400) > masks::anneal(b - 1, big_b, 400);
  }
  return {ok, "anneal(1,B,400) = 0.0025, anneal(B,B,400) = 400, strictly increasing for B in {2,3,10,17,100,1000}"};
}

Outcome end_to_end(const fs::path& out_dir) {
  harness::RunConfig config = cli::load_config(fs::path(CLASSIC_SOURCE_DIR) / "configs" / "e2e.ini");
  const auto suite = harness::load_data(config.data);
  omp_set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  config.training.baseline = harness::Baseline::kClassic;
  const auto classic_run = harness::run_sequence(config, suite, false).metrics;
  config.training.baseline = harness::Baseline::kNcl;
  const auto ncl_run = harness::run_sequence(config, suite, false).metrics;
  const double secs = seconds_since(t0);
  omp_set_num_threads(omp_get_num_procs());
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "e2e_classic_metrics.json") << classic_run.dump(2) << '\n';
    std::ofstream(out_dir / "e2e_ncl_metrics.json") << ncl_run.dump(2) << '\n';
  }
  const auto cf = harness::aggregate(classic_run, "final"), cw = harness::aggregate(classic_run, "forward");
  const auto nf = harness::aggregate(ncl_run, "final");
  Outcome o;
  o.pass = cf.mf1 >= nf.mf1 && cf.mf1 >= 0.95 * cw.mf1 && secs < 900.0;
  o.detail = "classic final MF1 " + fmt(cf.mf1) + " vs ncl " + fmt(nf.mf1) + "; classic final/forward " +
             fmt(cf.mf1 / cw.mf1) + "; " + fmt(secs, 3) + " s on 1 thread";
  return o;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "classic_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "[model]\nd_model = 16\nn_layers = 1\nffn_dim = 32\n[training]\nepochs = 2\n"
                                    "batch_size = 8\n[data]\nsource = synthetic\ntasks = 3\nper_task = 60\n"
                                    "[run]\nseeds = 1, 2, 3\n";
  std::string bytes[2];
  for (int i = 0; i < 2; ++i) {
    cli::RunOptions opts;
    opts.config = dir / "run.ini";
    opts.out = dir / ("out" + std::to_string(i));
    std::ostringstream sink;
    cli::run(opts, sink);
    std::ifstream f(opts.out / "metrics.json", std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    bytes[i] = s.str();
  }
  fs::remove_all(dir);
  return {!bytes[0].empty() && bytes[0] == bytes[1], std::to_string(bytes[0].size()) + " bytes, identical: " +
                                                         (bytes[0] == bytes[1] ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"protection (layer norm trainable)", [] { return protection(true); }},
      {"protection and frozen representations (layer norm frozen)", [] { return protection(false); }},
      {"loss identities", loss_identities},
      {"oracle equivalence", oracle_equivalence},
      {"annealing", annealing},
      {"end-to-end directional experiment", [&] { return end_to_end(out_dir); }},
      {"determinism", determinism},
  };
  bool all = true;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
