// mmlda: command-line driver for the MM-LDA toolkit.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmlda/checkpoint.hpp"
#include "mmlda/config.hpp"
#include "mmlda/harness.hpp"
#include "mmlda/mmd_core.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmlda;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// Exit codes: 0 ok, 1 failed check or runtime error, 2 bad config/arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig cfg;
  try {
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    if (g.seed) {
      cfg.dataset.seed = *g.seed;
      cfg.training.seed = *g.seed;
    }
    if (!g.out.empty()) cfg.output_dir = g.out;
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  fs::create_directories(cfg.output_dir);
  return cfg;
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  std::ofstream f(fs::path(cfg.output_dir) / name);
  if (!f) throw std::runtime_error("cannot write " + (fs::path(cfg.output_dir) / name).string());
  return f;
}

fs::path model_path(const ExperimentConfig& cfg, const std::string& given) {
  return given.empty() ? fs::path(cfg.output_dir) / "model.ckpt" : fs::path(given);
}

// Writes <command>.json with a digest that excludes wall-clock time and prints the digest.
void finish(const ExperimentConfig& cfg, const std::string& command, json summary,
            std::chrono::steady_clock::time_point start) {
  summary["command"] = command;
  summary["seed"] = cfg.training.seed;
  summary["config_digest"] = config_digest(cfg);
  summary["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  summary["digest"] = report_digest(summary);
  open_out(cfg, command + ".json") << summary.dump(2) << '\n';
  std::cout << command << " digest " << summary["digest"].get<std::string>() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MM-LDA networks: optimal means, training, attacks and theory checks"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override dataset and training seeds");
  app.add_option("--out", g.out, "output directory (overrides config)");

  double means_C = 100.0;
  std::size_t means_p = 10, means_L = 10;
  std::optional<std::uint64_t> rotate;
  auto* means = app.add_subcommand("means", "generate and check optimal class means");
  means->add_option("-C", means_C, "squared norm of each mean")->check(CLI::PositiveNumber);
  means->add_option("-p", means_p, "dimension")->check(CLI::PositiveNumber);
  means->add_option("-L", means_L, "number of classes")->check(CLI::Range(2, 1 << 20));
  means->add_option("--rotate", rotate, "apply a seeded random rotation");

  auto* train = app.add_subcommand("train", "train a network with the configured head");

  std::string model_in;
  auto* finetune = app.add_subcommand("finetune", "adversarial fine-tuning (sat or hat)");
  finetune->add_option("--model", model_in, "base checkpoint (default <out>/model.ckpt)");
  std::string mode_override;
  finetune->add_option("--mode", mode_override, "sat or hat (overrides config)");

  auto* attack = app.add_subcommand("attack", "evaluate the attack grid on the test split");
  attack->add_option("--model", model_in, "checkpoint (default <out>/model.ckpt)");

  auto* cw = app.add_subcommand("cw", "mean minimal C&W distortion on the test split");
  cw->add_option("--model", model_in, "checkpoint (default <out>/model.ckpt)");

  std::vector<double> candidates{1.0, 10.0, 100.0, 1000.0};
  std::size_t folds = 5;
  auto* select = app.add_subcommand("select-c", "k-fold validation error per candidate C");
  select->add_option("--candidates", candidates, "candidate C values")->expected(1, -1);
  select->add_option("-k,--folds", folds, "number of folds")->check(CLI::Range(2, 1000));

  std::string bias_kind = "bp1";
  auto* bias = app.add_subcommand("bias", "SR vs MM-LDA on class-biased counterparts");
  bias->add_option("--kind", bias_kind, "bp1 or bp2")->check(CLI::IsMember({"bp1", "bp2"}));

  std::size_t mc_samples = 1'000'000;
  auto* verify = app.add_subcommand("verify", "run the closed-form theory checks");
  verify->add_option("--mc-samples", mc_samples, "Monte Carlo samples per cell")
      ->check(CLI::PositiveNumber);

  std::string split = "test";
  auto* exportf = app.add_subcommand("export-features", "dump latent features as CSV");
  exportf->add_option("--model", model_in, "checkpoint (default <out>/model.ckpt)");
  exportf->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

  CLI11_PARSE(app, argc, argv);
  const auto start = std::chrono::steady_clock::now();

  try {
    ExperimentConfig cfg = resolve_config(g);

    if (*means) {
      MeanSet ms = generate_opt_means(means_C, means_p, means_L);
      if (rotate) ms = rotate_means(ms, *rotate);
      save_mean_set(ms, fs::path(cfg.output_dir) / "means.txt");
      auto rep = verify_opt_condition(ms, 1e-9);
      json s{{"C", means_C},
             {"p", means_p},
             {"L", means_L},
             {"opt_condition_pass", rep.pass},
             {"max_diag_err", rep.max_diag_err},
             {"max_offdiag_err", rep.max_offdiag_err},
             {"approx_robustness", approx_robustness(ms)},
             {"upper_bound", robustness_upper_bound(means_C, means_L)},
             {"means_sha256", sha256_hex(emit_mean_set(ms))}};
      finish(cfg, "means", s, start);
      return rep.pass ? 0 : 1;
    }

    if (*verify) {
      VerifyOptions opt;
      opt.mc_samples = mc_samples;
      if (g.seed) opt.seed = *g.seed;
      auto checks = verify_theory(opt);
      auto csv = open_out(cfg, "theory.csv");
      write_theory_csv(csv, checks);
      write_theory_csv(std::cout, checks);
      bool ok = true;
      for (const auto& c : checks) ok = ok && c.pass;
      finish(cfg, "verify", {{"checks", to_json(checks)}, {"all_pass", ok}}, start);
      return ok ? 0 : 1;
    }

    Splits data = build_datasets(cfg.dataset);

    if (*train) {
      TrainResult t = mmlda::train(cfg, data.train);
      const fs::path ckpt = fs::path(cfg.output_dir) / "model.ckpt";
      save_model(t.model, ckpt);
      auto loss = open_out(cfg, "loss.csv");
      loss << "step,loss\n";
      loss.precision(17);
      for (std::size_t i = 0; i < t.loss_trace.size(); ++i) loss << i << ',' << t.loss_trace[i] << '\n';
      json s{{"head", to_string(cfg.head)},
             {"steps", cfg.training.steps},
             {"initial_loss", t.loss_trace.empty() ? 0.0 : t.loss_trace.front()},
             {"final_loss", t.loss_trace.empty() ? 0.0 : t.loss_trace.back()},
             {"train_accuracy", accuracy(t.model, data.train)},
             {"test_accuracy", accuracy(t.model, data.test)},
             {"checkpoint_sha256", sha256_hex(encode_model(t.model))}};
      finish(cfg, "train", s, start);
      return 0;
    }

    if (*select) {
      auto rows = select_C(cfg, data.train, candidates, folds);
      auto csv = open_out(cfg, "select_c.csv");
      write_select_c_csv(csv, rows);
      json table = json::array();
      for (const auto& r : rows) table.push_back({{"C", r.C}, {"errors", r.errors}, {"mean", r.mean}, {"sd", r.sd}});
      finish(cfg, "select-c", {{"folds", folds}, {"rows", table}}, start);
      return 0;
    }

    if (*bias) {
      const auto kind = bias_kind_from_string(bias_kind);
      auto rows = bias_experiment(cfg, data.train, data.test, kind, cfg.dataset.seed);
      auto csv = open_out(cfg, "bias_" + bias_kind + ".csv");
      write_bias_csv(csv, rows);
      std::size_t wins = 0;
      json table = json::array();
      for (const auto& r : rows) {
        wins += r.mmlda_accuracy >= r.sr_accuracy;
        table.push_back({{"counterpart", r.counterpart},
                         {"alpha", r.alpha},
                         {"sr_accuracy", r.sr_accuracy},
                         {"mmlda_accuracy", r.mmlda_accuracy}});
      }
      finish(cfg, "bias", {{"kind", bias_kind}, {"mmlda_at_least_sr", wins}, {"rows", table}}, start);
      return 0;
    }

    Model model = load_model(model_path(cfg, model_in));

    if (*finetune) {
      FinetuneSpec spec = cfg.finetune;
      if (!mode_override.empty()) spec.mode = finetune_mode_from_string(mode_override);
      if (spec.mode == FinetuneMode::none) throw ConfigError("finetune mode is none; use --mode sat|hat");
      const double before = accuracy(model, data.test);
      FinetuneResult f = adversarial_finetune(std::move(model), data.train, spec, cfg.training,
                                              cfg.attacks.steps);
      save_model(f.model, fs::path(cfg.output_dir) / "finetuned.ckpt");
      auto loss = open_out(cfg, "finetune_loss.csv");
      loss << "step,loss\n";
      loss.precision(17);
      for (std::size_t i = 0; i < f.loss_trace.size(); ++i) loss << i << ',' << f.loss_trace[i] << '\n';
      json s{{"mode", to_string(spec.mode)},
             {"attack", to_string(spec.attack)},
             {"steps", spec.steps},
             {"test_accuracy_before", before},
             {"test_accuracy_after", accuracy(f.model, data.test)},
             {"checkpoint_sha256", sha256_hex(encode_model(f.model))}};
      finish(cfg, "finetune", s, start);
      return 0;
    }

    if (*attack) {
      AttackReport rep = evaluate_attacks(model, data.test, cfg.attacks);
      auto csv = open_out(cfg, "attack.csv");
      write_attack_report_csv(csv, rep);
      finish(cfg, "attack", {{"report", to_json(rep)}}, start);
      return 0;
    }

    if (*cw) {
      CwReport rep = evaluate_cw(model, data.test, cfg.attacks.kappa, cfg.attacks.search_steps,
                                 cfg.attacks.max_iters, cfg.attacks.max_examples);
      finish(cfg, "cw", {{"report", to_json(rep)}}, start);
      return 0;
    }

    if (*exportf) {
      auto csv = open_out(cfg, "features_" + split + ".csv");
      export_features(csv, model, split == "train" ? data.train : data.test);
      finish(cfg, "export-features", {{"split", split}, {"rows", (split == "train" ? data.train : data.test).size()}}, start);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
