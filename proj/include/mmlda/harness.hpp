#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmlda/attacks.hpp"
#include "mmlda/config.hpp"
#include "mmlda/data.hpp"
#include "mmlda/model.hpp"

namespace mmlda {

struct Splits {
  Dataset train;
  Dataset test;
};

/// Materializes the train/test splits described by the config.
Splits build_datasets(const DatasetSpec& spec);

/// Configured latent width, or max(10, L - 1) when unset.
std::size_t resolve_latent_dim(const NetworkSpec& spec, std::size_t classes);

/// Fresh network plus the configured head. The MM-LDA head uses uniform
/// priors unless cfg.priors is empirical, in which case train's priors.
Model init_model(const ExperimentConfig& cfg, const Dataset& train);
Model init_model(const ExperimentConfig& cfg, const Dataset& train, HeadKind head);

struct TrainResult {
  Model model;
  std::vector<double> loss_trace;  // minibatch loss per step
};

/// Minibatch Adam on mean cross-entropy, reshuffling every epoch.
TrainResult train_model(Model model, const Dataset& train, const TrainingSpec& spec);
TrainResult train(const ExperimentConfig& cfg, const Dataset& train);

struct FinetuneResult {
  Model model;
  std::vector<double> loss_trace;
  std::vector<double> epsilon_draws;  // per adversarial example, in order
};

/// Half-clean, half-adversarial minibatches crafted on the current model.
/// SAT uses spec.epsilon; HAT draws eps ~ U[hat_min, hat_max] per example.
FinetuneResult adversarial_finetune(Model model, const Dataset& train, const FinetuneSpec& spec,
                                    const TrainingSpec& training, int attack_steps);

double accuracy(const Model& model, const Dataset& d);

struct AttackCell {
  AttackKind kind;
  double epsilon;
  double accuracy;
  double success_rate;
  double mean_distortion;
};

struct AttackReport {
  double clean_accuracy = 0.0;
  std::size_t examples = 0;
  std::vector<AttackCell> cells;
};

/// Accuracy per (attack, eps) over the whole evaluated subset. C&W entries in
/// the grid are skipped; use evaluate_cw.
AttackReport evaluate_attacks(const Model& model, const Dataset& d, const AttackGrid& grid);

struct CwReport {
  double mean_distortion = 0.0;  // over successful attacks
  double success_rate = 0.0;     // over attacked examples
  std::size_t attacked = 0;      // initially correct examples
  std::size_t excluded = 0;      // initially misclassified, not attacked
  std::size_t succeeded = 0;
};

CwReport evaluate_cw(const Model& model, const Dataset& d, double kappa, int search_steps,
                     int max_iters, std::size_t max_examples = 0);

struct SelectCRow {
  double C = 0.0;
  std::vector<double> errors;  // validation error per fold
  double mean = 0.0;
  double sd = 0.0;
};

/// k-fold validation error of the MM-LDA network for each candidate C.
std::vector<SelectCRow> select_C(const ExperimentConfig& cfg, const Dataset& train,
                                 const std::vector<double>& candidates, std::size_t k);

struct BiasRow {
  std::size_t counterpart = 0;
  std::vector<double> alpha;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double sr_accuracy = 0.0;
  double mmlda_accuracy = 0.0;
};

/// Trains SR and MM-LDA (uniform priors) with identical budgets on class-biased
/// train/test splits for each counterpart.
BiasRow bias_run(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test,
                 const BiasProbability& bp, std::size_t counterpart, std::uint64_t seed);
std::vector<BiasRow> bias_experiment(const ExperimentConfig& cfg, const Dataset& train,
                                     const Dataset& test, BiasKind kind, std::uint64_t seed);

struct TheoryCheck {
  std::string name;
  std::string parameters;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  /// E[d](delta, zeta) under test; defaults to the closed form.
  std::function<double(double, double)> expected_distance;
  std::size_t mc_samples = 1'000'000;
  std::uint64_t seed = 7;
};

std::vector<TheoryCheck> verify_theory(const VerifyOptions& options = {});

void write_theory_csv(std::ostream& out, const std::vector<TheoryCheck>& checks);
void write_select_c_csv(std::ostream& out, const std::vector<SelectCRow>& rows);
void write_bias_csv(std::ostream& out, const std::vector<BiasRow>& rows);
void write_attack_report_csv(std::ostream& out, const AttackReport& report);

/// CSV of (label, z_1..z_p).
void export_features(std::ostream& out, const Model& model, const Dataset& d);

/// Digest of a run summary; ignores "wall_clock_seconds" and "digest".
std::string report_digest(const nlohmann::json& report);

nlohmann::json to_json(const AttackReport& r);
nlohmann::json to_json(const CwReport& r);
nlohmann::json to_json(const std::vector<TheoryCheck>& checks);

}  // namespace mmlda
