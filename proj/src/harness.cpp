#include "mmlda/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mmlda/mmd_core.hpp"
#include "mmlda/rng.hpp"
#include "mmlda/theory.hpp"

namespace mmlda {

using nlohmann::json;

Splits build_datasets(const DatasetSpec& spec) {
  if (spec.kind == "idx") {
    return {load_idx(spec.train_images, spec.train_labels),
            load_idx(spec.test_images, spec.test_labels)};
  }
  const Rng root(spec.seed);
  const std::uint64_t train_seed = root.fork(1).seed();
  const std::uint64_t test_seed = root.fork(2).seed();
  if (spec.kind == "mmd") {
    const std::size_t p = std::max<std::size_t>(10, spec.classes - 1);
    MMDSpec mmd{generate_opt_means(spec.mmd_C, p, spec.classes),
                std::vector<double>(spec.classes, 1.0 / static_cast<double>(spec.classes))};
    return {sample_mmd(mmd, spec.n_train, train_seed), sample_mmd(mmd, spec.n_test, test_seed)};
  }
  const auto kind = synthetic_kind_from_string(spec.kind);
  return {sample_synthetic_nonlinear(kind, spec.classes, spec.n_train, spec.noise, train_seed),
          sample_synthetic_nonlinear(kind, spec.classes, spec.n_test, spec.noise, test_seed)};
}

std::size_t resolve_latent_dim(const NetworkSpec& spec, std::size_t classes) {
  const std::size_t p = spec.latent_dim ? spec.latent_dim : std::max<std::size_t>(10, classes - 1);
  if (classes > p + 1)
    throw std::invalid_argument("latent_dim " + std::to_string(p) + " too small for " +
                                std::to_string(classes) + " classes");
  return p;
}

Model init_model(const ExperimentConfig& cfg, const Dataset& train) {
  return init_model(cfg, train, cfg.head);
}

Model init_model(const ExperimentConfig& cfg, const Dataset& train, HeadKind head) {
  const std::size_t L = train.classes;
  const std::size_t p = resolve_latent_dim(cfg.network, L);
  const Rng root(cfg.training.seed);
  Network net = Network::make_mlp(train.dim(), cfg.network.hidden, p, root.fork(11).seed());
  if (head == HeadKind::sr) return Model(std::move(net), SRHead::make(L, p, root.fork(12).seed()));
  MeanSet means = generate_opt_means(cfg.C, p, L);
  if (cfg.priors == PriorsMode::uniform)
    return Model(std::move(net), MMLDAHead::make_uniform(std::move(means)));
  // Renormalize so the priors sum to 1 to machine precision.
  std::vector<double> priors = train.empirical_priors;
  const double total = std::accumulate(priors.begin(), priors.end(), 0.0);
  for (double& p_k : priors) p_k /= total;
  return Model(std::move(net), MMLDAHead::make(std::move(means), std::move(priors)));
}

namespace {

// Cycles through seeded epoch permutations.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, Rng rng) : n_(n), batch_(std::min(batch, n)), rng_(rng) {
    if (n == 0) throw std::invalid_argument("cannot sample batches from an empty dataset");
    perm_ = rng_.permutation(n_);
  }
  std::vector<std::size_t> next() {
    if (pos_ + batch_ > n_) {
      perm_ = rng_.permutation(n_);
      pos_ = 0;
    }
    std::vector<std::size_t> idx(perm_.begin() + static_cast<long>(pos_),
                                 perm_.begin() + static_cast<long>(pos_ + batch_));
    pos_ += batch_;
    return idx;
  }

 private:
  std::size_t n_, batch_, pos_ = 0;
  Rng rng_;
  std::vector<std::size_t> perm_;
};

std::vector<int> gather(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

TrainResult train_model(Model model, const Dataset& train, const TrainingSpec& spec) {
  TrainResult result;
  if (spec.steps > 0) {
    BatchSampler sampler(train.size(), spec.batch_size, Rng(spec.seed).fork(21));
    auto blocks = model.parameter_blocks();
    AdamState adam(AdamConfig{spec.learning_rate, 0.9, 0.999, 1e-8}, blocks);
    result.loss_trace.reserve(static_cast<std::size_t>(spec.steps));
    for (long step = 0; step < spec.steps; ++step) {
      auto idx = sampler.next();
      Tensor x = train.features.select_rows(idx);
      auto y = gather(train.labels, idx);
      ModelGradients g = model.loss_and_gradients(x, y);
      adam_step(adam, blocks, g.params);
      result.loss_trace.push_back(g.loss);
    }
  }
  result.model = std::move(model);
  return result;
}

TrainResult train(const ExperimentConfig& cfg, const Dataset& train) {
  return train_model(init_model(cfg, train), train, cfg.training);
}

FinetuneResult adversarial_finetune(Model model, const Dataset& train, const FinetuneSpec& spec,
                                    const TrainingSpec& training, int attack_steps) {
  FinetuneResult result;
  if (spec.mode == FinetuneMode::none || spec.steps == 0) {
    result.model = std::move(model);
    return result;
  }
  if (spec.attack == AttackKind::jsma || spec.attack == AttackKind::cw)
    throw std::invalid_argument("fine-tuning supports fgsm, bim and ilcm only");
  const Rng root(training.seed);
  Rng eps_rng = root.fork(31);
  // Two halves of equal size; a batch of one still gets one of each.
  const std::size_t half = std::max<std::size_t>(1, training.batch_size / 2);
  BatchSampler clean_sampler(train.size(), half, root.fork(32));
  BatchSampler adv_sampler(train.size(), half, root.fork(33));
  auto blocks = model.parameter_blocks();
  AdamState adam(AdamConfig{spec.learning_rate, 0.9, 0.999, 1e-8}, blocks);

  for (long step = 0; step < spec.steps; ++step) {
    auto clean_idx = clean_sampler.next();
    auto adv_idx = adv_sampler.next();
    Tensor xa = train.features.select_rows(adv_idx);
    auto ya = gather(train.labels, adv_idx);
    std::vector<double> eps(adv_idx.size(), spec.epsilon);
    if (spec.mode == FinetuneMode::hat)
      for (double& e : eps) e = eps_rng.uniform(spec.hat_min, spec.hat_max);
    result.epsilon_draws.insert(result.epsilon_draws.end(), eps.begin(), eps.end());

    AttackResult adv;
    switch (spec.attack) {
      case AttackKind::fgsm: adv = fgsm(model, xa, ya, eps); break;
      case AttackKind::bim: adv = bim(model, xa, ya, eps, attack_steps); break;
      case AttackKind::ilcm: adv = ilcm(model, xa, eps, attack_steps); break;
      default: throw std::logic_error("unsupported fine-tune attack");
    }

    Tensor xc = train.features.select_rows(clean_idx);
    auto yc = gather(train.labels, clean_idx);
    Tensor x(xc.rows() + adv.adversarial.rows(), xc.cols());
    std::copy(xc.values().begin(), xc.values().end(), x.values().begin());
    std::copy(adv.adversarial.values().begin(), adv.adversarial.values().end(),
              x.values().begin() + static_cast<long>(xc.size()));
    yc.insert(yc.end(), ya.begin(), ya.end());

    ModelGradients g = model.loss_and_gradients(x, yc);
    adam_step(adam, blocks, g.params);
    result.loss_trace.push_back(g.loss);
  }
  result.model = std::move(model);
  return result;
}

double accuracy(const Model& model, const Dataset& d) {
  if (d.size() == 0) return 0.0;
  auto pred = model.predict(d.features);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == d.labels[i];
  return static_cast<double>(ok) / static_cast<double>(d.size());
}

namespace {

Dataset head_subset(const Dataset& d, std::size_t max_examples) {
  if (max_examples == 0 || max_examples >= d.size()) return d;
  std::vector<std::size_t> idx(max_examples);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return d.subset(idx);
}

double finite_mean(const std::vector<double>& v, const std::vector<std::uint8_t>& mask) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i]) {
      s += v[i];
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

AttackReport evaluate_attacks(const Model& model, const Dataset& full, const AttackGrid& grid) {
  const Dataset d = head_subset(full, grid.max_examples);
  AttackReport rep;
  rep.examples = d.size();
  rep.clean_accuracy = accuracy(model, d);
  for (auto kind : grid.kinds) {
    if (kind == AttackKind::cw) continue;
    for (double eps : grid.epsilons) {
      AttackConfig cfg;
      cfg.kind = kind;
      cfg.epsilon = eps;
      cfg.steps = grid.steps;
      cfg.pixel_budget = grid.pixel_budget;
      AttackResult r = run_attack(model, d.features, d.labels, cfg);
      std::size_t ok = 0;
      for (std::size_t i = 0; i < d.size(); ++i) ok += r.adversarial_prediction[i] == d.labels[i];
      AttackCell cell;
      cell.kind = kind;
      cell.epsilon = eps;
      cell.accuracy = d.size() ? static_cast<double>(ok) / static_cast<double>(d.size()) : 0.0;
      cell.success_rate = r.success_rate();
      std::vector<std::uint8_t> all(d.size(), 1);
      cell.mean_distortion = finite_mean(r.distortion, all);
      rep.cells.push_back(cell);
    }
  }
  return rep;
}

CwReport evaluate_cw(const Model& model, const Dataset& full, double kappa, int search_steps,
                     int max_iters, std::size_t max_examples) {
  const Dataset d = head_subset(full, max_examples);
  CwReport rep;
  auto pred = model.predict(d.features);
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (pred[i] == d.labels[i])
      correct.push_back(i);
    else
      ++rep.excluded;
  }
  rep.attacked = correct.size();
  if (correct.empty()) return rep;
  const Dataset attacked = d.subset(correct);
  AttackConfig cfg;
  cfg.kind = AttackKind::cw;
  cfg.kappa = kappa;
  cfg.search_steps = search_steps;
  cfg.max_iters = max_iters;
  AttackResult r = cw_l2(model, attacked.features, attacked.labels, cfg);
  for (auto s : r.success) rep.succeeded += s ? 1 : 0;
  rep.success_rate = static_cast<double>(rep.succeeded) / static_cast<double>(rep.attacked);
  rep.mean_distortion = finite_mean(r.distortion, r.success);
  return rep;
}

std::vector<SelectCRow> select_C(const ExperimentConfig& cfg, const Dataset& train,
                                 const std::vector<double>& candidates, std::size_t k) {
  if (candidates.empty()) throw std::invalid_argument("no candidate C values");
  for (double c : candidates)
    if (!(c > 0.0)) throw std::invalid_argument("candidate C values must be positive");
  auto folds = kfold_split(train, k, cfg.training.seed);
  std::vector<SelectCRow> rows;
  for (double c : candidates) {
    ExperimentConfig run = cfg;
    run.C = c;
    run.head = HeadKind::mmlda;
    SelectCRow row;
    row.C = c;
    for (const auto& fold : folds) {
      Dataset tr = train.subset(fold.train);
      Dataset va = train.subset(fold.validation);
      TrainResult t = mmlda::train(run, tr);
      row.errors.push_back(1.0 - accuracy(t.model, va));
    }
    row.mean = std::accumulate(row.errors.begin(), row.errors.end(), 0.0) /
               static_cast<double>(row.errors.size());
    double ss = 0.0;
    for (double e : row.errors) ss += (e - row.mean) * (e - row.mean);
    row.sd = row.errors.size() > 1 ? std::sqrt(ss / static_cast<double>(row.errors.size() - 1)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

BiasRow bias_run(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test,
                 const BiasProbability& bp, std::size_t counterpart, std::uint64_t seed) {
  const Rng root(seed);
  Dataset tr = class_biased_subsample(train, bp, root.fork(2 * counterpart + 1).seed());
  Dataset te = class_biased_subsample(test, bp, root.fork(2 * counterpart + 2).seed());
  ExperimentConfig run = cfg;
  run.priors = PriorsMode::uniform;
  BiasRow row;
  row.counterpart = counterpart;
  row.alpha = bp.alpha;
  row.train_size = tr.size();
  row.test_size = te.size();
  row.sr_accuracy = accuracy(train_model(init_model(run, tr, HeadKind::sr), tr, run.training).model, te);
  row.mmlda_accuracy =
      accuracy(train_model(init_model(run, tr, HeadKind::mmlda), tr, run.training).model, te);
  return row;
}

std::vector<BiasRow> bias_experiment(const ExperimentConfig& cfg, const Dataset& train,
                                     const Dataset& test, BiasKind kind, std::uint64_t seed) {
  if (train.classes != 10) throw std::invalid_argument("bias experiment needs a 10-class dataset");
  auto counterparts = bias_counterparts(kind, seed);
  std::vector<BiasRow> rows;
  for (std::size_t c = 0; c < counterparts.size(); ++c)
    rows.push_back(bias_run(cfg, train, test, counterparts[c], c, seed));
  return rows;
}

namespace {

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

TheoryCheck check(std::string name, std::string params, double value, double reference,
                  double tolerance, bool pass) {
  return TheoryCheck{std::move(name), std::move(params), value, reference, tolerance, pass};
}

// Random SPD matrix A A^T + p I.
Tensor random_spd(std::size_t p, Rng& rng) {
  Tensor a(p, p);
  for (double& v : a.values()) v = rng.normal();
  Tensor s = matmul_transposed(a, a);
  for (std::size_t i = 0; i < p; ++i) s(i, i) += static_cast<double>(p);
  return s;
}

}  // namespace

std::vector<TheoryCheck> verify_theory(const VerifyOptions& options) {
  auto ed = options.expected_distance
                ? options.expected_distance
                : [](double delta, double zeta) {
                    return theory::expected_boundary_distance({delta, zeta});
                  };
  std::vector<TheoryCheck> out;

  // Optimality condition and bound attainment.
  const std::pair<std::size_t, std::size_t> grid[] = {{2, 1}, {3, 2}, {10, 10}, {10, 63}, {64, 63}};
  for (auto [L, p] : grid)
    for (double C : {1.0, 100.0}) {
      MeanSet ms = generate_opt_means(C, p, L);
      auto rep = verify_opt_condition(ms, 1e-9);
      const std::string params = fmt("L=%g p=%g C=%g", double(L), double(p), C);
      out.push_back(check("opt_condition", params, std::max(rep.max_diag_err, rep.max_offdiag_err),
                          0.0, 1e-9 * C, rep.pass));
      const double rb = approx_robustness(ms), ub = robustness_upper_bound(C, L);
      out.push_back(check("bound_attained", params, rb, ub, 1e-9,
                          std::abs(rb - ub) <= 1e-9 * ub));
    }

  // Expected boundary distance against Monte Carlo.
  std::uint64_t mc_key = 0;
  for (double zeta : {0.0, 0.5})
    for (double delta : {0.5, 1.0, 2.0, 4.0}) {
      const double cf = ed(delta, zeta);
      auto mc = theory::monte_carlo_boundary_distance(delta, zeta, options.mc_samples,
                                                      Rng(options.seed).fork(mc_key++).seed());
      out.push_back(check("expected_distance_mc", fmt("delta=%g zeta=%g", delta, zeta), cf,
                          mc.estimate, 4.0 * mc.standard_error,
                          std::abs(cf - mc.estimate) <= 4.0 * mc.standard_error));
    }

  // Derivative against central differences, and its sign.
  for (double delta = 0.5; delta <= 8.0 + 1e-12; delta += 0.5) {
    const double h = 1e-5;
    const double analytic = theory::boundary_distance_derivative({delta, 0.0});
    const double fd = (ed(delta + h, 0.0) - ed(delta - h, 0.0)) / (2 * h);
    out.push_back(check("derivative_fd", fmt("delta=%g", delta), analytic, fd, 1e-6,
                        std::abs(analytic - fd) <= 1e-6 * std::abs(fd) && analytic >= 0.0));
  }

  {
    const double gap = std::abs(ed(10.0, 0.0) / 10.0 - 0.5);
    out.push_back(check("large_delta_gap", "delta=10", gap, 0.0, 1e-7, gap < 1e-7));
  }

  {
    const double g = theory::mmlda_label_gap(10.0, 10);
    out.push_back(check("label_gap_bound", "C=10 L=10", g, 0.0, 1e-8, g <= 1e-8));
    MMLDAHead head = MMLDAHead::make_uniform(generate_opt_means(100.0, 10, 10));
    double worst = 0.0;
    for (std::size_t y = 0; y < 10; ++y) {
      Tensor z(1, 10, head.means.means[y]);
      Tensor prob = softmax_rows(head_scores(head, z));
      for (std::size_t k = 0; k < 10; ++k)
        worst = std::max(worst, std::abs((k == y ? 1.0 : 0.0) - prob(0, k)));
    }
    out.push_back(check("label_gap_at_means", "C=100 L=10", worst, 0.0, 1e-8, worst <= 1e-8));
  }

  {
    const double e = theory::efron_efficiency(theory::EfficiencyQuery::from_zeta(5, 0.0, 0.01));
    out.push_back(check("efficiency_small_delta", "p=5 zeta=0 delta=0.01", e, 1.0, 0.01,
                        e >= 0.99 && e <= 1.0));
    for (double zeta : {0.0, 1.0}) {
      double prev = std::numeric_limits<double>::infinity();
      bool mono = true;
      for (double delta = 0.5; delta <= 4.0 + 1e-12; delta += 0.5) {
        const double v = theory::efron_efficiency(theory::EfficiencyQuery::from_zeta(5, zeta, delta));
        mono = mono && v <= prev;
        prev = v;
      }
      out.push_back(check("efficiency_nonincreasing", fmt("p=5 zeta=%g", zeta), prev, 0.0, 0.0, mono));
    }
    double worst = 0.0;
    for (std::size_t p : {1, 5, 20})
      for (double zeta : {-1.0, 0.0, 1.5})
        for (double delta : {0.5, 2.0, 4.0}) {
          auto q = theory::EfficiencyQuery::from_zeta(p, zeta, delta);
          const double a = theory::efron_efficiency(q, theory::QuadratureRule::adaptive_gauss_kronrod);
          const double b = theory::efron_efficiency(q, theory::QuadratureRule::trapezoid);
          worst = std::max(worst, std::abs(a - b));
        }
    out.push_back(check("efficiency_dual_quadrature", "3x3x3 grid", worst, 0.0, 1e-6, worst <= 1e-6));
  }

  {
    Rng rng(Rng(options.seed).fork(99));
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t p = 1 + rng.below(8);
      const std::size_t L = 2 + rng.below(4);
      std::vector<std::vector<double>> means(L, std::vector<double>(p));
      for (auto& m : means)
        for (double& v : m) v = 3.0 * rng.normal();
      auto cov = CovarianceModel::general(random_spd(p, rng));
      auto w = whiten(means, cov);
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = i + 1; j < L; ++j) {
          const double general = mahalanobis_distance(means[i], means[j], cov);
          const double white = std::sqrt(squared_distance(w.standardized[i], w.standardized[j]));
          worst = std::max(worst, std::abs(general - white));
        }
    }
    out.push_back(check("whitening_invariance", "50 random SPD", worst, 0.0, 1e-8, worst <= 1e-8));
  }
  return out;
}

void write_theory_csv(std::ostream& out, const std::vector<TheoryCheck>& checks) {
  out << "check,parameters,value,reference,tolerance,pass\n";
  const auto old = out.precision(17);
  for (const auto& c : checks)
    out << c.name << ',' << c.parameters << ',' << c.value << ',' << c.reference << ','
        << c.tolerance << ',' << (c.pass ? "pass" : "fail") << '\n';
  out.precision(old);
}

void write_select_c_csv(std::ostream& out, const std::vector<SelectCRow>& rows) {
  out << "C,log10_C,fold,validation_error\n";
  const auto old = out.precision(17);
  for (const auto& r : rows) {
    for (std::size_t f = 0; f < r.errors.size(); ++f)
      out << r.C << ',' << std::log10(r.C) << ',' << f << ',' << r.errors[f] << '\n';
    out << r.C << ',' << std::log10(r.C) << ",mean," << r.mean << '\n';
    out << r.C << ',' << std::log10(r.C) << ",sd," << r.sd << '\n';
  }
  out.precision(old);
}

void write_bias_csv(std::ostream& out, const std::vector<BiasRow>& rows) {
  out << "counterpart,alpha,train_size,test_size,sr_accuracy,mmlda_accuracy\n";
  const auto old = out.precision(17);
  for (const auto& r : rows) {
    out << r.counterpart << ',';
    for (std::size_t k = 0; k < r.alpha.size(); ++k) out << (k ? ";" : "") << r.alpha[k];
    out << ',' << r.train_size << ',' << r.test_size << ',' << r.sr_accuracy << ','
        << r.mmlda_accuracy << '\n';
  }
  out.precision(old);
}

void write_attack_report_csv(std::ostream& out, const AttackReport& report) {
  out << "attack,epsilon,accuracy,success_rate,mean_distortion\n";
  const auto old = out.precision(17);
  out << "clean,0," << report.clean_accuracy << ",0,0\n";
  for (const auto& c : report.cells)
    out << to_string(c.kind) << ',' << c.epsilon << ',' << c.accuracy << ',' << c.success_rate
        << ',' << c.mean_distortion << '\n';
  out.precision(old);
}

void export_features(std::ostream& out, const Model& model, const Dataset& d) {
  Tensor z = model.latent(d.features);
  out << "label";
  for (std::size_t k = 0; k < z.cols(); ++k) out << ",z_" << (k + 1);
  out << '\n';
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    out << d.labels[i];
    for (double v : z.row(i)) out << ',' << v;
    out << '\n';
  }
  out.precision(old);
}

std::string report_digest(const json& report) {
  json copy = report;
  if (copy.is_object()) {
    copy.erase("wall_clock_seconds");
    copy.erase("digest");
  }
  return sha256_hex(copy.dump());
}

json to_json(const AttackReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"attack", to_string(c.kind)},
                     {"epsilon", c.epsilon},
                     {"accuracy", c.accuracy},
                     {"success_rate", c.success_rate},
                     {"mean_distortion", c.mean_distortion}});
  return {{"clean_accuracy", r.clean_accuracy},
          {"clean_error", 1.0 - r.clean_accuracy},
          {"examples", r.examples},
          {"cells", cells}};
}

json to_json(const CwReport& r) {
  return {{"mean_minimal_distortion", r.mean_distortion},
          {"success_rate", r.success_rate},
          {"attacked", r.attacked},
          {"excluded_misclassified", r.excluded},
          {"succeeded", r.succeeded}};
}

json to_json(const std::vector<TheoryCheck>& checks) {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"check", c.name},
                   {"parameters", c.parameters},
                   {"value", c.value},
                   {"reference", c.reference},
                   {"tolerance", c.tolerance},
                   {"pass", c.pass}});
  return arr;
}

}  // namespace mmlda
