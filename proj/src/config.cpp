#include "mmlda/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mmlda {

using nlohmann::json;

std::string to_string(FinetuneMode m) {
  switch (m) {
    case FinetuneMode::none: return "none";
    case FinetuneMode::sat: return "sat";
    case FinetuneMode::hat: return "hat";
  }
  return "?";
}

FinetuneMode finetune_mode_from_string(const std::string& s) {
  if (s == "none") return FinetuneMode::none;
  if (s == "sat") return FinetuneMode::sat;
  if (s == "hat") return FinetuneMode::hat;
  throw std::invalid_argument("unknown fine-tune mode '" + s + "'");
}

std::string to_string(PriorsMode m) { return m == PriorsMode::uniform ? "uniform" : "empirical"; }

PriorsMode priors_mode_from_string(const std::string& s) {
  if (s == "uniform") return PriorsMode::uniform;
  if (s == "empirical") return PriorsMode::empirical;
  throw std::invalid_argument("unknown priors mode '" + s + "'");
}

void ExperimentConfig::validate() const {
  const auto& d = dataset;
  if (d.kind != "arcs" && d.kind != "gmm_input" && d.kind != "mmd" && d.kind != "idx")
    throw std::invalid_argument("dataset.kind must be arcs, gmm_input, mmd or idx");
  if (d.kind == "idx") {
    for (const auto* p : {&d.train_images, &d.train_labels, &d.test_images, &d.test_labels})
      if (p->empty() || !std::filesystem::exists(*p))
        throw std::invalid_argument("IDX path does not exist: '" + *p + "'");
  } else {
    if (d.classes < 2) throw std::invalid_argument("dataset.classes must be >= 2");
    if (d.n_train < 1 || d.n_test < 1) throw std::invalid_argument("dataset sizes must be >= 1");
  }
  if (!(d.noise >= 0.0)) throw std::invalid_argument("dataset.noise must be >= 0");
  if (!(d.mmd_C > 0.0)) throw std::invalid_argument("dataset.mmd_C must be > 0");
  for (auto h : network.hidden)
    if (h == 0) throw std::invalid_argument("hidden layer widths must be positive");
  if (!(C > 0.0)) throw std::invalid_argument("C must be > 0");
  if (training.steps < 0) throw std::invalid_argument("training.steps must be >= 0");
  if (training.batch_size < 1) throw std::invalid_argument("training.batch_size must be >= 1");
  if (!(training.learning_rate > 0.0)) throw std::invalid_argument("training.learning_rate must be > 0");
  for (double e : attacks.epsilons)
    if (!(e >= 0.0)) throw std::invalid_argument("attack epsilons must be >= 0");
  if (attacks.steps < 1 || attacks.search_steps < 1 || attacks.max_iters < 1)
    throw std::invalid_argument("attack iteration counts must be >= 1");
  if (!(attacks.kappa >= 0.0)) throw std::invalid_argument("attacks.kappa must be >= 0");
  if (finetune.steps < 0) throw std::invalid_argument("finetune.steps must be >= 0");
  if (!(finetune.epsilon >= 0.0)) throw std::invalid_argument("finetune.epsilon must be >= 0");
  if (!(finetune.hat_min >= 0.0 && finetune.hat_min <= finetune.hat_max))
    throw std::invalid_argument("finetune HAT range must satisfy 0 <= min <= max");
  if (!(finetune.learning_rate > 0.0)) throw std::invalid_argument("finetune.learning_rate must be > 0");
  if (finetune.attack == AttackKind::jsma || finetune.attack == AttackKind::cw)
    throw std::invalid_argument("fine-tuning supports fgsm, bim and ilcm only");
  if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
}

namespace {

json to_json(const ExperimentConfig& c) {
  json kinds = json::array();
  for (auto k : c.attacks.kinds) kinds.push_back(to_string(k));
  return json{
      {"dataset",
       {{"kind", c.dataset.kind},
        {"classes", c.dataset.classes},
        {"n_train", c.dataset.n_train},
        {"n_test", c.dataset.n_test},
        {"noise", c.dataset.noise},
        {"mmd_C", c.dataset.mmd_C},
        {"seed", c.dataset.seed},
        {"train_images", c.dataset.train_images},
        {"train_labels", c.dataset.train_labels},
        {"test_images", c.dataset.test_images},
        {"test_labels", c.dataset.test_labels}}},
      {"network", {{"hidden", c.network.hidden}, {"latent_dim", c.network.latent_dim}}},
      {"head", to_string(c.head)},
      {"C", c.C},
      {"priors", to_string(c.priors)},
      {"training",
       {{"steps", c.training.steps},
        {"batch_size", c.training.batch_size},
        {"learning_rate", c.training.learning_rate},
        {"seed", c.training.seed}}},
      {"attacks",
       {{"kinds", kinds},
        {"epsilons", c.attacks.epsilons},
        {"steps", c.attacks.steps},
        {"kappa", c.attacks.kappa},
        {"search_steps", c.attacks.search_steps},
        {"max_iters", c.attacks.max_iters},
        {"pixel_budget", c.attacks.pixel_budget == kAllFeatures
                             ? json("all")
                             : json(c.attacks.pixel_budget)},
        {"max_examples", c.attacks.max_examples}}},
      {"finetune",
       {{"mode", to_string(c.finetune.mode)},
        {"attack", to_string(c.finetune.attack)},
        {"epsilon", c.finetune.epsilon},
        {"hat_min", c.finetune.hat_min},
        {"hat_max", c.finetune.hat_max},
        {"steps", c.finetune.steps},
        {"learning_rate", c.finetune.learning_rate}}},
      {"output_dir", c.output_dir},
  };
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_to_text(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ExperimentConfig config_from_text(const std::string& text) {
  ExperimentConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      read(d, "kind", c.dataset.kind);
      read(d, "classes", c.dataset.classes);
      read(d, "n_train", c.dataset.n_train);
      read(d, "n_test", c.dataset.n_test);
      read(d, "noise", c.dataset.noise);
      read(d, "mmd_C", c.dataset.mmd_C);
      read(d, "seed", c.dataset.seed);
      read(d, "train_images", c.dataset.train_images);
      read(d, "train_labels", c.dataset.train_labels);
      read(d, "test_images", c.dataset.test_images);
      read(d, "test_labels", c.dataset.test_labels);
    }
    if (j.contains("network")) {
      read(j["network"], "hidden", c.network.hidden);
      read(j["network"], "latent_dim", c.network.latent_dim);
    }
    if (j.contains("head")) c.head = head_kind_from_string(j["head"].get<std::string>());
    read(j, "C", c.C);
    if (j.contains("priors")) c.priors = priors_mode_from_string(j["priors"].get<std::string>());
    if (j.contains("training")) {
      const auto& t = j["training"];
      read(t, "steps", c.training.steps);
      read(t, "batch_size", c.training.batch_size);
      read(t, "learning_rate", c.training.learning_rate);
      read(t, "seed", c.training.seed);
    }
    if (j.contains("attacks")) {
      const auto& a = j["attacks"];
      if (a.contains("kinds")) {
        c.attacks.kinds.clear();
        for (const auto& k : a["kinds"]) c.attacks.kinds.push_back(attack_kind_from_string(k.get<std::string>()));
      }
      read(a, "epsilons", c.attacks.epsilons);
      read(a, "steps", c.attacks.steps);
      read(a, "kappa", c.attacks.kappa);
      read(a, "search_steps", c.attacks.search_steps);
      read(a, "max_iters", c.attacks.max_iters);
      if (a.contains("pixel_budget")) {
        const auto& pb = a["pixel_budget"];
        c.attacks.pixel_budget = pb.is_string() && pb.get<std::string>() == "all"
                                     ? kAllFeatures
                                     : pb.get<std::size_t>();
      }
      read(a, "max_examples", c.attacks.max_examples);
    }
    if (j.contains("finetune")) {
      const auto& f = j["finetune"];
      if (f.contains("mode")) c.finetune.mode = finetune_mode_from_string(f["mode"].get<std::string>());
      if (f.contains("attack")) c.finetune.attack = attack_kind_from_string(f["attack"].get<std::string>());
      read(f, "epsilon", c.finetune.epsilon);
      read(f, "hat_min", c.finetune.hat_min);
      read(f, "hat_max", c.finetune.hat_max);
      read(f, "steps", c.finetune.steps);
      read(f, "learning_rate", c.finetune.learning_rate);
    }
    read(j, "output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config has a field of the wrong type: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str());
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_text(cfg);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

// The output location does not change results, so it is left out.
std::string config_digest(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir.clear();
  return sha256_hex(config_to_text(c));
}

}  // namespace mmlda
