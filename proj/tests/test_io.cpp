#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mmlda/checkpoint.hpp"
#include "mmlda/config.hpp"
#include "mmlda/rng.hpp"

using namespace mmlda;
namespace fs = std::filesystem;

namespace {

Model sample_model(bool mmlda) {
  Network net = Network::make_mlp(3, {5, 4}, 4, 11);
  Rng rng(2);
  for (auto& layer : net.layers())
    for (double& b : layer.bias) b = rng.normal() * 1e-3 + 1.0 / 3.0;  // not exactly representable
  if (mmlda)
    return Model(std::move(net), MMLDAHead::make(rotate_means(generate_opt_means(100.0, 4, 5), 3),
                                                 {0.1, 0.2, 0.3, 0.15, 0.25}));
  return Model(std::move(net), SRHead::make(5, 4, 7));
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mmlda_io_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("model checkpoints round-trip bit-exactly") {
  for (bool mm : {false, true}) {
    Model m = sample_model(mm);
    const std::string bytes = encode_model(m);
    CHECK(bytes.substr(0, 8) == "MMLDACKP");
    Model back = decode_model(bytes);
    CHECK(back == m);
    CHECK(encode_model(back) == bytes);
    save_model(m, scratch("m.ckpt"));
    CHECK(load_model(scratch("m.ckpt")) == m);
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string good = encode_model(sample_model(true));
  CHECK_THROWS_AS(decode_model(good.substr(0, good.size() - 1)), CheckpointError);
  CHECK_THROWS_AS(decode_model(good + "x"), CheckpointError);
  std::string magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_model(magic), CheckpointError);
  std::string version = good;
  version[8] = 2;
  CHECK_THROWS_AS(decode_model(version), CheckpointError);
  CHECK_THROWS_AS(decode_model(""), CheckpointError);
  CHECK_THROWS(load_model(scratch("does_not_exist.ckpt")));
  // A tampered mean set no longer satisfies the optimality condition.
  std::string tampered = good;
  const std::size_t mean_offset = good.size() - (5 * 4 + 5) * 8;
  double v;
  std::memcpy(&v, tampered.data() + mean_offset, 8);
  v *= 1.5;
  std::memcpy(tampered.data() + mean_offset, &v, 8);
  CHECK_THROWS(decode_model(tampered));
}

TEST_CASE("tensor files round-trip") {
  Rng rng(4);
  Tensor t(3, 7);
  for (double& v : t.values()) v = rng.normal();
  const std::string bytes = encode_tensor(t);
  CHECK(bytes.substr(0, 8) == "MMLDATNS");
  CHECK(decode_tensor(bytes) == t);
  save_tensor(t, scratch("t.bin"));
  CHECK(load_tensor(scratch("t.bin")) == t);
  CHECK_THROWS_AS(decode_tensor(bytes.substr(0, 20)), CheckpointError);
  CHECK(decode_tensor(encode_tensor(Tensor())) == Tensor());
}

TEST_CASE("config text round-trips with every field") {
  ExperimentConfig c;
  c.dataset.kind = "gmm_input";
  c.dataset.classes = 10;
  c.dataset.noise = 0.031;
  c.network.hidden = {32, 16, 8};
  c.network.latent_dim = 12;
  c.head = HeadKind::sr;
  c.C = 12.5;
  c.priors = PriorsMode::empirical;
  c.training.steps = 17;
  c.training.batch_size = 9;
  c.training.learning_rate = 3e-4;
  c.training.seed = 99;
  c.attacks.kinds = {AttackKind::jsma, AttackKind::cw};
  c.attacks.epsilons = {0.0, 0.1};
  c.attacks.pixel_budget = 5;
  c.attacks.max_examples = 20;
  c.finetune.mode = FinetuneMode::hat;
  c.finetune.attack = AttackKind::bim;
  c.output_dir = "elsewhere";
  const std::string text = config_to_text(c);
  ExperimentConfig back = config_from_text(text);
  CHECK(back == c);
  CHECK(config_to_text(back) == text);
  CHECK(config_digest(back) == config_digest(c));
  ExperimentConfig d = c;
  d.C = 12.6;
  CHECK(config_digest(d) != config_digest(c));
  ExperimentConfig moved = c;
  moved.output_dir = "another";
  CHECK(config_digest(moved) == config_digest(c));

  save_config(c, scratch("c.json"));
  CHECK(load_config(scratch("c.json")) == c);
  CHECK(config_from_text("{}") == ExperimentConfig{});
  CHECK(config_from_text(config_to_text(ExperimentConfig{})).attacks.pixel_budget == kAllFeatures);
}

TEST_CASE("config errors") {
  CHECK_THROWS(config_from_text("{not json"));
  CHECK_THROWS(config_from_text(R"({"head": "svm"})"));
  CHECK_THROWS(config_from_text(R"({"attacks": {"kinds": ["pgd"]}})"));
  CHECK_THROWS(config_from_text(R"({"training": {"steps": "many"}})"));
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.attacks.epsilons = {0.1, -0.1};
  CHECK_THROWS(c.validate());
  c = ExperimentConfig{};
  c.C = 0.0;
  CHECK_THROWS(c.validate());
  c = ExperimentConfig{};
  c.dataset.kind = "idx";
  c.dataset.train_images = "/nonexistent/images";
  CHECK_THROWS(c.validate());
  c = ExperimentConfig{};
  c.finetune.hat_min = 0.3;
  CHECK_THROWS(c.validate());
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
