#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("mmlda_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Run run(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + MMLDA_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json small_config(const fs::path& out) {
  return {{"dataset", {{"kind", "arcs"}, {"n_train", 300}, {"n_test", 100}, {"seed", 5}}},
          {"network", {{"hidden", {16}}}},
          {"training", {{"steps", 60}, {"seed", 5}}},
          {"attacks", {{"epsilons", {0.0, 0.1}}, {"steps", 3}, {"max_examples", 20}, {"search_steps", 3},
                       {"max_iters", 50}}},
          {"finetune", {{"mode", "sat"}, {"steps", 10}}},
          {"output_dir", out.string()}};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string digest_line(const std::string& out) {
  const auto pos = out.find(" digest ");
  REQUIRE(pos != std::string::npos);
  return out.substr(pos, out.find('\n', pos) - pos);
}

}  // namespace

TEST_CASE("means subcommand") {
  auto dir = scratch("means");
  auto r = run("means -C 100 -p 10 -L 10 --out \"" + dir.string() + "\"", dir);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "means.txt"));
  auto s = read_json(dir / "means.json");
  CHECK(s["command"] == "means");
  CHECK(s["opt_condition_pass"] == true);
  CHECK(s["approx_robustness"].get<double>() == doctest::Approx(s["upper_bound"].get<double>()));
  CHECK(run("means -C 100 -p 3 -L 10 --out \"" + dir.string() + "\"", dir).code != 0);
  CHECK(run("means -C -1 -p 10 -L 10 --out \"" + dir.string() + "\"", dir).code != 0);
}

TEST_CASE("train, finetune, attack, cw and export-features") {
  auto dir = scratch("pipeline");
  auto cfg = write_config(dir, small_config(dir));
  const std::string base = "--config \"" + cfg.string() + "\" ";

  auto t1 = run(base + "train", dir);
  REQUIRE(t1.code == 0);
  CHECK(fs::exists(dir / "model.ckpt"));
  CHECK(fs::exists(dir / "loss.csv"));
  const auto ckpt1 = read_json(dir / "train.json")["checkpoint_sha256"];
  auto t2 = run(base + "train", dir);
  REQUIRE(t2.code == 0);
  CHECK(digest_line(t1.out) == digest_line(t2.out));
  CHECK(read_json(dir / "train.json")["checkpoint_sha256"] == ckpt1);

  // Global options may follow the subcommand; a different seed changes the digest.
  auto t3 = run("train " + base + "--seed 6", dir);
  REQUIRE(t3.code == 0);
  CHECK(digest_line(t3.out) != digest_line(t1.out));
  REQUIRE(run(base + "train", dir).code == 0);

  auto f = run(base + "finetune", dir);
  CHECK(f.code == 0);
  CHECK(fs::exists(dir / "finetuned.ckpt"));
  CHECK(read_json(dir / "finetune.json")["mode"] == "sat");
  CHECK(run(base + "finetune --mode hat", dir).code == 0);
  CHECK(run(base + "finetune --mode bogus", dir).code != 0);

  auto a1 = run(base + "attack", dir);
  CHECK(a1.code == 0);
  CHECK(fs::exists(dir / "attack.csv"));
  auto a2 = run(base + "attack --model \"" + (dir / "model.ckpt").string() + "\"", dir);
  CHECK(digest_line(a1.out) == digest_line(a2.out));

  auto c1 = run(base + "cw", dir);
  CHECK(c1.code == 0);
  CHECK(digest_line(c1.out) == digest_line(run(base + "cw", dir).out));
  auto rep = read_json(dir / "cw.json")["report"];
  CHECK(rep["attacked"].get<std::size_t>() + rep["excluded_misclassified"].get<std::size_t>() == 20);

  CHECK(run(base + "export-features --split test", dir).code == 0);
  std::ifstream feats(dir / "features_test.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(feats, line);) ++lines;
  CHECK(lines == 101);

  CHECK(run(base + "attack --model \"" + (dir / "missing.ckpt").string() + "\"", dir).code != 0);
}

TEST_CASE("select-c and bias") {
  auto dir = scratch("select");
  auto j = small_config(dir);
  auto cfg = write_config(dir, j);
  auto r = run("--config \"" + cfg.string() + "\" select-c --candidates 1 100 -k 3", dir);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "select_c.csv"));
  CHECK(read_json(dir / "select-c.json")["rows"].size() == 2);

  j["dataset"] = {{"kind", "gmm_input"}, {"classes", 10}, {"n_train", 200}, {"n_test", 100}};
  j["training"]["steps"] = 20;
  cfg = write_config(dir, j);
  auto b = run("--config \"" + cfg.string() + "\" bias --kind bp2", dir);
  CHECK(b.code == 0);
  CHECK(read_json(dir / "bias.json")["rows"].size() == 10);
  CHECK(fs::exists(dir / "bias_bp2.csv"));
}

TEST_CASE("verify subcommand") {
  auto dir = scratch("verify");
  auto r = run("verify --mc-samples 200000 --out \"" + dir.string() + "\"", dir);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "theory.csv"));
  CHECK(read_json(dir / "verify.json")["all_pass"] == true);
}

TEST_CASE("bad configurations exit with a config error") {
  auto dir = scratch("bad");
  auto j = small_config(dir);
  j["C"] = -1.0;
  auto cfg = write_config(dir, j);
  CHECK(run("--config \"" + cfg.string() + "\" train", dir).code == 2);

  j = small_config(dir);
  j["dataset"]["kind"] = "nope";
  cfg = write_config(dir, j);
  CHECK(run("--config \"" + cfg.string() + "\" train", dir).code == 2);

  std::ofstream(dir / "config.json") << "{ not json";
  CHECK(run("--config \"" + cfg.string() + "\" train", dir).code == 2);

  CHECK(run("--config \"" + (dir / "absent.json").string() + "\" train", dir).code != 0);
  CHECK(run("no-such-command", dir).code != 0);
}
