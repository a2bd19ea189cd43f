#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "ltc/cli.hpp"

using namespace ltc;
namespace fs = std::filesystem;

namespace {

// a minimal config that keeps cli runs fast
std::string write_tiny_config(const std::string& path, const std::string& out_dir) {
  LtcConfig cfg;
  cfg.run.n_gen = 6;
  cfg.run.n_train = 6;
  cfg.run.n_expert = 4;
  cfg.run.warmup_epoch_cap = 1;
  cfg.run.eval_episodes = 3;
  cfg.run.max_iterations = 1;
  cfg.run.out_dir = out_dir;
  cfg.run.verbose = false;
  cfg.policy.embed_dim = 16;
  cfg.policy.hidden_dim = 24;
  cfg.policy.context_len = 256;
  cfg.pattern.max_steps = 8;
  save_config(cfg, path);
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(dispatch({}) == 1);
  CHECK(dispatch({"frobnicate"}) == 1);
  CHECK(dispatch({"eval"}) == 1);  // missing required --ckpt
}

TEST_CASE("help exits cleanly") {
  CHECK(dispatch({"--help"}) == 0);
}

TEST_CASE("runtime errors exit with code 2") {
  CHECK(dispatch({"eval", "--ckpt", "/nonexistent/ckpt"}) == 2);
  CHECK(dispatch({"inspect", "/nonexistent/buffer.ltcb"}) == 2);
}

TEST_CASE("warmup, eval, explore, train, inspect flow") {
  const std::string dir = "/tmp/ltc_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = write_tiny_config(dir + "/ltc.cfg", dir);

  REQUIRE(dispatch({"warmup", "--config", cfg_path, "--quiet"}) == 0);
  REQUIRE(fs::exists(dir + "/ckpt-0"));
  REQUIRE(fs::exists(dir + "/vocab.txt"));

  CHECK(dispatch({"eval", "--ckpt", dir + "/ckpt-0", "--episodes", "3", "--config", cfg_path,
                  "--quiet"}) == 0);

  REQUIRE(dispatch({"explore", "--ckpt", dir + "/ckpt-0", "--config", cfg_path, "--iter", "1",
                    "--quiet"}) == 0);
  size_t buffers = 0;
  std::string one_buffer;
  for (const auto& e : fs::recursive_directory_iterator(dir + "/buffers"))
    if (e.path().extension() == ".ltcb") {
      ++buffers;
      one_buffer = e.path().string();
    }
  CHECK(buffers >= 6);

  CHECK(dispatch({"inspect", one_buffer}) == 0);
  CHECK(dispatch({"inspect", one_buffer, "--vocab", dir + "/vocab.txt"}) == 0);

  CHECK(dispatch({"train", "--ckpt", dir + "/ckpt-0", "--buffers", dir + "/buffers/1",
                  "--out-ckpt", dir + "/ckpt-t", "--config", cfg_path, "--quiet"}) == 0);
  CHECK(fs::exists(dir + "/ckpt-t"));
  // training moved the parameters
  CHECK_FALSE(Policy::load(dir + "/ckpt-t").params_equal(Policy::load(dir + "/ckpt-0")));

  fs::remove_all(dir);
}

TEST_CASE("run subcommand produces metrics") {
  const std::string dir = "/tmp/ltc_cli_run_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = write_tiny_config(dir + "/ltc.cfg", dir);

  REQUIRE(dispatch({"run", "--config", cfg_path, "--iterations", "1", "--quiet"}) == 0);
  std::ifstream metrics(dir + "/metrics.jsonl");
  REQUIRE(metrics.good());
  size_t rows = 0;
  std::string line;
  while (std::getline(metrics, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  fs::remove_all(dir);
}

TEST_CASE("baseline and tokens subcommands") {
  CHECK(dispatch({"baseline", "--env", "gridhouse", "--mode", "expert", "--episodes", "5",
                  "--quiet"}) == 0);
  CHECK(dispatch({"baseline", "--env", "arithgen", "--mode", "bogus", "--episodes", "2",
                  "--quiet"}) == 1);
  CHECK(dispatch({"baseline", "--env", "gridhouse", "--show-transcripts", "1", "--quiet"}) == 0);
  CHECK(dispatch({"tokens", "--env", "kbhop", "--episodes", "5", "--quiet"}) == 0);
}

TEST_CASE("seed flag changes exploration output") {
  const std::string dir = "/tmp/ltc_cli_seed_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = write_tiny_config(dir + "/ltc.cfg", dir + "/a");

  REQUIRE(dispatch({"warmup", "--config", cfg_path, "--seed", "1", "--out", dir + "/a",
                    "--quiet"}) == 0);
  REQUIRE(dispatch({"warmup", "--config", cfg_path, "--seed", "2", "--out", dir + "/b",
                    "--quiet"}) == 0);
  // different run seeds give different expert data, hence different weights
  CHECK_FALSE(
      Policy::load(dir + "/a/ckpt-0").params_equal(Policy::load(dir + "/b/ckpt-0")));
  fs::remove_all(dir);
}
