#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "csitk/checkpoint.hpp"
#include "csitk/experiments.hpp"
#include "csitk/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CSITK_BIN) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

// Per-process scratch root, wiped once at startup.
const fs::path& scratch() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / ("csitk_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

// Small dataset + zero-lr checkpoint shared by the eval-facing cases.
const fs::path& small_dataset() {
  static const fs::path dir = [] {
    const fs::path p = scratch() / "ds_small";
    const CmdResult r =
        run_cli("gen --preset desk --cells 1 --ues 4 --seed 7 --out " + p.string());
    REQUIRE(r.code == 0);
    return p;
  }();
  return dir;
}

const fs::path& frozen_ckpt() {
  static const fs::path dir = [] {
    const fs::path p = scratch() / "ckpt_frozen";
    const CmdResult r = run_cli("train --data " + small_dataset().string() +
                                " --lr 0 --batch 8 --epochs 1 --optimizer sgd --seed 7 --out " +
                                p.string());
    REQUIRE(r.code == 0);
    return p;
  }();
  return dir;
}

}  // namespace

TEST_CASE("gen: desk preset writes 120 matrices, byte-identical across runs and threads") {
  const fs::path a = scratch() / "ds_a";
  const fs::path b = scratch() / "ds_b";
  const fs::path c = scratch() / "ds_c";

  CHECK(run_cli("gen --preset desk --seed 7 --out " + a.string()).code == 0);
  CHECK(run_cli("gen --preset desk --seed 7 --out " + b.string()).code == 0);
  CHECK(run_cli("gen --preset desk --seed 7 --threads 4 --out " + c.string()).code == 0);

  const std::string bytes = read_file(a / "data.bin");
  CHECK(bytes.size() == 120u * 16 * 8 * 2 * 2 * 4);  // records * dims * (re,im) * f32
  CHECK(bytes == read_file(b / "data.bin"));
  CHECK(bytes == read_file(c / "data.bin"));

  const json manifest = read_json(a / "run_manifest.json");
  CHECK(manifest.at("seed").get<uint64_t>() == 7);
  CHECK(manifest.at("resolved_config").at("dataset").at("cells").get<int>() == 2);
  CHECK(manifest.at("version").get<std::string>() == "0.1.0");

  const json different = read_json(a / "manifest.json");
  CHECK(different.at("records").size() == 120);
}

TEST_CASE("train: zero learning rate leaves the checkpoint at the initial parameters") {
  const fs::path& ckpt = frozen_ckpt();

  csitk::model::TransformerModel loaded = csitk::io::load_model(ckpt.string());
  csitk::model::TransformerModel fresh(loaded.config(), 7);  // same preset dims, same seed
  auto got = loaded.parameters();
  auto want = fresh.parameters();
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) CHECK(got[i]->values == want[i]->values);

  const std::string loss_csv = read_file(ckpt / "loss.csv");
  CHECK(loss_csv.rfind("step,epoch,loss\n", 0) == 0);
  const json manifest = read_json(ckpt / "run_manifest.json");
  CHECK(manifest.at("resolved_config").at("training").at("learning_rate").get<double>() == 0.0);
  CHECK(manifest.at("resolved_config").at("training").at("optimizer") == "sgd");
}

TEST_CASE("eval: one experiment emits exactly one JSON+CSV+SVG triple") {
  const fs::path out = scratch() / "reports_one";
  const CmdResult r = run_cli("eval --data " + small_dataset().string() + " --ckpt " +
                              frozen_ckpt().string() + " --experiment reconstruction --out " +
                              out.string());
  CHECK(r.code == 0);

  CHECK(fs::exists(out / "reconstruction.json"));
  CHECK(fs::exists(out / "reconstruction.csv"));
  CHECK(fs::exists(out / "reconstruction.svg"));

  const csitk::experiments::ExperimentReport rep =
      csitk::experiments::report_from_json(read_json(out / "reconstruction.json"));
  CHECK(rep.experiment == "reconstruction");
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].value >= 0.0);

  const json manifest = read_json(out / "run_manifest.json");
  CHECK(manifest.at("artifacts").size() == 3);
}

TEST_CASE("eval: identical flags reproduce value-identical reports") {
  const fs::path out1 = scratch() / "rep_rep1";
  const fs::path out2 = scratch() / "rep_rep2";
  const std::string common = "eval --data " + small_dataset().string() + " --ckpt " +
                             frozen_ckpt().string() +
                             " --experiment scenario --seed 5 --out ";
  CHECK(run_cli(common + out1.string()).code == 0);
  CHECK(run_cli(common + out2.string()).code == 0);
  // Report stems use the canonical experiment id, not the CLI alias.
  CHECK(read_file(out1 / "scenario_wise.json") == read_file(out2 / "scenario_wise.json"));
  CHECK(read_file(out1 / "scenario_wise.csv") == read_file(out2 / "scenario_wise.csv"));
}

TEST_CASE("exit codes: 2 for usage errors, 3 for I/O failures") {
  CHECK(run_cli("train --lr 0 --batch 1 --epochs 1 --out x").code == 2);  // missing --data
  CHECK(run_cli("").code == 2);                                           // no subcommand
  CHECK(run_cli("frobnicate").code == 2);

  const CmdResult unknown = run_cli("eval --data d --ckpt c --out o --experiment bogus");
  CHECK(unknown.code == 2);
  CHECK(unknown.out.find("reconstruction") != std::string::npos);  // lists valid names
  CHECK(unknown.out.find("doppler") != std::string::npos);

  const fs::path missing = scratch() / "no_such_dataset";
  CHECK(run_cli("eval --data " + missing.string() + " --ckpt c --out o").code == 3);
  CHECK(run_cli("train --data " + missing.string() +
                " --lr 0 --batch 1 --epochs 1 --out x").code == 3);

  const CmdResult bad_mask = run_cli("train --data " + small_dataset().string() +
                                     " --lr 0 --batch 1 --epochs 1 --mask nope:1 --out " +
                                     (scratch() / "x").string());
  CHECK(bad_mask.code == 2);
}

TEST_CASE("check: clean pass, fault injection fails naming the op, json output") {
  const CmdResult clean = run_cli("check");
  CHECK(clean.code == 0);
  CHECK(clean.out.find("[FAIL]") == std::string::npos);

  const CmdResult injected = run_cli("check --inject-grad-bug");
  CHECK(injected.code == 1);
  CHECK(injected.out.find("[FAIL] grad/mul") != std::string::npos);

  const CmdResult as_json = run_cli("check --json");
  CHECK(as_json.code == 0);
  const json j = json::parse(as_json.out);
  CHECK(j.at("failed").get<int>() == 0);
  CHECK(j.at("checks").size() >= 20);
}

TEST_CASE("seed resolution: env fallback, flag wins") {
  const fs::path env_ds = scratch() / "ds_env";
  CHECK(run_cli("gen --preset desk --cells 1 --ues 1 --out " + env_ds.string() +
                " && true # CSI_BERT_SEED")
            .code == 0);
  // popen runs through /bin/sh, so an env prefix exercises the fallback.
  const fs::path env_ds2 = scratch() / "ds_env2";
  {
    const std::string cmd = std::string("CSI_BERT_SEED=5 ") + CSITK_BIN +
                            " gen --preset desk --cells 1 --ues 1 --out " + env_ds2.string();
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(read_json(env_ds2 / "run_manifest.json").at("seed").get<uint64_t>() == 5);
  }
  const fs::path flag_ds = scratch() / "ds_flag";
  {
    const std::string cmd = std::string("CSI_BERT_SEED=5 ") + CSITK_BIN +
                            " gen --preset desk --cells 1 --ues 1 --seed 3 --out " +
                            flag_ds.string();
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(read_json(flag_ds / "run_manifest.json").at("seed").get<uint64_t>() == 3);
  }
}

TEST_CASE("config file supplies flags, command line overrides") {
  const fs::path ini = scratch() / "gen.ini";
  const fs::path out_a = scratch() / "ds_ini_a";
  {
    std::ofstream f(ini);
    f << "[gen]\npreset=desk\nseed=9\ncells=1\nues=2\nout=" << out_a.string() << "\n";
  }
  CHECK(run_cli("--config " + ini.string() + " gen").code == 0);
  const json a = read_json(out_a / "run_manifest.json");
  CHECK(a.at("seed").get<uint64_t>() == 9);
  CHECK(a.at("resolved_config").at("dataset").at("cells").get<int>() == 1);

  const fs::path out_b = scratch() / "ds_ini_b";
  CHECK(run_cli("--config " + ini.string() + " gen --seed 11 --out " + out_b.string()).code == 0);
  CHECK(read_json(out_b / "run_manifest.json").at("seed").get<uint64_t>() == 11);
}
