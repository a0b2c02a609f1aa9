#include <doctest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "run_config.hpp"
#include "ssenc/error.hpp"
#include "support.hpp"

using namespace ssenc;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ssenc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Generates train/val data for a small linear system and returns the directory.
std::filesystem::path prepared(const std::string& name) {
  const auto dir = testing::scratch_dir(name);
  std::ofstream(dir / "sys.json") << system_to_json(testing::second_order_linear());
  for (auto [file, seed] : {std::pair{"train.csv", "1"}, {"val.csv", "2"}}) {
    const auto r = invoke({"generate", "--system", (dir / "sys.json").string(), "--samples", "400", "--seed", seed,
                           "--out", (dir / file).string()});
    REQUIRE(r.code == 0);
  }
  return dir;
}

std::vector<std::string> quick_train(const std::filesystem::path& dir, const std::string& out) {
  return {"train", "--train_file", (dir / "train.csv").string(), "--val_file", (dir / "val.csv").string(),
          "--n_a", "3", "--n_b", "3", "--horizon", "8", "--batch_size", "16", "--max_epochs", "3",
          "--final_refine_epochs", "2", "--encoder_hidden", "4", "--f_hidden", "4", "--h_hidden", "none",
          "--log_wall_time", "false", "--out_dir", (dir / out).string()};
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({"train", "--help"}).out.find("--horizon") != std::string::npos);
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"bogus"}).code == cli::kExitUsage);
  CHECK(invoke({"evaluate", "--model", "x.json"}).code == cli::kExitUsage);
  const auto missing = invoke({"train", "--val_file", "v.csv"});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("train_file") != std::string::npos);
}

TEST_CASE("runtime failures exit with 1") {
  const auto r = invoke({"train", "--train_file", "/nonexistent/a.csv", "--val_file", "/nonexistent/b.csv"});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find("cannot open") != std::string::npos);
}

TEST_CASE("train, evaluate and export") {
  const auto dir = prepared("cli_flow");
  const auto t = invoke(quick_train(dir, "run"));
  REQUIRE_MESSAGE(t.code == 0, t.err);
  CHECK(t.out.find("epochs: 5") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "run" / "model.json"));
  CHECK(slurp(dir / "run" / "train_log.csv").rfind("epoch,train_loss,val_nrms,seconds,is_best\n", 0) == 0);

  const auto model = (dir / "run" / "model.json").string();
  const auto e = invoke({"evaluate", "--model", model, "--data", (dir / "val.csv").string(), "--nstep", "5",
                         "--nstep_out", (dir / "n.csv").string(), "--spectrum_out", (dir / "s.csv").string()});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  // Report grammar: one `key: value` per line, in a fixed order.
  const std::regex grammar(
      "model: .+\ndata: .+\nsamples: 400\nsim_init: encoder\nt0: 3\nscored_samples: 397\nrms: [0-9.e+-]+\n"
      "sigma_y: [0-9.e+-]+\nnrms: [0-9.e+-]+\nnrms_percent: [0-9]+\\.[0-9]{4}%\nnstep_file: .+\n"
      "nstep_sections: [0-9]+\nspectrum_file: .+\n");
  CHECK_MESSAGE(std::regex_match(e.out, grammar), e.out);
  CHECK(slurp(dir / "n.csv").rfind("n,nrms\n0,", 0) == 0);

  const auto s = invoke({"simulate", "--model", model, "--data", (dir / "val.csv").string(), "--sim_init", "zero",
                         "--out", (dir / "p.csv").string()});
  REQUIRE(s.code == 0);
  CHECK(slurp(dir / "p.csv").rfind("t,y_hat1,y1\n0,", 0) == 0);

  CHECK(invoke({"nstep", "--model", model, "--data", (dir / "val.csv").string(), "--n_max", "4", "--out",
                (dir / "n2.csv").string()})
            .code == 0);
  CHECK(invoke({"spectrum", "--model", model, "--data", (dir / "val.csv").string(), "--channel", "2", "--out",
                (dir / "s2.csv").string()})
            .code == cli::kExitUsage);
  CHECK(invoke({"evaluate", "--model", (dir / "val.csv").string(), "--data", (dir / "val.csv").string()}).code ==
        cli::kExitUsage);
}

TEST_CASE("identical runs write identical files") {
  const auto dir = prepared("cli_determinism");
  REQUIRE(invoke(quick_train(dir, "a")).code == 0);
  REQUIRE(invoke(quick_train(dir, "b")).code == 0);
  for (const char* f : {"model.json", "train_log.csv"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("config file, flag precedence and resolved config round trip") {
  const auto dir = prepared("cli_config");
  std::ofstream(dir / "run.ini") << "# test\ntrain_file = " << (dir / "train.csv").string()
                                 << "\nval_file = " << (dir / "val.csv").string()
                                 << "\nn_a = 3\nn_b = 3\nhorizon = 8\nbatch_size = 16\nmax_epochs = 50\n"
                                    "final_refine_epochs = 0\nf_hidden = 4\n";
  const auto r = invoke({"train", "--config", (dir / "run.ini").string(), "--max_epochs", "2", "--out_dir",
                         (dir / "out").string(), "--log_wall_time", "false"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("epochs: 2\n") != std::string::npos);
  const auto resolved = cli::resolve_config(cli::parse_config_text(slurp(dir / "out" / "config.ini")));
  CHECK(resolved.train.max_epochs == 2);
  CHECK(resolved.train.horizon == 8);
  CHECK(resolved.arch.f_hidden == std::vector<std::size_t>{4});
  CHECK(cli::to_config_text(resolved) == slurp(dir / "out" / "config.ini"));
}

TEST_CASE("config parser errors") {
  CHECK_THROWS_WITH_AS(cli::parse_config_text("horizon 5\n"), doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_WITH_AS(cli::parse_config_text("\nhorizn = 5\n"), doctest::Contains("unknown key 'horizn'"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(cli::parse_config_text("seed = 1\nseed = 2\n"), doctest::Contains("duplicate"), ConfigError);
  std::map<std::string, std::string> v{{"train_file", "a"}, {"val_file", "b"}, {"horizon", "-3"}};
  CHECK_THROWS_WITH_AS(cli::resolve_config(v), doctest::Contains("horizon"), ConfigError);
  v["horizon"] = "5";
  v["mode"] = "fast";
  CHECK_THROWS_WITH_AS(cli::resolve_config(v), doctest::Contains("mode"), ConfigError);
  CHECK(cli::widths_from_string("k", "64, 64") == std::vector<std::size_t>{64, 64});
  CHECK(cli::widths_to_string({}) == "none");
}

TEST_CASE("shipped benchmark configs parse") {
  for (const char* name : {"wh.ini", "silverbox.ini"}) {
    const auto path = std::filesystem::path(SSENC_SOURCE_DIR) / "configs" / name;
    auto values = cli::parse_config_text(slurp(path));
    CHECK_NOTHROW(cli::resolve_config(values));
  }
}
