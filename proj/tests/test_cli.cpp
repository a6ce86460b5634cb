#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hydg/cli.hpp"
#include "hydg/error.hpp"
#include "test_util.hpp"

using namespace hydg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hydg");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    files[e.path().filename().string()] = testing::slurp(e.path());
  }
  return files;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++n;
  return n;
}

const std::vector<std::string> kSmall{"--sbm", "40,4,3,0.3,0.03,0.1", "--split-t", "1",
                                      "--epochs", "3",   "--hidden",  "6"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("generate writes one file set per slice and is deterministic") {
  testing::TempDir dir("cli_gen");
  const Run a = cli({"generate", "--sbm", "200,8,3,0.1,0.01,0.1", "--seed", "1", "--out",
                     (dir.path / "a").string()});
  REQUIRE(a.code == 0);
  std::size_t edge_files = 0, label_files = 0, edges = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "a")) {
    const std::string f = e.path().filename().string();
    if (f.starts_with("edges_")) {
      ++edge_files;
      edges += count_lines(e.path());
    }
    if (f.starts_with("labels_")) {
      ++label_files;
      CHECK(count_lines(e.path()) == 200);
    }
  }
  CHECK(edge_files == 8);
  CHECK(label_files == 8);
  CHECK(a.out.find("nodes=200") != std::string::npos);
  CHECK(a.out.find("edges=" + std::to_string(edges) + " ") != std::string::npos);

  REQUIRE(cli({"generate", "--sbm", "200,8,3,0.1,0.01,0.1", "--seed", "1", "--out",
               (dir.path / "b").string()})
              .code == 0);
  CHECK(snapshot_dir(dir.path / "a") == snapshot_dir(dir.path / "b"));
}

TEST_CASE("validation errors name the field and exit nonzero") {
  Run r = cli({"train", "--split-t", "1"});
  CHECK(r.code != 0);
  CHECK(r.err.find("data/sbm") != std::string::npos);

  r = cli({"train", "--sbm", "40,4,3,0.3,0.03,0.1", "--data", "x", "--split-t", "1"});
  CHECK(r.code != 0);
  CHECK(r.err.find("data/sbm") != std::string::npos);

  r = cli(with({"train", "--alpha", "0", "--beta", "0"}, kSmall));
  CHECK(r.code != 0);
  CHECK(r.err.find("alpha") != std::string::npos);

  r = cli(with({"train", "--agg", "median"}, kSmall));
  CHECK(r.err.find("agg") != std::string::npos);

  r = cli(with({"train", "--tau", "1,2"}, kSmall));
  CHECK(r.err.find("tau") != std::string::npos);

  r = cli({"train", "--sbm", "40,4,3,0.3,0.03,0.1"});
  CHECK(r.err.find("split-t") != std::string::npos);

  r = cli({"train", "--sbm", "40,4,3,0.3,0.03,0.1", "--split-t", "3"});
  CHECK(r.err.find("split-t") != std::string::npos);

  r = cli({"train", "--sbm", "40,4,3,1.5,0.03,0.1", "--split-t", "1"});
  CHECK(r.err.find("sbm") != std::string::npos);

  r = cli(with({"train", "--k", "abc"}, kSmall));
  CHECK(r.code != 0);
  CHECK(r.err.find("--k") != std::string::npos);

  CHECK(cli({}).code != 0);
  CHECK(cli({"frobnicate"}).code != 0);
}

TEST_CASE("config file with flag overrides") {
  testing::TempDir dir("cli_cfg");
  const fs::path cfg = dir.path / "run.cfg";
  {
    std::ofstream f(cfg);
    f << "# small run\nsbm=40,4,3,0.3,0.03,0.1\nsplit-t=1\nepochs=4\nhidden=6\ntau=1,2,3\n";
  }
  const fs::path out = dir.path / "o";
  Run r = cli({"train", "--config", cfg.string(), "--epochs", "2", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(testing::slurp(out / "loss.csv").starts_with("epoch,train_loss\n"));
  CHECK(count_lines(out / "loss.csv") == 3);

  r = cli({"train", "--config", cfg.string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(count_lines(out / "loss.csv") == 5);

  {
    std::ofstream f(cfg, std::ios::app);
    f << "bogus=1\n";
  }
  r = cli({"train", "--config", cfg.string(), "--out", out.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("bogus") != std::string::npos);
}

TEST_CASE("train then eval replays bit-identically") {
  testing::TempDir dir("cli_eval");
  const std::string out = (dir.path / "o").string();
  REQUIRE(cli(with({"train", "--out", out}, kSmall)).code == 0);
  CHECK(fs::exists(dir.path / "o" / "params.bin"));

  const Run a = cli(with({"eval", "--out", out}, kSmall));
  REQUIRE(a.code == 0);
  const std::string first = testing::slurp(dir.path / "o" / "metrics.csv");
  const Run b = cli(with({"eval", "--out", out}, kSmall));
  REQUIRE(b.code == 0);
  CHECK(testing::slurp(dir.path / "o" / "metrics.csv") == first);
  CHECK(a.out == b.out);
  CHECK(first.starts_with("slice,evaluated,accuracy,macro_auc\n"));

  // Shapes must match the configured model.
  const Run bad = cli({"eval", "--out", out, "--sbm", "40,4,3,0.3,0.03,0.1", "--split-t", "1",
                       "--hidden", "7"});
  CHECK(bad.code != 0);
  CHECK(bad.err.find("shape") != std::string::npos);

  const Run missing =
      cli(with({"eval", "--out", out, "--params", (dir.path / "none.bin").string()}, kSmall));
  CHECK(missing.code != 0);
}

TEST_CASE("commands leave the dataset directory untouched") {
  testing::TempDir dir("cli_data");
  const fs::path data = dir.path / "data";
  REQUIRE(cli({"generate", "--sbm", "30,4,3,0.3,0.03,0.1", "--out", data.string()}).code == 0);
  const auto before = snapshot_dir(data);
  const std::vector<std::string> common{"--data",   data.string(), "--split-t", "1",
                                        "--epochs", "2",           "--hidden",  "4",
                                        "--out",    (dir.path / "o").string()};
  CHECK(cli(with({"train"}, common)).code == 0);
  CHECK(cli(with({"eval"}, common)).code == 0);
  CHECK(snapshot_dir(data) == before);

  const Run same = cli({"train", "--data", data.string(), "--split-t", "1", "--out", data.string()});
  CHECK(same.code != 0);
  CHECK(same.err.find("out") != std::string::npos);
  CHECK(snapshot_dir(data) == before);
}

TEST_CASE("ablate reports three modes") {
  testing::TempDir dir("cli_ablate");
  const Run r = cli(with({"ablate", "--out", dir.path.string()}, kSmall));
  REQUIRE(r.code == 0);
  const std::string csv = testing::slurp(dir.path / "ablation.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "ablation,accuracy,macro_auc");
  std::set<std::string> modes;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
    modes.insert(line.substr(0, line.find(',')));
  }
  CHECK(rows == 3);
  CHECK(modes == std::set<std::string>{"full", "individual_only", "group_only"});
}

TEST_CASE("argument helpers") {
  const SbmSpec s = parse_sbm("200,8,3,0.1,0.01,0.1");
  CHECK(s.nodes == 200);
  CHECK(s.slices == 8);
  CHECK(s.drift_rate == 0.1);
  CHECK_THROWS_AS(parse_sbm("200,8"), ParameterError);
  CHECK_THROWS_AS(parse_sbm("200,8,3,x,0.01,0.1"), ParameterError);
  const TemporalScales t = parse_scales("1,3,7");
  CHECK(t.long_term == 7);
}
