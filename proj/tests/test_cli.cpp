#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CODCAL_BIN) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "codcal_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kMinimalConfig = R"({
  "seed": 3, "trials": 5, "alpha": [0.02, 0.05], "budget": 5,
  "split": {"train_size": 200, "cal_size": 200, "test_inlier_size": 100,
            "test_outlier_size": 20, "contamination_rate": 0.03}
})";

}  // namespace

TEST_CASE("simulate writes results, json and manifest") {
  const fs::path d = scratch("sim");
  write(d / "cfg.json", kMinimalConfig);
  const Run r = run("simulate --config " + (d / "cfg.json").string() + " --out " + (d / "a").string());
  CHECK(r.status == 0);
  CHECK(fs::exists(d / "a" / "results.csv"));
  CHECK(fs::exists(d / "a" / "results.json"));
  CHECK(fs::exists(d / "a" / "manifest.json"));

  const auto manifest = nlohmann::json::parse(slurp(d / "a" / "manifest.json"));
  CHECK(manifest["master_seed"] == 3);
  CHECK(manifest["config_hash"].get<std::string>().size() == 64);

  // Same config and seed, different worker count: identical bytes.
  CHECK(run("simulate --workers 1 --config " + (d / "cfg.json").string() + " --out " + (d / "b").string()).status ==
        0);
  CHECK(slurp(d / "a" / "results.csv") == slurp(d / "b" / "results.csv"));

  // Override narrows the alpha grid: 5 methods x 1 alpha + header.
  CHECK(run("simulate --config " + (d / "cfg.json").string() + " --out " + (d / "c").string() +
            " --set alpha=[0.02]")
            .status == 0);
  std::istringstream lines(slurp(d / "c" / "results.csv"));
  int n = 0;
  for (std::string line; std::getline(lines, line);) ++n;
  CHECK(n == 6);

  // A different seed changes the output.
  CHECK(run("simulate --seed 4 --config " + (d / "cfg.json").string() + " --out " + (d / "e").string()).status ==
        0);
  CHECK(slurp(d / "a" / "results.csv") != slurp(d / "e" / "results.csv"));
}

TEST_CASE("simulate rejects bad configs with exit 2") {
  const fs::path d = scratch("badsim");
  write(d / "bad.json", R"({"trials": 5, "split": {"cal_size": "x"}})");
  CHECK(run("simulate --config " + (d / "bad.json").string() + " --out " + (d / "o").string()).status == 2);
  write(d / "unknown.json", R"({"colour": 1, "split": {}})");
  CHECK(run("simulate --config " + (d / "unknown.json").string() + " --out " + (d / "o").string()).status == 2);
  CHECK(run("simulate --config " + (d / "missing.json").string() + " --out " + (d / "o").string()).status != 0);
  CHECK(run("frobnicate").status == 2);
}

TEST_CASE("pvalue subcommand") {
  const fs::path d = scratch("pv");
  write(d / "cal.csv", "score,label\n1,0\n2,0\n3,1\n");
  write(d / "test.csv", "score\n2.5\n");

  const Run std_run = run("pvalue --cal " + (d / "cal.csv").string() + " --test " + (d / "test.csv").string() +
                          " --alpha 0.5");
  CHECK(std_run.status == 0);
  CHECK(std_run.out.find("index,score,p_fraction,p_value,reject") == 0);
  CHECK(std_run.out.find(",2/4,0.5,true") != std::string::npos);

  const Run lt0 = run("pvalue --method label-trim --m 0 --cal " + (d / "cal.csv").string() + " --test " +
                      (d / "test.csv").string() + " --alpha 0.5");
  CHECK(lt0.status == 0);
  CHECK(lt0.out == std_run.out);

  const Run lt1 = run("pvalue --method label-trim --m 1 --cal " + (d / "cal.csv").string() + " --test " +
                      (d / "test.csv").string() + " --alpha 0.5");
  CHECK(lt1.out.find(",1/3,") != std::string::npos);

  write(d / "nolabel.csv", "score\n1\n2\n3\n");
  CHECK(run("pvalue --method label-trim --m 1 --cal " + (d / "nolabel.csv").string() + " --test " +
            (d / "test.csv").string())
            .status == 2);
  CHECK(run("pvalue --method oracle --cal " + (d / "cal.csv").string() + " --test " + (d / "test.csv").string())
            .status == 2);

  // 100 calibration scores, one of them above the test point: p = 2/101.
  std::string big = "score\n";
  for (int i = 1; i <= 100; ++i) big += std::to_string(i) + "\n";
  write(d / "big.csv", big);
  write(d / "t2.csv", "score\n99.5\n98.5\n");
  const Run frac = run("pvalue --alpha 0.02 --cal " + (d / "big.csv").string() + " --test " + (d / "t2.csv").string());
  CHECK(frac.status == 0);
  CHECK(frac.out.find("0,99.5,2/101,0.019801980198,true") != std::string::npos);
  CHECK(frac.out.find("1,98.5,3/101,0.029702970297,false") != std::string::npos);
}

TEST_CASE("bounds subcommand") {
  CHECK(run("bounds --form oracle-interval --n 80 --alpha 0.02").out == "0.00765432098765 0.02\n");
  CHECK(run("bounds --form lemma --alpha 0.05 --n0 100 --n1 0 --cdf 0.3").out == "0.05\n");
  CHECK(run("bounds --form lemma --alpha 0.1 --n0 9 --n1 1 --cdf 0").out == "0.01\n");
  CHECK(run("bounds --form theorem --alpha 0.02 --n0 999 --lt-outliers 10 --cdf 0.9").out == "0.0202\n");
  CHECK(run("bounds --form mixture --alpha 0.05 --delta 0 --f0-minus-f1 0.4").out == "0.05\n");
  CHECK(run("bounds --form mixture --alpha 0.05 --delta 0.1 --f0-minus-f1 0.4").out == "0.01\n");
  CHECK(run("bounds --form lemma --alpha 1.5 --n0 9 --n1 1 --cdf 0").status == 2);
  CHECK(run("bounds --form lemma --alpha 0.1 --n0 9 --n1 1 --cdf 1.5").status == 2);
  CHECK(run("bounds --form nonsense --alpha 0.1").status == 2);
}

TEST_CASE("gen subcommand") {
  const fs::path d = scratch("gen");
  const std::string args = "gen --n-inlier 20 --n-outlier 5 --dim 3 --seed 9 --out ";
  CHECK(run(args + (d / "a.csv").string()).status == 0);
  CHECK(run(args + (d / "b.csv").string()).status == 0);
  const std::string a = slurp(d / "a.csv");
  CHECK(a == slurp(d / "b.csv"));
  CHECK(a.rfind("x0,x1,x2,label\n", 0) == 0);
  int rows = -1;
  std::istringstream lines(a);
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 25);
}
