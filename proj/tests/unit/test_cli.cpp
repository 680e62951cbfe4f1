#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "sra/cli.hpp"

using namespace sra;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Sandbox {
  fs::path root;
  fs::path data;
  int next = 0;

  Sandbox() {
    root = fs::temp_directory_path() / "sra_cli_unit";
    fs::remove_all(root);
    data = root / "data";
    write_dataset_files(data, synthesize(test::tiny_synth(), 5));
  }
  ~Sandbox() { fs::remove_all(root); }

  // Runs the CLI in a fresh base directory and returns the run directory it made.
  std::pair<int, fs::path> run(std::vector<std::string> args) {
    const fs::path base = root / ("runs" + std::to_string(next++));
    args.insert(args.begin(), {"--run-dir", base.string()});
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    fs::path dir;
    if (fs::exists(base)) {
      for (const auto& e : fs::directory_iterator(base)) dir = e.path();
    }
    return {code, dir};
  }

  std::vector<std::string> data_flags() const {
    return {"--interactions", (data / "interactions.tsv").string(), "--social",
            (data / "social.tsv").string()};
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<std::string> kSmallAttack{"--epochs",         "5",  "--budget",  "3",
                                            "--profile-length", "4",  "--passes",  "1",
                                            "--spies",          "10"};

}  // namespace

TEST_CASE("usage errors exit 2") {
  Sandbox box;
  CHECK(box.run({"attack", "--no-such-flag"}).first == 2);
  CHECK(box.run({}).first == 2);
  const auto [code, dir] = box.run({"ingest", "--interactions", "/nonexistent/x.tsv", "--social",
                                    "/nonexistent/y.tsv"});
  CHECK(code == 2);
  REQUIRE(fs::exists(dir / "manifest.json"));
  const auto m = json::parse(slurp(dir / "manifest.json"));
  CHECK(m.at("status") == "failed");
  CHECK(m.at("error").at("kind") == "usage");
  CHECK(box.run({"report"}).first == 2);
}

TEST_CASE("ingest and partition write their artifacts and a manifest") {
  Sandbox box;
  const auto [code, dir] = box.run(concat({"ingest"}, box.data_flags()));
  REQUIRE(code == 0);
  for (const char* f : {"interactions.tsv", "social.tsv", "summary.json", "summary.csv",
                        "manifest.json"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto m = json::parse(slurp(dir / "manifest.json"));
  CHECK(m.at("status") == "ok");
  CHECK(m.at("inputs").contains("interactions"));
  CHECK(m.at("seed") == 7);
  const auto [pcode, pdir] = box.run(concat({"partition", "--seed", "3"}, box.data_flags()));
  CHECK(pcode == 0);
  CHECK(fs::exists(pdir / "communities.csv"));
  CHECK(pdir.filename().string().find("-seed3") != std::string::npos);
}

TEST_CASE("replaying a manifest reproduces CSV reports byte for byte") {
  Sandbox box;
  const auto [code, dir] =
      box.run(concat(concat({"attack", "--strategy", "multi"}, box.data_flags()), kSmallAttack));
  REQUIRE(code == 0);
  const auto [rcode, rdir] = box.run({"--from-manifest", (dir / "manifest.json").string()});
  REQUIRE(rcode == 0);
  for (const char* f : {"metrics.csv", "reward_curve.csv", "fakes.json"}) {
    CAPTURE(f);
    CHECK(slurp(dir / f) == slurp(rdir / f));
  }
  const auto result = json::parse(slurp(dir / "result.json"));
  CHECK(result.at("audit").at("violations") == 0);
}

TEST_CASE("report compares a subject with the strongest baseline") {
  Sandbox box;
  std::vector<std::string> runs;
  for (const char* s : {"multi", "random", "cold"}) {
    const auto [code, dir] =
        box.run(concat(concat({"attack", "--strategy", s}, box.data_flags()), kSmallAttack));
    REQUIRE(code == 0);
    runs.push_back(dir.string());
  }
  const auto [code, dir] = box.run({"report", "--inputs", runs[0], runs[1], runs[2]});
  REQUIRE(code == 0);
  const std::string csv = slurp(dir / "table.csv");
  CHECK(csv.rfind("strategy,metric,k,clean,attacked,drop,improvement\n", 0) == 0);
  const auto summary = json::parse(slurp(dir / "report.json"));
  const auto r1 = json::parse(slurp(fs::path(runs[1]) / "result.json"));
  const auto r2 = json::parse(slurp(fs::path(runs[2]) / "result.json"));
  const double n1 = MetricsReport::from_json(r1.at("after")).at("NDCG", 10);
  const double n2 = MetricsReport::from_json(r2.at("after")).at("NDCG", 10);
  CHECK(summary.at("best_baseline") == (n1 <= n2 ? "random" : "cold"));
  CHECK(summary.at("subject") == "multi");
}

TEST_CASE("unknown config keys are rejected") {
  Sandbox box;
  const fs::path cfg = box.root / "bad.json";
  std::ofstream(cfg) << R"({"attack": {"cadense": 2}})";
  CHECK(box.run(concat({"attack", "--config", cfg.string()}, box.data_flags())).first == 1);
}
