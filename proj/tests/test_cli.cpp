#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kBin = TROPFUZZY_BIN;
const fs::path kFixtures = FIXTURE_DIR;

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args) {
  const std::string cmd = "\"" + kBin + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tropfuzzy_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("generate is byte-identical for a fixed seed") {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  REQUIRE(run("generate --kind synth2 --n 50 --seed 7 --out " + q(a)).code == 0);
  REQUIRE(run("generate --kind synth2 --n 50 --seed 7 --out " + q(b)).code == 0);
  for (const char* f : {"data.csv", "schema.json", "manifest.json"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto c = scratch("gen_c");
  REQUIRE(run("generate --kind synth2 --n 50 --seed 8 --out " + q(c)).code == 0);
  CHECK(slurp(a / "data.csv") != slurp(c / "data.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("input errors exit with 2") {
  const auto out = scratch("bad");
  CHECK(run("generate --kind synth1 --n 0 --out " + q(out)).code == 2);
  CHECK(run("generate --kind synth3 --n 10 --out " + q(out)).code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("").code == 2);

  const auto r = run("train --data " + q(kFixtures / "small.csv") + " --schema " +
                     q(kFixtures / "nope.json") + " --out " + q(out));
  CHECK(r.code == 2);
  CHECK(r.output.find("nope.json") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "model.json"));

  CHECK(run("train --data " + q(kFixtures / "bad_label.csv") + " --schema " +
            q(kFixtures / "small_schema.json") + " --out " + q(out)).code == 2);
  CHECK(run("cv --data " + q(kFixtures / "small.csv") + " --schema " +
            q(kFixtures / "small_schema.json") + " --k 1 --out " + q(out)).code == 2);

  const auto bad_model = fs::temp_directory_path() / "tropfuzzy_cli_bad_model.json";
  std::ofstream(bad_model) << "{\"format_version\": 1, \"eps\": \"x\"}";
  const auto e = run("extract-rules --model " + q(bad_model) + " --out " + q(out));
  CHECK(e.code == 2);
  CHECK(e.output.find("model field") != std::string::npos);
  fs::remove(bad_model);
  CHECK(run("--help").code == 0);
  fs::remove_all(out);
}

TEST_CASE("train, extract-rules and cv end to end") {
  const auto dir = scratch("e2e");
  REQUIRE(run("generate --kind synth1 --n 200 --seed 3 --out " + q(dir / "data")).code == 0);
  const auto data = q(dir / "data" / "data.csv"), schema = q(dir / "data" / "schema.json");

  const auto t = run("train --data " + data + " --schema " + schema +
                     " --max-epochs 15 --patience 15 --rules 5 --seed 4 --out " + q(dir / "model") +
                     " --rule-spec " + q(kFixtures / "synth1_rules.json"));
  REQUIRE(t.code == 0);
  for (const char* f : {"model.json", "history.csv", "metrics.json"}) CHECK(fs::exists(dir / "model" / f));
  CHECK(slurp(dir / "model" / "history.csv").starts_with("epoch,ce,l1,corr,total,val_auc,eps\n"));

  const auto model = q(dir / "model" / "model.json");
  REQUIRE(run("extract-rules --model " + model + " --out " + q(dir / "rules")).code == 0);
  for (const char* f : {"rules.txt", "heatmap.csv", "membership_curves.csv"}) {
    CHECK(fs::exists(dir / "rules" / f));
  }
  const auto strict = run("extract-rules --model " + model + " --keep 0.99 --merge 0.99 --out " +
                          q(dir / "strict"));
  CHECK(strict.code == 0);
  // a near-1 keep threshold can leave nothing; the user is told so
  if (slurp(dir / "strict" / "rules.txt").find("No rules") != std::string::npos) {
    CHECK(strict.output.find("threshold") != std::string::npos);
  }
  CHECK(run("extract-rules --model " + model + " --keep 1.5 --out " + q(dir / "x")).code == 2);

  const auto cv = run("cv --data " + data + " --schema " + schema +
                      " --k 3 --trials 2 --max-epochs 5 --patience 5 --threads 2 --seed 1 --out " +
                      q(dir / "cv"));
  REQUIRE(cv.code == 0);
  CHECK(slurp(dir / "cv" / "cv_summary.json").find("\"auc\"") != std::string::npos);
  const auto inj = run("cv --data " + data + " --schema " + schema + " --rule-spec " +
                       q(kFixtures / "rule_e.json") +
                       " --k 3 --trials 1 --max-epochs 3 --patience 3 --out " + q(dir / "cv_e"));
  CHECK(inj.code == 0);
  CHECK(slurp(dir / "cv_e" / "cv_summary.json").find("\"injected_rules\": 1") != std::string::npos);
  CHECK(run("cv --data " + data + " --schema " + schema + " --rule-spec " +
            q(kFixtures / "hf_rules.json") + " --k 3 --trials 1 --out " + q(dir / "cv_bad")).code == 2);
  CHECK_FALSE(fs::exists(dir / "cv_bad"));
  fs::remove_all(dir);
}

TEST_CASE("config file supplies options") {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "gen.toml") << "[generate]\nkind = \"synth2\"\nn = 20\nseed = 7\n";
  REQUIRE(run("generate --config " + q(dir / "gen.toml") + " --out " + q(dir / "a")).code == 0);
  REQUIRE(run("generate --kind synth2 --n 20 --seed 7 --out " + q(dir / "b")).code == 0);
  CHECK(slurp(dir / "a" / "data.csv") == slurp(dir / "b" / "data.csv"));
  fs::remove_all(dir);
}

TEST_CASE("gradcheck") {
  const auto ok = run("gradcheck --networks 4 --seed 5");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("PASS") != std::string::npos);
  CHECK(run("gradcheck --networks 4 --seed 5").output == ok.output);
  const auto bad = run("gradcheck --networks 4 --seed 5 --corrupt-inference-sign");
  CHECK(bad.code == 1);
  CHECK(bad.output.find("FAIL") != std::string::npos);
}
