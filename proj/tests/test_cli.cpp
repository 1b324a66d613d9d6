#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = 0;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("mrdtool_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

Result run(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(MRDTOOL) + " " + args + " >" + out.string() + " 2>" +
                          err.string();
  const int raw = std::system(cmd.c_str());
  return {WEXITSTATUS(raw), slurp(out), slurp(err)};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("test-data: a single large value is rejected") {
  const auto data = write("one.csv", "5\n");
  const Result r = run("test-data " + data.string() + " --schedule explicit --values 2");
  CHECK(r.status == 0);
  CHECK(r.out == "index,statistic,threshold,rejected,rank\n1,5,2,true,1\n");
}

TEST_CASE("test-data: change point below the constants rejects nothing") {
  const auto data = write("cp.csv", "1\n-1\n");
  const Result r = run("test-data " + data.string() +
                       " --model change_point --schedule explicit --values 10,9.999999");
  CHECK(r.status == 0);
  CHECK(r.out.find("true") == std::string::npos);
  CHECK(r.out.find("2,") != std::string::npos);
}

TEST_CASE("test-data: malformed cell names the line") {
  const auto data = write("bad.csv", "1\n2\nthree\n");
  const Result r = run("test-data " + data.string());
  CHECK(r.status != 0);
  CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("test-data: bad schedule names the stage") {
  const auto data = write("three.csv", "1\n2\n3\n");
  const Result r = run("test-data " + data.string() + " --schedule explicit --values 3,1,2");
  CHECK(r.status != 0);
  CHECK(r.err.find("stage 3") != std::string::npos);
}

TEST_CASE("simulate: csv output and worker-count invariance") {
  const auto cfg = write("grid.json", R"({
    "scenario": {"kind": "treatments_control", "n": 2,
                 "rows": [{"label": "r", "counts": [[0, 18], [3, 2]]}]},
    "procedures": [{"kind": "mrd", "name": "MRD"}, {"kind": "step_down", "name": "SD"}],
    "run": {"iterations": 300, "seed": 3}
  })");
  const auto a = scratch() / "a.csv";
  const auto b = scratch() / "b.csv";
  CHECK(run("simulate " + cfg.string() + " --workers 1 --out " + a.string()).status == 0);
  CHECK(run("simulate " + cfg.string() + " --workers 4 --out " + b.string()).status == 0);
  const std::string ta = slurp(a);
  CHECK(ta.rfind("row,nulls,alternatives,procedure", 0) == 0);
  CHECK(ta == slurp(b));

  const auto bad = write("bad.json", R"({"scenario": {"kind": "nope", "rows": []}})");
  const Result r = run("simulate " + bad.string());
  CHECK(r.status != 0);
  CHECK(r.err.find("scenario.kind") != std::string::npos);
}

TEST_CASE("simulate: empty grid prints the header only") {
  const auto cfg = write("empty.json", R"({
    "scenario": {"kind": "treatments_control", "rows": []},
    "procedures": [{"kind": "mrd"}]
  })");
  const Result r = run("simulate " + cfg.string());
  CHECK(r.status == 0);
  CHECK(r.out ==
        "row,nulls,alternatives,procedure,iterations,e_type1,e_type2,fdr,total,"
        "se_type1,se_type2,se_fdr,se_total\n");
}

TEST_CASE("verify passes, and the sign mutation is caught") {
  CHECK(run("verify --trials 20").status == 0);
  const Result flipped = run("verify --trials 20 --flip-changepoint-sign");
  CHECK(flipped.status != 0);
  CHECK(flipped.out.find("FAIL") != std::string::npos);
}

}  // TEST_SUITE
