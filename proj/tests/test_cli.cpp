#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(ISOMCTL_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("defaults are printed") { CHECK(run("--mode defaults") == 0); }

TEST_CASE("bad configuration exits with status 2") {
  const auto dir = scratch("isomctl_cli_bad");
  std::ofstream(dir / "bad.json") << "{\"model\": {\"n_basis\": \"x\"}}";
  CHECK(run("--config " + (dir / "bad.json").string()) == 2);
  CHECK(run("--mode warp") == 2);
  CHECK(run("--set model.n_basis=10 --mode eigen --out " + (dir / "o").string()) == 2);
  fs::remove_all(dir);
}

TEST_CASE("eigen mode writes states, summary and manifest") {
  const auto dir = scratch("isomctl_cli_eigen");
  REQUIRE(run("--mode eigen --seed 4 -q --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "states.csv"));
  std::ifstream ms(dir / "manifest.json");
  const auto m = nlohmann::json::parse(ms);
  CHECK(m["schema"] == "isomctl.manifest/1");
  CHECK(m["seed"] == 4);
  CHECK(m["exit_status"] == 0);
  CHECK(m["config"]["run"]["mode"] == "eigen");
  std::ifstream ss(dir / "summary.json");
  const auto s = nlohmann::json::parse(ss);
  CHECK(s["trans_count"] == 49);
  CHECK(s["cis_count"] == 23);
  fs::remove_all(dir);
}

}
