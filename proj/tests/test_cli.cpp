#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "meshret/io/files.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "meshret_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Exit status of the CLI; stdout and stderr go to `log`.
int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + MESHRET_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path fixture_config(const std::string& name) {
  const fs::path cfg = work_dir() / "fixtures" / name / "config.json";
  if (!fs::exists(cfg)) {
    REQUIRE(cli("fixtures --out " + quoted(work_dir() / "fixtures") + " --name " + name,
                work_dir() / ("fixtures_" + name + ".log")) == 0);
  }
  return cfg;
}

}  // namespace

TEST_CASE("retarget writes one configuration per source frame") {
  const auto cfg = fixture_config("standing");
  const fs::path out = work_dir() / "retarget";
  REQUIRE(cli("retarget --config " + quoted(cfg) + " --out " + quoted(out), work_dir() / "retarget.log") == 0);
  const json tr = json::parse(meshret::read_text_file(out / "trajectory.json"));
  CHECK(tr.at("frames").size() == 100);
  CHECK(tr.at("reports").size() == 100);
}

TEST_CASE("evaluate rejects a trajectory of the wrong length") {
  const auto standing = fixture_config("standing");
  const fs::path out = work_dir() / "mismatch_src";
  REQUIRE(cli("retarget --config " + quoted(standing) + " --out " + quoted(out), work_dir() / "m1.log") == 0);
  const auto walking = fixture_config("walking");
  const fs::path log = work_dir() / "mismatch.log";
  const int code = cli("evaluate --config " + quoted(walking) + " --trajectory " +
                           quoted(out / "trajectory.json") + " --out " + quoted(work_dir() / "mismatch"),
                       log);
  CHECK(code != 0);
  const std::string text = meshret::read_text_file(log);
  CHECK(text.find("frames") != std::string::npos);
  CHECK(text.find("100") != std::string::npos);
  CHECK(text.find("300") != std::string::npos);
}

TEST_CASE("compare reports zero skating for the main method on walking") {
  const auto cfg = fixture_config("walking");
  const fs::path out = work_dir() / "compare";
  REQUIRE(cli("compare --config " + quoted(cfg) + " --methods phc,omni --out " + quoted(out),
              work_dir() / "compare.log") == 0);
  const json table = json::parse(meshret::read_text_file(out / "compare.json"));
  REQUIRE(table.at("methods").size() == 2);
  for (const auto& row : table.at("methods")) {
    if (row.at("method") == "omni") CHECK(row.at("skating_duration").at("mean").get<double>() == 0.0);
    if (row.at("method") == "phc") CHECK(row.at("skating_duration").at("mean").get<double>() > 0.0);
  }
  CHECK(fs::exists(out / "compare.txt"));
}

TEST_CASE("identical invocations give identical files") {
  const auto cfg = fixture_config("standing");
  std::string text[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = work_dir() / ("det" + std::to_string(k));
    REQUIRE(cli("retarget --config " + quoted(cfg) + " --seed 9 --out " + quoted(out),
                work_dir() / ("det" + std::to_string(k) + ".log")) == 0);
    text[k] = meshret::read_text_file(out / "trajectory.json");
  }
  CHECK(text[0] == text[1]);
}

TEST_CASE("usage and input errors map to exit codes") {
  CHECK(cli("retarget --model " + quoted(work_dir() / "nope.json") + " --source " + quoted(work_dir() / "x.json"),
            work_dir() / "io.log") == 3);
  CHECK(cli("frobnicate", work_dir() / "usage.log") == 1);
  CHECK(cli("retarget", work_dir() / "missing.log") == 1);
}
