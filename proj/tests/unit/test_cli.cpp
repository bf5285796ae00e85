#include <sys/wait.h>

#include <cstdlib>

#include "doctest.h"
#include "fixtures.hpp"
#include "pacte/io.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + PACTE_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("pipeline output is byte-identical across runs") {
  fixture::TempDir tmp("cli");
  const auto cfg = fixture::write_toy_project(tmp.path());
  const auto log = tmp / "log.txt";
  REQUIRE(run("pipeline --config " + cfg.string() + " --workdir " + (tmp / "a").string(), log) == 0);
  REQUIRE(run("pipeline --config " + cfg.string() + " --workdir " + (tmp / "b").string(), log) == 0);
  for (const char* f : {"report/report.json", "report/report.md", "report/pca.csv", "eval/eval.json"})
    CHECK_MESSAGE(pacte::io::read_file(tmp / "a" / f) == pacte::io::read_file(tmp / "b" / f), f);

  REQUIRE(run("pipeline --config " + cfg.string() + " --workdir " + (tmp / "a").string(), log) == 0);
  const std::string out = pacte::io::read_file(log);
  CHECK(out.find("computed") == std::string::npos);
  CHECK(out.find("report: cached") != std::string::npos);
}

TEST_CASE("export tokens and single stages") {
  fixture::TempDir tmp("cli-stages");
  const auto cfg = fixture::write_toy_project(tmp.path());
  const auto log = tmp / "log.txt";
  const std::string base = " --config " + cfg.string();
  CHECK(run("lda" + base, log) == 1);
  CHECK(pacte::io::read_file(log).find("error:") != std::string::npos);
  REQUIRE(run("preprocess" + base + " --export-tokens " + (tmp / "tok.jsonl").string(), log) == 0);
  const std::string tokens = pacte::io::read_file(tmp / "tok.jsonl");
  CHECK(tokens.find("\"side\":0") != std::string::npos);
  CHECK(tokens.find("\"tokens\":[") != std::string::npos);
  CHECK(run("lda" + base, log) == 0);
}

TEST_CASE("bad invocations exit nonzero") {
  fixture::TempDir tmp("cli-bad");
  const auto log = tmp / "log.txt";
  CHECK(run("pipeline --config " + (tmp / "missing.json").string(), log) != 0);
  CHECK(run("no-such-command", log) != 0);
  pacte::io::write_file_atomic(tmp / "bad.json", R"({"corpus": "x", "unknown_key": 1})");
  CHECK(run("pipeline --config " + (tmp / "bad.json").string(), log) != 0);
  CHECK(pacte::io::read_file(log).find("unknown_key") != std::string::npos);
}
