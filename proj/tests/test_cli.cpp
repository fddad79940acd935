#include <catch_amalgamated.hpp>

#include <pieces/lab/config.hpp>
#include <pieces/lab/report.hpp>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pieces::lab;
namespace fs = std::filesystem;

namespace {
std::string lab_binary() {
  const char* p = std::getenv("PIECES_LAB");
  return p ? p : "";
}

fs::path scratch() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / ("pieces_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

int run(const std::string& args) {
  const std::string cmd = lab_binary() + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* stats_config = "[system]\nL = 20000\n[run]\nreplicas = 4\nthreads = 1\n";
}  // namespace

TEST_CASE("config defaults and validation") {
  const Config c;
  CHECK(c.real("system.L") == 1e5);
  CHECK(c.text("potential.family") == "box");
  CHECK(c.reals("system.rhos") == std::vector<double>{0.1, 0.05, 0.02});

  const auto t = Config::from_text("; comment\n[system]\n; rho below\nrho = 0.05\n[potential]\nfamily = exponential\n");
  CHECK(t.real("system.rho") == 0.05);
  CHECK(t.text("potential.family") == "exponential");

  // comments take whole lines; repeated sections are rejected
  CHECK_THROWS_AS(Config::from_text("[system]\nrho = 0.05 ; trailing\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[system]\nL = 10\n[run]\nseed = 2\n[system]\nrho = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[system]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[nowhere]\nL = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[system]\nL = abc\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[system]\nL = -5\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[potential]\nfamily = cubic\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[system\nL = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_file("/nonexistent/config.ini"), ConfigError);
  Config s;
  CHECK_THROWS_AS(s.set("run.nothing", "1"), ConfigError);
  CHECK_THROWS_AS(s.set("run.replicas", "0"), ConfigError);
}

TEST_CASE("config hash is canonical") {
  const auto a = Config::from_text("[system]\nrho = 0.05\nL = 1000\n");
  const auto b = Config::from_text("[run]\nseed = 1\n\n[system]\nL = 1000\nrho = 0.05\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(fnv1a_hex(a.canonical()) == fnv1a_hex(b.canonical()));
  const auto c = Config::from_text("[system]\nrho = 0.06\nL = 1000\n");
  CHECK(fnv1a_hex(a.canonical()) != fnv1a_hex(c.canonical()));
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("shipped configs parse") {
  const char* src = std::getenv("PIECES_SOURCE");
  if (!src) SKIP("PIECES_SOURCE not set");
  int n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(src) / "tools" / "configs")) {
    INFO(e.path());
    CHECK_NOTHROW(Config::from_file(e.path().string()));
    ++n;
  }
  CHECK(n >= 4);
  // the acceptance file spells out the defaults
  CHECK(Config::from_file((fs::path(src) / "tools" / "configs" / "acceptance.ini").string()).canonical() ==
        Config().canonical());
}

TEST_CASE("command line exit codes") {
  if (lab_binary().empty()) SKIP("PIECES_LAB not set");
  const auto zero = write_config("zero.ini", "[potential]\nfamily = zero\nsecond_family = zero\n");
  CHECK(run("gamma --config " + zero.string()) == 0);
  CHECK(run("gamma --config " + zero.string() + " --check") == 4);
  CHECK(run("gamma --config " + write_config("bad.ini", "[system]\nbogus = 1\n").string()) == 2);
  CHECK(run("gamma --config " + (scratch() / "missing.ini").string()) == 2);
  CHECK(run("gamma") == 2);
  CHECK(run("no-such-subcommand --config " + zero.string()) == 2);
  CHECK(run("free-energy --config " + write_config("tiny.ini", "[system]\nL = 1\n").string()) == 2);
  // a very strong box on pieces shorter than its range breaks the energy ladder
  const auto ladder = write_config("ladder.ini", "[gamma]\nladder = 0.5,1,2\n[potential]\nheight = 1000\n");
  CHECK(run("gamma --config " + ladder.string()) == 3);
}

TEST_CASE("outputs are deterministic") {
  if (lab_binary().empty()) SKIP("PIECES_LAB not set");
  const auto one = write_config("s1.ini", stats_config);
  const auto four = write_config("s4.ini", "[system]\nL = 20000\n[run]\nreplicas = 4\nthreads = 4\n");
  REQUIRE(run("pieces-stats --config " + one.string() + " --out " + (scratch() / "a").string()) == 0);
  REQUIRE(run("pieces-stats --config " + one.string() + " --out " + (scratch() / "b").string()) == 0);
  REQUIRE(run("pieces-stats --config " + four.string() + " --out " + (scratch() / "c").string()) == 0);
  const auto a = slurp(scratch() / "a" / "pieces-stats.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(scratch() / "b" / "pieces-stats.csv"));
  CHECK(a == slurp(scratch() / "c" / "pieces-stats.csv"));

  // a different seed changes the samples
  REQUIRE(run("pieces-stats --config " + one.string() + " --seed 7 --replicas 2 --out " + (scratch() / "d").string()) == 0);
  CHECK(a != slurp(scratch() / "d" / "pieces-stats.csv"));

  const auto j = nlohmann::json::parse(slurp(scratch() / "d" / "pieces-stats.json"));
  for (const char* k : {"subcommand", "version", "config_hash", "config", "seeds", "wall_time_s", "results", "checks"})
    CHECK(j.contains(k));
  CHECK(j["subcommand"] == "pieces-stats");
  CHECK(j["config"]["run.seed"] == "7");
  CHECK(j["config"]["run.replicas"] == "2");
  CHECK(j["seeds"].size() == 2);
  CHECK(j["seeds"][0] == 7);
  CHECK(j["config_hash"].get<std::string>().size() == 16);
}
