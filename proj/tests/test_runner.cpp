#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blowup/error.hpp"
#include "blowup/runner.hpp"
#include "support.hpp"

using namespace blowup;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("blowuplab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    RunConfig::from_file(ConfigFile::parse(text, "test.cfg"));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_error);
    return e.what();
  }
  return "";
}

const char* kTiny = R"(
# small subcritical run
domain.kind = disc
domain.radius = 3
grid.h = 1/16
initial.family = ground_state
initial.amplitude = 0.7
solver.dt0 = 0.05
solver.t_end = 0.1
diagnostics.virial = true
diagnostics.virial_stride = 2
)";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BLOWUPLAB_EXE) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config file syntax") {
  const ConfigFile f = ConfigFile::parse("a.b = 1/64  # comment\n\n  c.d=  yes \n e.f = hello world\n", "x.cfg");
  CHECK(f.get_double("a.b", 0.0) == 1.0 / 64.0);
  CHECK(f.get_bool("c.d", false));
  CHECK(f.get_string("e.f", "") == "hello world");
  CHECK(f.get_double("missing.key", 2.5) == 2.5);
  CHECK(f.entries().at("c.d").line == 3);

  auto message = [](const std::string& text) -> std::string {
    try {
      ConfigFile::parse(text, "x.cfg");
    } catch (const Error& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("a.b = 1\nnot a pair\n").find("x.cfg:2:") != std::string::npos);
  CHECK(message("a.b = 1\na.b = 2\n").find("duplicate key 'a.b' (first on line 1)") != std::string::npos);
  CHECK(message("A.B = 1\n").find("malformed key") != std::string::npos);
  CHECK(message("a.b =\n").find("empty value") != std::string::npos);

  const ConfigFile g = ConfigFile::parse("x.y = abc\nx.z = 1.5\n", "g.cfg");
  CHECK_THROWS_WITH_AS(g.get_double("x.y", 0.0), doctest::Contains("g.cfg:1: field 'x.y'"), Error);
  CHECK_THROWS_WITH_AS(g.get_int("x.z", 0), doctest::Contains("expected an integer"), Error);
  CHECK_THROWS_AS(g.get_bool("x.y", false), Error);
  CHECK_THROWS_AS(g.require_string("x.w"), Error);
  CHECK_THROWS_WITH_AS(g.reject_unknown({"x.y"}), doctest::Contains("x.z"), Error);
}

TEST_CASE("run configuration validation") {
  const RunConfig c = RunConfig::from_file(ConfigFile::parse(kTiny, "tiny.cfg"));
  CHECK(c.domain.kind == DomainKind::disc);
  CHECK(c.h == 1.0 / 16.0);
  CHECK(c.initial.family == InitialFamily::ground_state);
  CHECK(c.initial.amplitude == 0.7);
  CHECK(c.virial);
  CHECK(c.config_text.find("grid.h = 1/16") != std::string::npos);

  const std::string base = "domain.kind = disc\ndomain.radius = 3\ngrid.h = 1/16\n";
  CHECK(config_error(base + "initial.family = banana\n").find("field 'initial.family'") != std::string::npos);
  CHECK(config_error(base + "initial.family = ground_state\nsolver.bogus = 1\n").find("solver.bogus") != std::string::npos);
  CHECK(config_error(base + "initial.family = ground_state\ninitial.x0_x = 5\n").find("initial.x0") != std::string::npos);
  CHECK_FALSE(config_error(base + "initial.family = cutoff\ninitial.inner = 2\ninitial.outer = 1\n").empty());
  // outer ball must fit inside the domain
  CHECK_FALSE(config_error(base + "initial.family = cutoff\ninitial.inner = 2\ninitial.outer = 3.5\n").empty());
  CHECK_FALSE(config_error(base + "initial.family = file\ninitial.file = /no/such/file.bin\n").empty());
  CHECK_FALSE(config_error(base + "initial.family = ground_state\nsolver.dt0 = -1\n").empty());
  CHECK_FALSE(config_error(base + "initial.family = ground_state\ndiagnostics.modulation_mode = median\n").empty());
  CHECK_FALSE(config_error("domain.kind = hexagon\ngrid.h = 0.1\ninitial.family = ground_state\n").empty());
  CHECK_FALSE(config_error("domain.kind = disc\ndomain.radius = -3\ngrid.h = 0.1\ninitial.family = ground_state\n").empty());
  CHECK_FALSE(config_error("domain.kind = disc\ndomain.radius = 3\ninitial.family = ground_state\n").empty());
}

TEST_CASE("mask domains from PGM files") {
  const fs::path dir = scratch("mask");
  const GridPtr g = make_grid(DomainSpec::half_disc(2.0), 0.1);
  write_mask_pgm(*g, (dir / "m.pgm").string());
  std::ostringstream cfg;
  cfg << "domain.kind = mask\ndomain.mask_pgm = " << (dir / "m.pgm").string() << "\ndomain.mask_h = 0.1\n"
      << "domain.origin_x = " << g->origin().x << "\ndomain.origin_y = " << g->origin().y << "\n";
  const DomainSpec d = domain_from_config(ConfigFile::parse(cfg.str()));
  const GridPtr gm = make_grid(d, 0.1);
  CHECK(gm->interior_count() == g->interior_count());
  fs::remove_all(dir);
}

TEST_CASE("run writes a complete, reproducible directory") {
  const fs::path dir = scratch("run");
  RunConfig c = RunConfig::from_file(ConfigFile::parse(kTiny, "tiny.cfg"));
  c.out_dir = (dir / "a").string();
  const RunReport r1 = run(c);
  for (const char* f : {"series.csv", "snapshots.csv", "virial.csv", "report.json", "config.cfg"})
    CHECK(fs::exists(dir / "a" / f));
  CHECK(r1.json.at("termination") == "horizon");
  // 0.7 Q cut at r = 3 is not localized: the wall flux is real, so only the localized virial checks may fail
  for (const auto& k : r1.checks)
    if (k.name != "virial_rel" && k.name != "boundary_flux_rel") CHECK_MESSAGE(k.pass, k.name);
  CHECK_FALSE(r1.all_pass());
  const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  CHECK(report.at("pass").get<bool>() == r1.all_pass());

  c.out_dir = (dir / "b").string();
  run(c);
  CHECK(slurp(dir / "a" / "series.csv") == slurp(dir / "b" / "series.csv"));
  CHECK(slurp(dir / "a" / "config.cfg") == slurp(dir / "b" / "config.cfg"));
  // the copied config reloads to the same run
  const RunConfig again = RunConfig::load((dir / "a" / "config.cfg").string());
  CHECK(again.h == c.h);
  CHECK(again.initial.amplitude == c.initial.amplitude);

  const TrajectoryFits tf = modulate_trajectory((dir / "a").string(), CenterMode::momentum, test::Q());
  CHECK(tf.fits.size() + tf.skipped.size() >= 2);
  fs::remove_all(dir);
}

TEST_CASE("checks") {
  CHECK(make_check("a", 1.0, "<=", 1.0).pass);
  CHECK_FALSE(make_check("a", 1.0, "<", 1.0).pass);
  CHECK(make_check("a", 2.0, ">", 1.0).pass);
  CHECK(make_check("a", 1.0, "==", 1.0).pass);
  CHECK_FALSE(make_check("a", std::nan(""), "<=", 1.0).pass);
  CHECK_FALSE(make_check("a", INFINITY, ">=", 1.0).pass);
  nlohmann::json j = make_check("a", 0.5, "<=", 1.0, "note");
  CHECK(j.at("note") == "note");
  CHECK(j.at("pass").get<bool>());
}

TEST_CASE("command line") {
  const fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "bad.cfg") << "domain.kind = disc\ndomain.radius = 3\ngrid.h = 1/16\ninitial.family = nope\n";
    std::ofstream(dir / "good.cfg") << kTiny;
  }
  CHECK(run_cli("simulate --config " + (dir / "bad.cfg").string() + " --out " + (dir / "o1").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "o1"));
  // one bad config in a batch aborts before any output
  CHECK(run_cli("simulate --config " + (dir / "good.cfg").string() + " --config " + (dir / "bad.cfg").string() +
                " --out " + (dir / "o2").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "o2"));
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("simulate") == 2);
  CHECK(run_cli("simulate --config " + (dir / "good.cfg").string() + " --out " + (dir / "o3").string()) == 0);
  CHECK(fs::exists(dir / "o3" / "report.json"));
  CHECK(run_cli("verify-identities --traj " + (dir / "o3").string()) == 0);
  CHECK(run_cli("modulate --traj " + (dir / "o3").string() + " --mode sideways") == 2);
  CHECK(run_cli("make-initial --family cutoff --T 0.5 --alpha 1 --inner 1 --outer 2 --domain disc --radius 3 --h 0.0625 --out " +
                (dir / "u0.bin").string()) == 0);
  CHECK(fs::exists(dir / "u0.bin"));
  CHECK(run_cli("make-initial --family cutoff --T 0.5 --alpha 1 --inner 1 --outer 5 --domain disc --radius 3 --h 0.0625 --out " +
                (dir / "u1.bin").string()) == 2);
  CHECK(run_cli("ground-state --out " + (dir / "q.txt").string()) == 0);
  CHECK(run_cli("ground-state --h 0.5") == 2);
  fs::remove_all(dir);
}

TEST_CASE("thread cap and parallel_for") {
  setenv("BLOWUPLAB_THREADS", "3", 1);
  CHECK(thread_cap() == 3u);
  setenv("BLOWUPLAB_THREADS", "zero", 1);
  CHECK(thread_cap() >= 1u);
  setenv("BLOWUPLAB_THREADS", "2", 1);

  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw Error(ErrorCode::io_error, "boom");
                  }),
                  Error);
  unsetenv("BLOWUPLAB_THREADS");
}

TEST_CASE("star property suite is deterministic") {
  const StarSuiteResult a = star_property_suite(5, 20), b = star_property_suite(5, 20);
  CHECK(a.cases == 20);
  CHECK(a.violations == 0);
  CHECK(a.worst_ratio == b.worst_ratio);
  CHECK(a.worst_ratio <= 1.0);
}

TEST_CASE("verify-all") {
  VerifyOptions o;
  const nlohmann::json r1 = verify_all(o);
  const auto failed = failed_checks(r1, false);
  CHECK(failed.empty());
  for (const auto& f : failed) MESSAGE("failed: " << f);
  // the coercivity margin is a documented known gap: only strict mode reports it
  const auto strict = failed_checks(r1, true);
  CHECK(strict == std::vector<std::string>{"spectrum.coercivity_constant"});

  SUBCASE("corrupted profile fails the ground-state suite") {
    const fs::path dir = scratch("profile");
    RadialProfile p = test::Q();
    for (std::size_t i = 0; i < p.q_values.size(); ++i)
      if (p.r_grid[i] > 1.0 && p.r_grid[i] < 1.2) p.q_values[i] *= 1.01;
    write_profile(p, (dir / "bad.txt").string());
    VerifyOptions b;
    b.profile_path = (dir / "bad.txt").string();
    const auto f = failed_checks(verify_all(b), false);
    CHECK(std::find(f.begin(), f.end(), "ground_state.ode_residual") != f.end());
    fs::remove_all(dir);
  }
  SUBCASE("refinement shrinks the residuals") {
    VerifyOptions o2;
    o2.refine = 2;
    const nlohmann::json r2 = verify_all(o2);
    CHECK(failed_checks(r2, false).empty());
    for (std::size_t i = 0; i < r1["suites"].size(); ++i) {
      const auto& s1 = r1["suites"][i];
      const auto& s2 = r2["suites"][i];
      if (!s1.contains("residual")) continue;
      const double a = s1["residual"].get<double>(), b = s2["residual"].get<double>();
      MESSAGE(s1["name"].get<std::string>() << ": " << a << " -> " << b);
      CHECK(a / b >= 3.0);
    }
  }
}
