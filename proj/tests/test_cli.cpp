#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fermibgk/cli.hpp"

using namespace fermibgk;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TomlTable parse_string(const std::string& text)
{
    std::stringstream ss(text);
    return parse_toml(ss);
}

} // namespace

TEST_CASE("toml subset parser")
{
    const TomlTable t = parse_string(R"(
# full-line comment
[run]
scenario = "relax0d"   # trailing comment
dt = 0.5
threads = 2
snapshot_every = 0

[tau]
poly = [1.0, 0.5, 2]
C4 = 1.0

[perturbation]
profile = "gaussian"
)");
    CHECK(std::get<std::string>(t.at("run").at("scenario")) == "relax0d");
    CHECK(std::get<double>(t.at("run").at("dt")) == 0.5);
    CHECK(std::get<std::vector<double>>(t.at("tau").at("poly")) == std::vector<double>{ 1.0, 0.5, 2.0 });

    CHECK_THROWS_AS(parse_string("key_without_section = \n"), ConfigError);
    CHECK_THROWS_AS(parse_string("[run]\ndt 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_string("[run]\ndt = 0.5\ndt = 0.7\n"), ConfigError);
    CHECK_THROWS_AS(parse_string("[run]\ndt = \"x\" y\n"), ConfigError);
    CHECK_THROWS_AS(parse_string("[run\ndt = 1\n"), ConfigError);
}

TEST_CASE("scenario configuration validates keys and types")
{
    CHECK_THROWS_AS(scenario_from_table(parse_string("[run]\nscenario = \"warp\"\n")), ConfigError);
    CHECK_THROWS_AS(scenario_from_table(parse_string("[run]\nscenario = \"relax0d\"\nwarp = 1\n")),
                    ConfigError);
    CHECK_THROWS_AS(scenario_from_table(parse_string("[nosuch]\nx = 1\n")), ConfigError);
    CHECK_THROWS_AS(
        scenario_from_table(parse_string("[run]\nscenario = \"relax0d\"\ndt = \"fast\"\n")),
        ConfigError);
    CHECK_THROWS_AS(
        scenario_from_table(parse_string("[run]\nscenario = \"relax0d\"\nthreads = 1.5\n")),
        ConfigError);
    CHECK_THROWS_AS(scenario_from_table(
                        parse_string("[run]\nscenario = \"relax0d\"\n[equilibrium]\na0 = 1\nN0 = 2\n")),
                    ConfigError);
    // the tau constraint sum C_i != 0 is enforced at configuration time
    CHECK_THROWS_AS(scenario_from_table(parse_string(R"(
[run]
scenario = "relax0d"
[tau]
C4 = 0.0
)")),
                    ConfigError);

    const ScenarioConfig cfg = scenario_from_table(parse_string(R"(
[run]
scenario = "decay1x3v"
dt = 0.01
[grid]
n_x = 4
n_p = 12
)"));
    CHECK(cfg.scenario == "decay1x3v");
    CHECK(cfg.run.dt == 0.01);
    CHECK(cfg.n_x == 4);
    CHECK(cfg.n_p == 12);
    CHECK(cfg.run.t_end == 10.0); // preset default survives partial override
}

TEST_CASE("betatable emits sorted monotone rows")
{
    const fs::path dir = fresh_dir("fbgk_betatable");
    ScenarioConfig cfg = detail::scenario_preset("betatable");
    cfg.betatable_c_min = -std::log(3.0);
    cfg.betatable_c_max = 10.0;
    cfg.betatable_n = 100;
    REQUIRE(cmd_betatable(cfg, dir.string()) == exit_ok);

    std::ifstream in(dir / "betatable.csv");
    std::string line;
    std::getline(in, line); // provenance
    std::getline(in, line);
    CHECK(line == "c,beta,beta_prime");
    int rows = 0;
    double prev_c = -HUGE_VAL, prev_beta = HUGE_VAL;
    while (std::getline(in, line)) {
        double c, b, bp;
        REQUIRE(std::sscanf(line.c_str(), "%lg,%lg,%lg", &c, &b, &bp) == 3);
        CHECK(c > prev_c);
        CHECK(b < prev_beta);
        CHECK(bp < 0.0);
        prev_c = c;
        prev_beta = b;
        ++rows;
    }
    CHECK(rows == 100);
}

TEST_CASE("betatable single row and out-of-branch policy")
{
    const fs::path dir = fresh_dir("fbgk_betatable1");
    ScenarioConfig cfg = detail::scenario_preset("betatable");
    cfg.betatable_c_min = 0.0;
    cfg.betatable_c_max = 0.0;
    cfg.betatable_n = 1;
    REQUIRE(cmd_betatable(cfg, dir.string()) == exit_ok);
    const std::string body = slurp(dir / "betatable.csv");
    std::stringstream ss(body);
    std::string l0, l1, l2;
    std::getline(ss, l0);
    std::getline(ss, l1);
    std::getline(ss, l2);
    double c, b, bp;
    REQUIRE(std::sscanf(l2.c_str(), "%lg,%lg,%lg", &c, &b, &bp) == 3);
    CHECK(b == Approx(beta(0.0)).epsilon(1e-15));

    // rows below -ln 3 are emitted, the monotone assertion is skipped
    cfg.betatable_c_min = -2.0;
    cfg.betatable_c_max = 10.0;
    cfg.betatable_n = 50;
    CHECK(cmd_betatable(cfg, dir.string()) == exit_ok);
}

TEST_CASE("invert command round trips and rejects inadmissible moments")
{
    const fs::path dir = fresh_dir("fbgk_invert");
    ScenarioConfig cfg = detail::scenario_preset("invert-roundtrip");
    cfg.invert_moments = { 1.0, { 0.1, 0.0, 0.0 }, 1.2 };
    CHECK(cmd_invert(cfg, dir.string()) == exit_ok);
    const std::string kv = slurp(dir / "invert.kv");
    CHECK(kv.find("roundtrip_rel_err=") != std::string::npos);

    cfg.invert_moments = { 1.0, { 0.0, 0.0, 0.0 }, 0.1 }; // B far past the endpoint
    CHECK_THROWS_AS(cmd_invert(cfg, dir.string()), OutOfBranchError);
}

TEST_CASE("lincheck passes on defaults and fails on a corrupted basis")
{
    const fs::path dir = fresh_dir("fbgk_lincheck");
    ScenarioConfig cfg = detail::scenario_preset("lincheck");
    cfg.n_p = 48; // keep the unit suite quick; acceptance runs the full preset
    cfg.lincheck_samples = 20;
    CHECK(cmd_lincheck(cfg, dir.string()) == exit_ok);
    const std::string report = slurp(dir / "lincheck.txt");
    CHECK(report.find("FAIL") == std::string::npos);

    CHECK(cmd_lincheck(cfg, dir.string(), /*corrupt_basis=*/true) == exit_check_failed);
    const std::string broken = slurp(dir / "lincheck.txt");
    CHECK(broken.find("FAIL") != std::string::npos);
}

TEST_CASE("simulate relax0d: H column never increases, ODE limit reached")
{
    const fs::path dir = fresh_dir("fbgk_relax0d");
    ScenarioConfig cfg = scenario_from_table(parse_toml_file("configs/relax0d.toml"));
    cfg.n_p = 16; // quick variant of the preset
    cfg.adequacy_tol = 1e-3;
    REQUIRE(cmd_simulate(cfg, dir.string()) == exit_ok);

    std::ifstream in(dir / "series.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line); // header
    double prev_H = HUGE_VAL;
    int rows = 0;
    while (std::getline(in, line)) {
        std::array<double, 21> v{};
        REQUIRE(std::sscanf(line.c_str(),
                            "%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg",
                            &v[0], &v[1], &v[2], &v[3], &v[4], &v[5], &v[6], &v[7], &v[8], &v[9],
                            &v[10], &v[11], &v[12], &v[13], &v[14], &v[15], &v[16], &v[17], &v[18],
                            &v[19], &v[20])
                == 21);
        CHECK(v[6] <= prev_H + 1e-14 * std::abs(prev_H));
        CHECK(v[8] >= 0.0); // F_min
        CHECK(v[9] <= 1.0); // F_max
        prev_H = v[6];
        ++rows;
    }
    CHECK(rows == 81);
    CHECK(slurp(dir / "summary.txt").find("H_monotone=true") != std::string::npos);
}

TEST_CASE("simulate output is bit-identical across reruns and thread counts")
{
    ScenarioConfig cfg = scenario_from_table(parse_toml_file("configs/decay1x3v.toml"));
    cfg.n_x = 4;
    cfg.n_p = 12;
    cfg.adequacy_tol = 1e-2;
    cfg.run.t_end = 0.5;

    const fs::path d1 = fresh_dir("fbgk_det1");
    const fs::path d2 = fresh_dir("fbgk_det2");
    REQUIRE(cmd_simulate(cfg, d1.string()) == exit_ok);
    cfg.run.threads = 2;
    REQUIRE(cmd_simulate(cfg, d2.string()) == exit_ok);
    CHECK(slurp(d1 / "series.csv") == slurp(d2 / "series.csv"));
}

TEST_CASE("simulate aborts with the admissibility exit code and a checkpoint")
{
    // an equilibrium hugging the branch endpoint: a tiny density-heavy cosine
    // perturbation pushes max_x B over beta(-ln 3) immediately
    const double bmax = beta_branch().beta_at_lower;
    ScenarioConfig cfg = detail::scenario_preset("relax0d");
    cfg.n_x = 8;
    cfg.n_p = 16;
    cfg.adequacy_tol = 1e-2;
    cfg.a0 = 1.0;
    cfg.c0 = beta_inverse(bmax - 1e-7);
    cfg.profile = PerturbProfile::e1;
    cfg.amplitude = 1e-3;
    cfg.scenario = "decay1x3v";
    cfg.run.dt = 0.05;
    cfg.run.t_end = 1.0;

    const fs::path dir = fresh_dir("fbgk_abort");
    CHECK(cmd_simulate(cfg, dir.string()) == exit_admissibility);
    CHECK(fs::exists(dir / "checkpoint_abort.snap"));
}

TEST_CASE("picard command reports contracting iterates")
{
    const fs::path dir = fresh_dir("fbgk_picard");
    ScenarioConfig cfg = scenario_from_table(parse_toml_file("configs/picard.toml"));
    cfg.n_x = 4;
    cfg.n_p = 12;
    cfg.adequacy_tol = 1e-2;
    cfg.picard_iterations = 6;
    REQUIRE(cmd_picard(cfg, dir.string()) == exit_ok);

    std::ifstream in(dir / "picard.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    double prev = HUGE_VAL;
    int rows = 0;
    while (std::getline(in, line)) {
        int it;
        double diff;
        REQUIRE(std::sscanf(line.c_str(), "%d,%lg", &it, &diff) == 2);
        CHECK(diff < prev);
        prev = diff;
        ++rows;
    }
    CHECK(rows == 6);
}
