// fermibgk: discrete-velocity solver and verification lab for the fermionic
// quantum BGK equation. Subcommands: betatable, invert, simulate, lincheck, picard.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "fermibgk/cli.hpp"

using namespace fermibgk;

int main(int argc, char** argv)
{
    CLI::App app{ "fermionic quantum BGK relaxation solver and verification lab" };
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    int threads = 0;
    long long seed = -1;
    app.add_option("--config", config_path, "TOML configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (overrides config)");
    app.add_option("--seed", seed, "random seed (overrides config)");

    auto* betatable = app.add_subcommand("betatable", "tabulate beta(c) and beta'(c)");
    double c_min = -std::log(3.0), c_max = 10.0;
    int n_rows = 100;
    betatable->add_option("--c-min", c_min, "lower end of the c range");
    betatable->add_option("--c-max", c_max, "upper end of the c range");
    betatable->add_option("--n", n_rows, "number of rows");

    auto* invert = app.add_subcommand("invert", "invert (N, P, E) into Fermi-Dirac coefficients");
    double N = 1.0, E = 1.0;
    std::vector<double> P{ 0.0, 0.0, 0.0 };
    invert->add_option("--N", N, "number density");
    invert->add_option("--E", E, "energy density");
    invert->add_option("--P", P, "momentum density (three components)")->expected(3);

    auto* simulate = app.add_subcommand("simulate", "time-integrate a scenario");
    std::string scenario_flag;
    simulate->add_option("--scenario", scenario_flag, "relax0d | decay1x3v | picard");

    auto* lincheck = app.add_subcommand("lincheck", "verify the linearization identities");
    bool corrupt_basis = false;
    lincheck->add_flag("--corrupt-basis", corrupt_basis, "fault-injection hook for testing")
        ->group(""); // hidden

    auto* picard = app.add_subcommand("picard", "run the iteration-scheme mode");

    CLI11_PARSE(app, argc, argv);

    try {
        TomlTable table;
        if (!config_path.empty())
            table = parse_toml_file(config_path);

        std::string override_id;
        if (betatable->parsed())
            override_id = "betatable";
        else if (invert->parsed())
            override_id = "invert-roundtrip";
        else if (lincheck->parsed())
            override_id = "lincheck";
        else if (picard->parsed())
            override_id = "picard";
        else if (!scenario_flag.empty())
            override_id = scenario_flag;

        ScenarioConfig cfg = scenario_from_table(table, override_id);
        if (threads > 0)
            cfg.run.threads = threads;
        if (seed >= 0)
            cfg.seed = static_cast<unsigned long long>(seed);

        if (betatable->parsed()) {
            if (betatable->count("--c-min"))
                cfg.betatable_c_min = c_min;
            if (betatable->count("--c-max"))
                cfg.betatable_c_max = c_max;
            if (betatable->count("--n"))
                cfg.betatable_n = n_rows;
            return cmd_betatable(cfg, out_dir);
        }
        if (invert->parsed()) {
            if (invert->count("--N"))
                cfg.invert_moments.N = N;
            if (invert->count("--E"))
                cfg.invert_moments.E = E;
            if (invert->count("--P"))
                cfg.invert_moments.P = { P[0], P[1], P[2] };
            return cmd_invert(cfg, out_dir);
        }
        if (lincheck->parsed())
            return cmd_lincheck(cfg, out_dir, corrupt_basis);
        if (picard->parsed())
            return cmd_picard(cfg, out_dir);
        return cmd_simulate(cfg, out_dir);
    } catch (const ConfigError& e) {
        log_error(std::string("configuration: ") + e.what());
        return exit_config;
    } catch (const AdmissibilityError& e) {
        log_error(std::string("admissibility: ") + e.what()
                  + " (the model requires 0 < B < beta(-ln 3))");
        return exit_admissibility;
    } catch (const OutOfBranchError& e) {
        log_error(std::string("setup: ") + e.what());
        return exit_setup;
    } catch (const PositivityError& e) {
        log_error(std::string("setup: ") + e.what());
        return exit_setup;
    } catch (const DegenerateMomentsError& e) {
        log_error(std::string("setup: ") + e.what());
        return exit_setup;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
}
