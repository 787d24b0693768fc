#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fermibgk/config.hpp"
#include "fermibgk/diagnostics.hpp"
#include "fermibgk/linearized.hpp"
#include "fermibgk/log.hpp"
#include "fermibgk/solver.hpp"

namespace fermibgk {

// documented exit codes
constexpr int exit_ok = 0;
constexpr int exit_config = 2;        ///< malformed configuration
constexpr int exit_admissibility = 3; ///< a run left the branch 0 < B < beta(-ln 3)
constexpr int exit_setup = 4;         ///< inadmissible equilibrium or input moments
constexpr int exit_check_failed = 5;  ///< a verification reported failure

namespace detail {

    inline std::string fmt(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

    inline std::ofstream open_out(const std::filesystem::path& path)
    {
        std::ofstream out(path);
        if (!out)
            throw Error("cannot open output file " + path.string());
        return out;
    }

    inline void write_series_csv(const std::filesystem::path& path, const std::vector<DiagRow>& rows,
                                 const std::string& provenance)
    {
        std::ofstream out = open_out(path);
        out << "# " << provenance << "\n";
        out << "time,N_total,P1_total,P2_total,P3_total,E_total,H,f_l2,F_min,F_max,B_max_margin,"
               "ratio_N,ratio_P,ratio_E,ratio_B,"
               "fint_N_drift,fint_P1_drift,fint_P2_drift,fint_P3_drift,fint_E_drift,dxf_l2\n";
        for (const DiagRow& r : rows) {
            out << fmt(r.time) << ',' << fmt(r.N_total) << ',' << fmt(r.P1_total) << ','
                << fmt(r.P2_total) << ',' << fmt(r.P3_total) << ',' << fmt(r.E_total) << ','
                << fmt(r.H) << ',' << fmt(r.f_l2) << ',' << fmt(r.F_min) << ',' << fmt(r.F_max)
                << ',' << fmt(r.B_max_margin) << ',' << fmt(r.ratio_N) << ',' << fmt(r.ratio_P)
                << ',' << fmt(r.ratio_E) << ',' << fmt(r.ratio_B);
            for (double d : r.f_integral_drift)
                out << ',' << fmt(d);
            out << ',' << fmt(r.dxf_l2) << '\n';
        }
    }

    /// Velocity profile phi(p) for the initial perturbation.
    inline std::vector<double> perturbation_profile(const ScenarioConfig& cfg,
                                                    const GlobalEquilibrium& ge, const OrthoBasis& basis)
    {
        if (cfg.profile == PerturbProfile::gaussian) {
            std::vector<double> phi(ge.grid.size());
            const double inv_w2 = 1.0 / (cfg.gaussian_width * cfg.gaussian_width);
            for (std::size_t i = 0; i < ge.grid.size(); ++i) {
                const double dx = ge.grid.px[i] - cfg.gaussian_center[0];
                const double dy = ge.grid.py[i] - cfg.gaussian_center[1];
                const double dz = ge.grid.pz[i] - cfg.gaussian_center[2];
                phi[i] = std::exp(-(dx * dx + dy * dy + dz * dz) * inv_w2);
            }
            return phi;
        }
        const int idx = static_cast<int>(cfg.profile); // e1..e5 are 0..4
        return basis.e[idx];
    }

    inline std::string provenance_line(const ScenarioConfig& cfg, const std::string& command)
    {
        return "fermibgk " + command + " scenario=" + cfg.scenario + " seed=" + std::to_string(cfg.seed);
    }

} // namespace detail

/// (c, beta(c), beta'(c)) table; the beta column is verified strictly decreasing
/// whenever the whole range sits inside the monotone branch.
inline int cmd_betatable(const ScenarioConfig& cfg, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const double c_min = cfg.betatable_c_min;
    const double c_max = cfg.betatable_c_max;
    const int n = cfg.betatable_n;
    if (n < 1 || c_max < c_min)
        throw ConfigError("betatable: need n >= 1 and c_max >= c_min");

    const bool in_branch = c_min >= -std::log(3.0);
    if (!in_branch)
        log_info("betatable: range extends below -ln 3; monotonicity assertion skipped "
                 "(the paper leaves that region open)");

    std::ofstream out = detail::open_out(fs::path(out_dir) / "betatable.csv");
    out << "# " << detail::provenance_line(cfg, "betatable") << "\n";
    out << "c,beta,beta_prime\n";
    double prev = HUGE_VAL;
    bool monotone = true;
    for (int i = 0; i < n; ++i) {
        const double c = n == 1 ? c_min : c_min + (c_max - c_min) * i / (n - 1);
        const double b = beta(c);
        out << detail::fmt(c) << ',' << detail::fmt(b) << ',' << detail::fmt(beta_prime(c)) << '\n';
        if (b >= prev)
            monotone = false;
        prev = b;
    }
    if (in_branch && !monotone) {
        log_error("betatable: beta failed to decrease inside the branch");
        return exit_check_failed;
    }
    return exit_ok;
}

/// Moment inversion round trip: reports (a, b, c) and how well the equilibrium
/// moments reproduce the input.
inline int cmd_invert(const ScenarioConfig& cfg, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const Moments& m = cfg.invert_moments;
    const double B = moments_B(m);
    const FermiParams fp = invert_equilibrium(m);
    const Moments rt = equilibrium_moments(fp);
    double rel = std::abs(rt.N - m.N) / m.N + std::abs(rt.E - m.E) / m.E;
    for (int i = 0; i < 3; ++i)
        rel += std::abs(rt.P[i] - m.P[i]) / m.N;

    std::ofstream out = detail::open_out(fs::path(out_dir) / "invert.kv");
    out << "B=" << detail::fmt(B) << "\n"
        << "beta_max=" << detail::fmt(beta_branch().beta_at_lower) << "\n"
        << "a=" << detail::fmt(fp.a) << "\n"
        << "b1=" << detail::fmt(fp.b[0]) << "\nb2=" << detail::fmt(fp.b[1]) << "\nb3="
        << detail::fmt(fp.b[2]) << "\n"
        << "c=" << detail::fmt(fp.c) << "\n"
        << "roundtrip_rel_err=" << detail::fmt(rel) << "\n";
    std::printf("B = %.12g (branch endpoint %.12g)\n", B, beta_branch().beta_at_lower);
    std::printf("a = %.12g, b = (%.12g, %.12g, %.12g), c = %.12g\n", fp.a, fp.b[0], fp.b[1], fp.b[2], fp.c);
    std::printf("round-trip relative error = %.3g\n", rel);
    return rel <= 1e-8 ? exit_ok : exit_check_failed;
}

/// Time integration of a preset scenario; writes series.csv, snapshots and a
/// decay-fit summary.
inline int cmd_simulate(const ScenarioConfig& cfg, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    if (cfg.scenario != "relax0d" && cfg.scenario != "decay1x3v" && cfg.scenario != "picard")
        throw ConfigError("simulate drives {relax0d, decay1x3v, picard}; scenario '" + cfg.scenario
                          + "' has its own subcommand");
    fs::create_directories(out_dir);

    const GlobalEquilibrium ge = cfg.make_equilibrium();
    const SpatialGrid sg = cfg.make_spatial_grid();
    const OrthoBasis basis = build_basis(ge);
    const std::vector<double> phi = detail::perturbation_profile(cfg, ge, basis);
    const PerturbedInit init = init_perturbed_state(ge, sg, cfg.amplitude, phi);
    log_info("initial perturbation ||f0|| = " + detail::fmt(init.perturbation_l2));

    if (cfg.run.transport == TransportScheme::upwind) {
        const double cfl = ge.grid.p_max * cfg.run.dt / sg.dx;
        log_info("upwind CFL p_max dt/dx = " + detail::fmt(cfl));
        if (cfl > 1.0)
            log_error("CFL exceeds 1: the upwind bound 0 <= F <= 1 is not guaranteed");
    }

    if (cfg.scenario == "picard") {
        const PicardResult res = picard_iteration(cfg.run, init.state, sg, ge, cfg.picard_iterations);
        std::ofstream out = detail::open_out(fs::path(out_dir) / "picard.csv");
        out << "# " << detail::provenance_line(cfg, "picard") << "\n";
        out << "iterate,sup_diff\n";
        for (std::size_t i = 0; i < res.sup_diffs.size(); ++i)
            out << i + 1 << ',' << detail::fmt(res.sup_diffs[i]) << '\n';
        write_snapshot((fs::path(out_dir) / "final.snap").string(), res.final_state, sg, ge.grid);
        std::printf("picard: %d iterates, last sup-difference %.3g\n", cfg.picard_iterations,
                    res.sup_diffs.back());
        return exit_ok;
    }

    RunHooks hooks;
    hooks.on_snapshot = [&](const PhaseState& s, int step) {
        char name[64];
        std::snprintf(name, sizeof(name), "snapshot_%06d.snap", step);
        write_snapshot((fs::path(out_dir) / name).string(), s, sg, ge.grid);
    };
    hooks.on_abort = [&](const PhaseState& s) {
        write_snapshot((fs::path(out_dir) / "checkpoint_abort.snap").string(), s, sg, ge.grid);
        log_error("admissibility abort: checkpoint written to checkpoint_abort.snap");
    };

    RunResult res;
    try {
        res = run_simulation(cfg.run, init.state, sg, ge, hooks);
    } catch (const AdmissibilityError& e) {
        log_error(std::string("[") + e.what() + "] the run left 0 < B < beta(-ln 3) (Theorem 1.1's standing assumption)");
        return exit_admissibility;
    }

    detail::write_series_csv(fs::path(out_dir) / "series.csv", res.rows,
                             detail::provenance_line(cfg, "simulate"));
    write_snapshot((fs::path(out_dir) / "final.snap").string(), res.final_state, sg, ge.grid);

    // exponential-decay fit on the tail, skipping the first two relaxation times
    const Moments m0{ ge.N0, { 0.0, 0.0, 0.0 }, ge.E0 };
    const double nu0 = relaxation_frequency(m0, { ge.a0, { 0.0, 0.0, 0.0 }, ge.c0 }, cfg.run.tau);
    const double tau0 = 1.0 / nu0;
    std::vector<double> ts, ns;
    for (const DiagRow& r : res.rows) {
        ts.push_back(r.time);
        ns.push_back(r.f_l2);
    }
    std::ofstream summary = detail::open_out(fs::path(out_dir) / "summary.txt");
    summary << detail::provenance_line(cfg, "simulate") << "\n";
    summary << "steps=" << cfg.run.n_steps() << " dt=" << detail::fmt(cfg.run.dt)
            << " tau0=" << detail::fmt(tau0) << "\n";
    summary << "F_min=" << detail::fmt(res.run_min_F) << " F_max=" << detail::fmt(res.run_max_F) << "\n";

    bool h_monotone = true;
    for (std::size_t i = 1; i < res.rows.size(); ++i)
        if (res.rows[i].H > res.rows[i - 1].H + 1e-14 * std::abs(res.rows[i - 1].H))
            h_monotone = false;
    summary << "H_monotone=" << (h_monotone ? "true" : "false") << "\n";

    try {
        const DecayFit fit = decay_fit(ts, ns, 2.0 * tau0, cfg.run.t_end);
        summary << "decay_rate=" << detail::fmt(fit.rate) << "\nR2=" << detail::fmt(fit.r2)
                << "\nfit_window=[" << detail::fmt(fit.t_lo) << "," << detail::fmt(fit.t_hi) << "]\n";
        std::ofstream kv = detail::open_out(fs::path(out_dir) / "decayfit.kv");
        kv << "rate=" << detail::fmt(fit.rate) << "\nintercept=" << detail::fmt(fit.intercept)
           << "\nr2=" << detail::fmt(fit.r2) << "\nt_lo=" << detail::fmt(fit.t_lo)
           << "\nt_hi=" << detail::fmt(fit.t_hi) << "\nn_used=" << fit.n_used
           << "\nreached_floor=" << (fit.reached_floor ? "true" : "false") << "\n";
        std::printf("decay rate %.6g, R^2 = %.8g (window [%g, %g])\n", fit.rate, fit.r2, fit.t_lo,
                    fit.t_hi);
    } catch (const UsageError& e) {
        summary << "decay_fit=unavailable (" << e.what() << ")\n";
        log_info(std::string("decay fit skipped: ") + e.what());
    }
    std::printf("H monotone: %s; F in [%.3g, %.3g]\n", h_monotone ? "yes" : "NO", res.run_min_F,
                res.run_max_F);
    return exit_ok;
}

/// Runs the full battery of linearization identities and prints one verdict per line.
/// `corrupt_basis` is a fault-injection hook used by the tests.
inline int cmd_lincheck(const ScenarioConfig& cfg, const std::string& out_dir, bool corrupt_basis = false)
{
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const GlobalEquilibrium ge = cfg.make_equilibrium();
    if (ge.c0 < -std::log(3.0) + 1e-3)
        log_info("warning: c0 sits " + detail::fmt(ge.c0 + std::log(3.0))
                 + " above the branch endpoint; beta' is small and conditioning degrades");

    OrthoBasis basis = build_basis(ge);
    if (corrupt_basis)
        for (std::size_t i = 0; i < basis.e[4].size(); ++i)
            basis.e[4][i] += 0.05 * basis.e[0][i];

    std::mt19937_64 gen(cfg.seed);
    std::normal_distribution<double> dist;
    auto random_field = [&] {
        std::vector<double> f(ge.grid.size());
        for (double& v : f)
            v = dist(gen);
        return f;
    };

    struct Check {
        std::string name;
        double value;
        double bound;
        bool pass;
    };
    std::vector<Check> checks;
    auto add = [&](const std::string& name, double value, double bound) {
        checks.push_back({ name, value, bound, value <= bound });
    };

    add("orthonormality_closed_forms", basis.max_gram_defect_raw, 1e-10);

    double gram_defect = 0.0;
    for (int a = 0; a < 5; ++a)
        for (int b = a; b < 5; ++b)
            gram_defect = std::max(gram_defect,
                                   std::abs(detail::grid_dot(ge.grid, basis.e[a], basis.e[b])
                                            - (a == b ? 1.0 : 0.0)));
    add("orthonormality_polished", gram_defect, 1e-12);

    double coercivity_defect = 0.0;
    for (int trial = 0; trial < cfg.lincheck_samples; ++trial) {
        const std::vector<double> f = random_field();
        const std::vector<double> Lf = apply_L(basis, ge.grid, f);
        const std::vector<double> Pf = project_P(basis, ge.grid, f);
        std::vector<double> rest = f;
        for (std::size_t i = 0; i < f.size(); ++i)
            rest[i] -= Pf[i];
        const double rhs = detail::grid_dot(ge.grid, rest, rest);
        const double lhs = detail::grid_dot(ge.grid, Lf, f);
        coercivity_defect = std::max(coercivity_defect, std::abs(lhs + rhs) / rhs);
    }
    add("coercivity_identity", coercivity_defect, 1e-12);

    add("lemma_positivity", ge.positivity() > 0.0 ? 0.0 : 1.0, 0.5);

    const CoefficientDerivatives d = coefficient_derivatives(ge);
    auto c_of = [&](double N, double E) { return beta_inverse(moments_B({ N, {}, E })); };
    auto a_of = [&](double N, double E) {
        const double c = c_of(N, E);
        return std::pow(4.0 * M_PI * fd_integral(FdKind::plain, 2, c) / N, 2.0 / 3.0);
    };
    const double hN = 1e-6 * ge.N0, hE = 1e-6 * ge.E0;
    double deriv_defect = std::abs(d.dc_dP) + std::abs(d.da_dP);
    deriv_defect = std::max(deriv_defect,
                            std::abs((c_of(ge.N0 + hN, ge.E0) - c_of(ge.N0 - hN, ge.E0)) / (2 * hN) - d.dc_dN)
                                / std::abs(d.dc_dN));
    deriv_defect = std::max(deriv_defect,
                            std::abs((c_of(ge.N0, ge.E0 + hE) - c_of(ge.N0, ge.E0 - hE)) / (2 * hE) - d.dc_dE)
                                / std::abs(d.dc_dE));
    deriv_defect = std::max(deriv_defect,
                            std::abs((a_of(ge.N0 + hN, ge.E0) - a_of(ge.N0 - hN, ge.E0)) / (2 * hN) - d.da_dN)
                                / std::abs(d.da_dN));
    deriv_defect = std::max(deriv_defect,
                            std::abs((a_of(ge.N0, ge.E0 + hE) - a_of(ge.N0, ge.E0 - hE)) / (2 * hE) - d.da_dE)
                                / std::abs(d.da_dE));
    add("coefficient_derivatives", deriv_defect, 1e-5);

    // Gateaux fields against finite differences of the full pipeline
    double gateaux_defect = 0.0;
    {
        const std::vector<double> dN = equilibrium_gateaux(ge, GateauxDirection::N);
        const std::vector<double> dE = equilibrium_gateaux(ge, GateauxDirection::E);
        const std::vector<double> dP1 = equilibrium_gateaux(ge, GateauxDirection::P1);
        auto field_of = [&](const Moments& m) {
            const FermiParams fp = invert_equilibrium(m);
            std::vector<double> out(ge.grid.size());
            for (std::size_t i = 0; i < ge.grid.size(); ++i)
                out[i] = fermi_dirac_eval(fp, { ge.grid.px[i], ge.grid.py[i], ge.grid.pz[i] });
            return out;
        };
        const std::vector<double> fN_p = field_of({ ge.N0 + hN, {}, ge.E0 });
        const std::vector<double> fN_m = field_of({ ge.N0 - hN, {}, ge.E0 });
        const std::vector<double> fE_p = field_of({ ge.N0, {}, ge.E0 + hE });
        const std::vector<double> fE_m = field_of({ ge.N0, {}, ge.E0 - hE });
        const std::vector<double> fP_p = field_of({ ge.N0, { hN, 0.0, 0.0 }, ge.E0 });
        const std::vector<double> fP_m = field_of({ ge.N0, { -hN, 0.0, 0.0 }, ge.E0 });
        double sN = 0.0, sE = 0.0, sP = 0.0;
        for (std::size_t i = 0; i < ge.grid.size(); ++i) {
            sN = std::max(sN, std::abs(dN[i]));
            sE = std::max(sE, std::abs(dE[i]));
            sP = std::max(sP, std::abs(dP1[i]));
        }
        for (std::size_t i = 0; i < ge.grid.size(); ++i) {
            gateaux_defect = std::max(gateaux_defect,
                                      std::abs((fN_p[i] - fN_m[i]) / (2 * hN) - dN[i]) / sN);
            gateaux_defect = std::max(gateaux_defect,
                                      std::abs((fE_p[i] - fE_m[i]) / (2 * hE) - dE[i]) / sE);
            gateaux_defect = std::max(gateaux_defect,
                                      std::abs((fP_p[i] - fP_m[i]) / (2 * hN) - dP1[i]) / sP);
        }
    }
    add("gateaux_derivatives", gateaux_defect, 1e-5);

    // second-order remainder of the linearization
    double order_defect = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> g = random_field();
        const double nrm = std::sqrt(detail::grid_dot(ge.grid, g, g));
        for (double& v : g)
            v /= nrm;
        double lo = HUGE_VAL, hi = 0.0;
        for (double eps : { 1e-2, 1e-3, 1e-4 }) {
            const double ratio = linearization_residual(ge, basis, g, eps) / (eps * eps);
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        order_defect = std::max(order_defect, hi / lo);
    }
    checks.push_back({ "linearization_order", order_defect, 2.0, order_defect <= 2.0 });

    bool all_pass = true;
    std::ofstream report = detail::open_out(fs::path(out_dir) / "lincheck.txt");
    for (const Check& c : checks) {
        const char* verdict = c.pass ? "ok  " : "FAIL";
        std::printf("%s %-32s %.3e (bound %.1e)\n", verdict, c.name.c_str(), c.value, c.bound);
        report << (c.pass ? "ok " : "FAIL ") << c.name << " " << detail::fmt(c.value) << " bound "
               << detail::fmt(c.bound) << "\n";
        all_pass = all_pass && c.pass;
    }
    return all_pass ? exit_ok : exit_check_failed;
}

inline int cmd_picard(ScenarioConfig cfg, const std::string& out_dir)
{
    cfg.scenario = "picard";
    return cmd_simulate(cfg, out_dir);
}

} // namespace fermibgk
