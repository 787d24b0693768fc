#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fermibgk/diagnostics.hpp"
#include "fermibgk/phasegrid.hpp"

namespace fermibgk {

enum class TransportScheme { semi_lagrangian, upwind };
enum class InversionMode { continuous, discrete };

struct RunConfig {
    double dt = 0.01;
    double t_end = 1.0;
    TauCoefficients tau = TauCoefficients::constant_unit();
    TransportScheme transport = TransportScheme::semi_lagrangian;
    InversionMode inversion = InversionMode::discrete;
    int diag_every = 1;     ///< diagnostics row cadence in steps
    int snapshot_every = 0; ///< binary snapshot cadence in steps, 0 = never
    int threads = 1;

    int n_steps() const { return std::max(1, static_cast<int>(std::llround(t_end / dt))); }
    void validate() const
    {
        if (!(dt > 0.0) || !(t_end > 0.0))
            throw ConfigError("RunConfig: dt and t_end must be positive");
        tau.validate();
    }
};

namespace detail {

    /// Shared relaxation kernel: updates the cells of `s` using equilibrium and
    /// frequency computed from `source` (the state itself for the direct scheme,
    /// the previous iterate for the Picard mode).
    inline void relax_cells(PhaseState& s, const PhaseState& source, const VelocityGrid& g,
                            double dt, const TauCoefficients& tau, InversionMode mode, int threads)
    {
        const double beta_max = beta_branch().beta_at_lower;
        parallel_for(static_cast<std::size_t>(s.n_x), threads, [&](std::size_t cb, std::size_t ce) {
            for (std::size_t ix = cb; ix < ce; ++ix) {
                const Moments mom = cell_moments(source.cell(static_cast<int>(ix)), g);
                double B;
                try {
                    B = moments_B(mom);
                } catch (const DegenerateMomentsError&) {
                    throw AdmissibilityError(static_cast<int>(ix), std::nan(""), beta_max);
                }
                if (!(B > 0.0) || !(B < beta_max))
                    throw AdmissibilityError(static_cast<int>(ix), B, beta_max);

                const FermiParams fp = mode == InversionMode::discrete
                    ? discrete_invert_equilibrium(mom, g)
                    : invert_equilibrium(mom);
                const double lambda = dt * relaxation_frequency(mom, fp, tau);
                const double inv = 1.0 / (1.0 + lambda);
                double* F = s.cell(static_cast<int>(ix));
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double dx = g.px[i] - fp.b[0];
                    const double dy = g.py[i] - fp.b[1];
                    const double dz = g.pz[i] - fp.b[2];
                    const double feq = fermi_of_exponent(fp.a * (dx * dx + dy * dy + dz * dz) + fp.c);
                    F[i] = (F[i] + lambda * feq) * inv;
                }
            }
        });
    }

} // namespace detail

/// Implicit relaxation update F <- (F + (dt/tau) Feq) / (1 + dt/tau) per cell.
/// The cancellation property makes Feq and tau functions of the pre-step moments
/// only, so no inner iteration is needed; the update is a convex combination of
/// F and Feq and therefore keeps 0 <= F <= 1 and, in discrete mode, the cell
/// moments, exactly.
inline void relaxation_step(PhaseState& s, const VelocityGrid& g, double dt,
                            const TauCoefficients& tau, InversionMode mode, int threads = 1)
{
    detail::relax_cells(s, s, g, dt, tau, mode, threads);
}

/// Free streaming on the periodic x-axis at speed p1 per velocity node.
/// semi-Lagrangian: linear interpolation at the departure point (max-principle
/// preserving, exact on integer cell shifts). upwind: conservative flux form,
/// total sum per velocity node preserved to roundoff; needs |p1| dt / dx <= 1
/// for the maximum principle.
inline void transport_step(PhaseState& s, const SpatialGrid& sg, const VelocityGrid& g, double dt,
                           TransportScheme scheme, int threads = 1)
{
    if (sg.n_x < 2)
        return; // spatially homogeneous: nothing to stream
    const int n_x = sg.n_x;
    const std::size_t nn = g.size();
    detail::parallel_for(nn, threads, [&](std::size_t pb, std::size_t pe) {
        std::vector<double> row(n_x);
        for (std::size_t ip = pb; ip < pe; ++ip) {
            const double v = g.px[ip];
            if (v == 0.0)
                continue;
            for (int j = 0; j < n_x; ++j)
                row[j] = s.F[static_cast<std::size_t>(j) * nn + ip];
            if (scheme == TransportScheme::semi_lagrangian) {
                const double shift = v * dt / sg.dx; // departure offset in cell units
                for (int j = 0; j < n_x; ++j) {
                    const double xd = j - shift;
                    double jf = std::floor(xd);
                    const double frac = xd - jf;
                    long j0 = static_cast<long>(jf) % n_x;
                    if (j0 < 0)
                        j0 += n_x;
                    const long j1 = (j0 + 1) % n_x;
                    // lerp written so uniform data passes through bit-exactly
                    s.F[static_cast<std::size_t>(j) * nn + ip] = row[j0] + frac * (row[j1] - row[j0]);
                }
            } else {
                const double nu = std::abs(v) * dt / sg.dx;
                if (v > 0.0) {
                    for (int j = 0; j < n_x; ++j) {
                        const int jm = (j + n_x - 1) % n_x;
                        s.F[static_cast<std::size_t>(j) * nn + ip] = row[j] - nu * (row[j] - row[jm]);
                    }
                } else {
                    for (int j = 0; j < n_x; ++j) {
                        const int jp = (j + 1) % n_x;
                        s.F[static_cast<std::size_t>(j) * nn + ip] = row[j] - nu * (row[j] - row[jp]);
                    }
                }
            }
        }
    });
}

/// One diagnostics row of the time series the CSV output mirrors.
struct DiagRow {
    double time = 0.0;
    double N_total = 0.0, P1_total = 0.0, P2_total = 0.0, P3_total = 0.0, E_total = 0.0;
    double H = 0.0;
    double f_l2 = 0.0;
    double F_min = 0.0, F_max = 0.0;
    double B_max_margin = 0.0;
    double ratio_N = 0.0, ratio_P = 0.0, ratio_E = 0.0, ratio_B = 0.0;
    std::array<double, 5> f_integral_drift{};
    double dxf_l2 = 0.0;
};

struct RunHooks {
    std::function<void(const PhaseState&, int step)> on_snapshot;
    std::function<void(const PhaseState&)> on_abort; ///< called with the checkpoint state
};

struct RunResult {
    std::vector<DiagRow> rows;
    PhaseState final_state;
    double cfl = 0.0;        ///< p_max dt / dx (meaningful for the upwind scheme)
    double run_min_F = 1.0;  ///< minimum over every step, not only diagnostic rows
    double run_max_F = 0.0;
    MonitorRecord baseline;  ///< monitor at t = 0 (drift reference)
};

namespace detail {

    inline DiagRow make_diag_row(const PhaseState& s, const GlobalEquilibrium& ge,
                                 const SpatialGrid& sg, const MonitorRecord* baseline)
    {
        const MonitorRecord rec = smallness_monitor(s, ge, sg, baseline);
        const std::vector<Moments> mom = compute_moments(s, ge.grid);
        DiagRow row;
        row.time = s.time;
        KahanSum n, p1, p2, p3, e;
        for (const Moments& m : mom) {
            n.add(m.N);
            p1.add(m.P[0]);
            p2.add(m.P[1]);
            p3.add(m.P[2]);
            e.add(m.E);
        }
        row.N_total = sg.dx * n.value();
        row.P1_total = sg.dx * p1.value();
        row.P2_total = sg.dx * p2.value();
        row.P3_total = sg.dx * p3.value();
        row.E_total = sg.dx * e.value();
        row.H = h_functional(s, sg, ge.grid);
        row.f_l2 = rec.f_l2;
        const auto [mn, mx] = std::minmax_element(s.F.begin(), s.F.end());
        row.F_min = *mn;
        row.F_max = *mx;
        row.B_max_margin = rec.margin;
        row.ratio_N = rec.ratio_N;
        row.ratio_P = rec.ratio_P;
        row.ratio_E = rec.ratio_E;
        row.ratio_B = rec.ratio_B;
        row.f_integral_drift = rec.f_integral_drift;
        const PerturbationField pf = perturbation_field(s, ge, sg);
        row.dxf_l2 = perturbation_dx_l2(pf, sg, ge.grid);
        return row;
    }

} // namespace detail

/// Strang-split time integration: half transport, full relaxation, half transport.
/// Aborts with AdmissibilityError if any cell leaves the branch; the hook receives
/// the state as a checkpoint before the error propagates.
inline RunResult run_simulation(const RunConfig& cfg, PhaseState s0, const SpatialGrid& sg,
                                const GlobalEquilibrium& ge, const RunHooks& hooks = {})
{
    cfg.validate();
    const VelocityGrid& g = ge.grid;
    RunResult result;
    result.cfl = g.p_max * cfg.dt / sg.dx;
    result.baseline = smallness_monitor(s0, ge, sg);
    result.rows.push_back(detail::make_diag_row(s0, ge, sg, &result.baseline));
    result.run_min_F = result.rows.front().F_min;
    result.run_max_F = result.rows.front().F_max;

    PhaseState s = std::move(s0);
    const int n_steps = cfg.n_steps();
    try {
        for (int step = 1; step <= n_steps; ++step) {
            transport_step(s, sg, g, 0.5 * cfg.dt, cfg.transport, cfg.threads);
            relaxation_step(s, g, cfg.dt, cfg.tau, cfg.inversion, cfg.threads);
            transport_step(s, sg, g, 0.5 * cfg.dt, cfg.transport, cfg.threads);
            s.time += cfg.dt;

            const auto [mn, mx] = std::minmax_element(s.F.begin(), s.F.end());
            result.run_min_F = std::min(result.run_min_F, *mn);
            result.run_max_F = std::max(result.run_max_F, *mx);

            if (step % cfg.diag_every == 0 || step == n_steps)
                result.rows.push_back(detail::make_diag_row(s, ge, sg, &result.baseline));
            if (cfg.snapshot_every > 0 && hooks.on_snapshot
                && (step % cfg.snapshot_every == 0 || step == n_steps))
                hooks.on_snapshot(s, step);
        }
    } catch (const AdmissibilityError&) {
        if (hooks.on_abort)
            hooks.on_abort(s);
        throw;
    }
    result.final_state = std::move(s);
    return result;
}

struct PicardResult {
    std::vector<double> sup_diffs; ///< sup_t ||F^{n+1} - F^n|| per iterate, weighted L2
    PhaseState final_state;        ///< end state of the last iterate
};

/// The local-existence iteration: F^{n+1} solves the linear equation
///   dF^{n+1}/dt + p . grad_x F^{n+1} = (1/tau(F^n)) (Feq(F^n) - F^{n+1})
/// over [0, t_end], discretized with the same Strang splitting but with (Feq, tau)
/// frozen from iterate n within each step. F^0(t) = F_0.
inline PicardResult picard_iteration(const RunConfig& cfg, const PhaseState& s0, const SpatialGrid& sg,
                                     const GlobalEquilibrium& ge, int n_iter)
{
    cfg.validate();
    if (n_iter < 1)
        throw ConfigError("picard_iteration: need n_iter >= 1");
    const VelocityGrid& g = ge.grid;
    const int n_steps = cfg.n_steps();

    // mid-states (post half-transport, pre-relaxation) of the previous iterate; the
    // zeroth iterate is the constant-in-time trajectory F_0
    std::vector<PhaseState> prev_mid(n_steps, s0);
    std::vector<PhaseState> cur_mid(n_steps);
    PicardResult result;

    auto weighted_l2_diff = [&](const PhaseState& a, const PhaseState& b) {
        detail::KahanSum s;
        for (std::size_t i = 0; i < a.F.size(); ++i) {
            const double d = a.F[i] - b.F[i];
            s.add(d * d);
        }
        return std::sqrt(sg.dx * g.weight * s.value());
    };

    for (int iter = 0; iter < n_iter; ++iter) {
        PhaseState s = s0;
        double sup_diff = 0.0;
        for (int step = 0; step < n_steps; ++step) {
            transport_step(s, sg, g, 0.5 * cfg.dt, cfg.transport, cfg.threads);
            sup_diff = std::max(sup_diff, weighted_l2_diff(s, prev_mid[step]));
            cur_mid[step] = s;
            detail::relax_cells(s, prev_mid[step], g, cfg.dt, cfg.tau, cfg.inversion, cfg.threads);
            transport_step(s, sg, g, 0.5 * cfg.dt, cfg.transport, cfg.threads);
            s.time += cfg.dt;
        }
        result.sup_diffs.push_back(sup_diff);
        std::swap(prev_mid, cur_mid);
        if (iter == n_iter - 1)
            result.final_state = std::move(s);
    }
    return result;
}

} // namespace fermibgk
