#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "fermibgk/equilibrium.hpp"
#include "fermibgk/velocity_grid.hpp"

namespace fermibgk {

/// One periodic spatial axis of length `length` with n_x uniform cells.
/// Velocity space stays fully 3-D; the `dim` field exists for generality but
/// only dim = 1 is implemented.
struct SpatialGrid {
    int dim = 1;
    double length = 1.0;
    int n_x = 1;
    double dx = 1.0;
    std::vector<double> centers;

    static SpatialGrid make(double length, int n_x, int dim = 1)
    {
        if (dim != 1)
            throw UsageError("SpatialGrid: only dim = 1 is implemented");
        if (!(length > 0.0) || n_x < 1)
            throw UsageError("SpatialGrid: need length > 0 and n_x >= 1");
        SpatialGrid g;
        g.dim = dim;
        g.length = length;
        g.n_x = n_x;
        g.dx = length / n_x;
        g.centers.resize(n_x);
        for (int i = 0; i < n_x; ++i)
            g.centers[i] = (i + 0.5) * g.dx;
        return g;
    }
};

/// Distribution values F(x, p) on the product grid, fermionic bound 0 <= F <= 1.
/// Layout: F[ix * n_nodes + ip], velocity index fastest.
struct PhaseState {
    std::vector<double> F;
    double time = 0.0;
    int n_x = 1;

    std::size_t nodes_per_cell() const { return n_x > 0 ? F.size() / n_x : 0; }
    double* cell(int ix) { return F.data() + static_cast<std::size_t>(ix) * nodes_per_cell(); }
    const double* cell(int ix) const { return F.data() + static_cast<std::size_t>(ix) * nodes_per_cell(); }
};

namespace detail {

    /// Quadrature moments of one cell's node values.
    inline Moments cell_moments(const double* F, const VelocityGrid& g)
    {
        KahanSum sN, sPx, sPy, sPz, sE;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = F[i];
            sN.add(v);
            sPx.add(v * g.px[i]);
            sPy.add(v * g.py[i]);
            sPz.add(v * g.pz[i]);
            sE.add(v * g.p2[i]);
        }
        Moments m;
        m.N = g.weight * sN.value();
        m.P = { g.weight * sPx.value(), g.weight * sPy.value(), g.weight * sPz.value() };
        m.E = g.weight * sE.value();
        return m;
    }

} // namespace detail

/// Per-cell quadrature moments of the state.
inline std::vector<Moments> compute_moments(const PhaseState& s, const VelocityGrid& g)
{
    std::vector<Moments> out(s.n_x);
    for (int ix = 0; ix < s.n_x; ++ix)
        out[ix] = detail::cell_moments(s.cell(ix), g);
    return out;
}

/// The global Fermi-Dirac m(p) = 1/(e^{a0 |p|^2 + c0} + 1) tabulated on the grid,
/// together with the constants every linearized quantity is built from. The grid
/// sum k = sum w (m - m^2) is the single source of truth for k downstream.
struct GlobalEquilibrium {
    double a0 = 1.0;
    double c0 = 0.0;
    double N0 = 0.0; ///< continuous target density
    double E0 = 0.0; ///< continuous target energy
    VelocityGrid grid;
    std::vector<double> m;      ///< m(p) per node
    std::vector<double> w;      ///< m - m^2 per node
    std::vector<double> sqrt_w; ///< sqrt(m - m^2) per node
    std::vector<std::uint8_t> unmasked; ///< w >= mask_threshold
    double k = 0.0;   ///< grid sum of w
    double xi2 = 0.0; ///< grid sum of |p|^2 w  (continuum value 3 N0 / (2 a0))
    double xi4 = 0.0; ///< grid sum of |p|^4 w  (continuum value 5 E0 / (2 a0))

    static constexpr double mask_threshold = 1e-30;

    /// Lemma-positivity combination E0 k - 9 N0^2 / (10 a0); positive on the branch.
    double positivity() const { return E0 * k - 9.0 * N0 * N0 / (10.0 * a0); }

    static GlobalEquilibrium from_moments(double N0, double E0, VelocityGrid grid,
                                          double adequacy_tol = 1e-6)
    {
        Moments m0{ N0, { 0.0, 0.0, 0.0 }, E0 };
        const double B0 = moments_B(m0); // throws if degenerate
        GlobalEquilibrium ge;
        ge.c0 = beta_inverse(B0); // throws OutOfBranchError when inadmissible
        const double M0 = 4.0 * M_PI * fd_integral(FdKind::plain, 2, ge.c0);
        ge.a0 = std::pow(M0 / N0, 2.0 / 3.0);
        ge.N0 = N0;
        ge.E0 = E0;
        ge.finish(std::move(grid), adequacy_tol);
        return ge;
    }

    static GlobalEquilibrium from_params(double a0, double c0, VelocityGrid grid,
                                         double adequacy_tol = 1e-6)
    {
        if (!(a0 > 0.0))
            throw UsageError("GlobalEquilibrium: a0 must be positive");
        if (!(c0 > -std::log(3.0)))
            throw PositivityError("GlobalEquilibrium: c0 = " + std::to_string(c0)
                                  + " is not above -ln 3; the equilibrium branch is undefined there");
        GlobalEquilibrium ge;
        ge.a0 = a0;
        ge.c0 = c0;
        ge.N0 = std::pow(a0, -1.5) * 4.0 * M_PI * fd_integral(FdKind::plain, 2, c0);
        ge.E0 = std::pow(a0, -2.5) * 4.0 * M_PI * fd_integral(FdKind::plain, 4, c0);
        ge.finish(std::move(grid), adequacy_tol);
        return ge;
    }

  private:
    void finish(VelocityGrid g, double adequacy_tol)
    {
        grid = std::move(g);
        const std::size_t n = grid.size();
        m.resize(n);
        w.resize(n);
        sqrt_w.resize(n);
        unmasked.resize(n);
        detail::KahanSum sm, sw, s2, s4;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = a0 * grid.p2[i] + c0;
            m[i] = detail::fermi_of_exponent(z);
            w[i] = detail::fermi_weight_of_exponent(z);
            sqrt_w[i] = std::sqrt(w[i]);
            unmasked[i] = w[i] >= mask_threshold ? 1 : 0;
            sm.add(m[i]);
            sw.add(w[i]);
            s2.add(grid.p2[i] * w[i]);
            s4.add(grid.p2[i] * grid.p2[i] * w[i]);
        }
        k = grid.weight * sw.value();
        xi2 = grid.weight * s2.value();
        xi4 = grid.weight * s4.value();

        const double N_grid = grid.weight * sm.value();
        if (std::abs(N_grid - N0) > adequacy_tol * N0)
            throw InvariantViolationError("grid adequacy: |sum w m - N0|/N0 = "
                                          + std::to_string(std::abs(N_grid - N0) / N0)
                                          + " exceeds " + std::to_string(adequacy_tol));
        if (!(positivity() > 0.0))
            throw PositivityError("GlobalEquilibrium: E0 k - 9 N0^2/(10 a0) = "
                                  + std::to_string(positivity()) + " is not positive");
    }
};

/// H(F) = sum_{x,p} [F ln F + (1-F) ln(1-F)] dx dp, with the x ln x -> 0 convention
/// at F in {0, 1}. Nonpositive, minimized by Fermi-Dirac distributions.
inline double h_functional(const PhaseState& s, const SpatialGrid& sg, const VelocityGrid& vg)
{
    detail::KahanSum sum;
    for (double F : s.F) {
        if (!(F >= 0.0) || !(F <= 1.0))
            throw InvariantViolationError("h_functional: F = " + std::to_string(F)
                                          + " outside [0, 1]");
        double term = 0.0;
        if (F > 0.0)
            term += F * std::log(F);
        if (F < 1.0)
            term += (1.0 - F) * std::log(1.0 - F);
        sum.add(term);
    }
    return sg.dx * vg.weight * sum.value();
}

struct PerturbedInit {
    PhaseState state;
    double perturbation_l2 = 0.0; ///< weighted L2 norm of the imposed f0
    double min_F = 0.0;
    double max_F = 0.0;
};

/// Builds F = m + sqrt(m - m^2) f0 with f0(x,p) = amplitude cos(2 pi x / L) phi(p).
/// Rejects amplitudes that push F outside [0, 1].
inline PerturbedInit init_perturbed_state(const GlobalEquilibrium& ge, const SpatialGrid& sg,
                                          double amplitude, std::span<const double> phi)
{
    const VelocityGrid& vg = ge.grid;
    if (phi.size() != vg.size())
        throw UsageError("init_perturbed_state: phi size does not match the velocity grid");

    PerturbedInit out;
    out.state.n_x = sg.n_x;
    out.state.F.resize(static_cast<std::size_t>(sg.n_x) * vg.size());
    out.min_F = 1.0;
    out.max_F = 0.0;
    detail::KahanSum l2;
    for (int ix = 0; ix < sg.n_x; ++ix) {
        const double cosx = std::cos(2.0 * M_PI * sg.centers[ix] / sg.length);
        double* F = out.state.cell(ix);
        for (std::size_t i = 0; i < vg.size(); ++i) {
            const double f0 = amplitude * cosx * phi[i];
            F[i] = ge.m[i] + ge.sqrt_w[i] * f0;
            out.min_F = std::min(out.min_F, F[i]);
            out.max_F = std::max(out.max_F, F[i]);
            l2.add(f0 * f0);
        }
    }
    if (out.min_F < 0.0 || out.max_F > 1.0)
        throw InvariantViolationError("init_perturbed_state: amplitude " + std::to_string(amplitude)
                                      + " pushes F outside [0, 1] (min " + std::to_string(out.min_F)
                                      + ", max " + std::to_string(out.max_F) + ")");
    out.perturbation_l2 = std::sqrt(sg.dx * vg.weight * l2.value());
    return out;
}

/// Snapshot file: one text header line
///   fermibgk-snapshot 1 time=<t> n_x=<n> length=<L> n_p=<n> p_max=<P>
/// followed by n_x * n_p^3 little-endian IEEE-754 doubles, velocity index fastest
/// (z fastest within the velocity block).
inline void write_snapshot(const std::string& path, const PhaseState& s, const SpatialGrid& sg,
                           const VelocityGrid& vg)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("write_snapshot: cannot open " + path);
    char header[256];
    std::snprintf(header, sizeof(header), "fermibgk-snapshot 1 time=%.17g n_x=%d length=%.17g n_p=%d p_max=%.17g\n",
                  s.time, s.n_x, sg.length, vg.n_p, vg.p_max);
    out << header;
    out.write(reinterpret_cast<const char*>(s.F.data()),
              static_cast<std::streamsize>(s.F.size() * sizeof(double)));
    if (!out)
        throw Error("write_snapshot: short write to " + path);
}

struct SnapshotData {
    PhaseState state;
    double length = 0.0;
    int n_p = 0;
    double p_max = 0.0;
};

inline SnapshotData read_snapshot(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("read_snapshot: cannot open " + path);
    std::string header;
    std::getline(in, header);
    SnapshotData snap;
    int version = 0;
    if (std::sscanf(header.c_str(), "fermibgk-snapshot %d time=%lg n_x=%d length=%lg n_p=%d p_max=%lg",
                    &version, &snap.state.time, &snap.state.n_x, &snap.length, &snap.n_p, &snap.p_max)
            != 6
        || version != 1)
        throw Error("read_snapshot: bad header in " + path);
    const std::size_t n = static_cast<std::size_t>(snap.state.n_x) * snap.n_p * snap.n_p * snap.n_p;
    snap.state.F.resize(n);
    in.read(reinterpret_cast<char*>(snap.state.F.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double))
        throw Error("read_snapshot: truncated data in " + path);
    return snap;
}

} // namespace fermibgk
