#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "fermibgk/phasegrid.hpp"

namespace fermibgk {

namespace detail {

    inline double grid_dot(const VelocityGrid& g, std::span<const double> f, std::span<const double> h)
    {
        KahanSum s;
        for (std::size_t i = 0; i < g.size(); ++i)
            s.add(f[i] * h[i]);
        return g.weight * s.value();
    }

} // namespace detail

/// Orthonormal basis of the macroscopic subspace span{1, p1, p2, p3, |p|^2} sqrt(m - m^2)
/// under the grid inner product. Built from the closed forms
///   e1 = k^{-1/2} sqrt(m-m^2)
///   e_i = (2 a0 / N0)^{1/2} p_{i-1} sqrt(m-m^2),            i = 2, 3, 4
///   e5 = (2 a0 k / (5 (E0 k - 9 N0^2/(10 a0))))^{1/2} (|p|^2 - 3 N0/(2 a0 k)) sqrt(m-m^2)
/// and then re-orthonormalized in the grid inner product; the polish only moves each
/// vector by the quadrature error of the grid. The raw closed-form Gram matrix is
/// kept so the normalizations themselves stay checkable.
struct OrthoBasis {
    std::array<std::vector<double>, 5> e;
    std::array<std::array<double, 5>, 5> gram_raw{};
    double max_gram_defect_raw = 0.0; ///< max |gram_raw - I|
};

inline OrthoBasis build_basis(const GlobalEquilibrium& ge)
{
    const VelocityGrid& g = ge.grid;
    const double pos = ge.positivity();
    if (!(pos > 0.0))
        throw PositivityError("build_basis: E0 k - 9 N0^2/(10 a0) = " + std::to_string(pos)
                              + " is not positive");

    OrthoBasis basis;
    const std::size_t n = g.size();
    const double c1 = 1.0 / std::sqrt(ge.k);
    const double ci = std::sqrt(2.0 * ge.a0 / ge.N0);
    const double mu = 3.0 * ge.N0 / (2.0 * ge.a0 * ge.k);
    const double c5 = std::sqrt(2.0 * ge.a0 * ge.k / (5.0 * pos));
    for (auto& v : basis.e)
        v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = ge.sqrt_w[i];
        basis.e[0][i] = c1 * s;
        basis.e[1][i] = ci * g.px[i] * s;
        basis.e[2][i] = ci * g.py[i] * s;
        basis.e[3][i] = ci * g.pz[i] * s;
        basis.e[4][i] = c5 * (g.p2[i] - mu) * s;
    }

    for (int a = 0; a < 5; ++a)
        for (int b = a; b < 5; ++b) {
            const double d = detail::grid_dot(g, basis.e[a], basis.e[b]);
            basis.gram_raw[a][b] = basis.gram_raw[b][a] = d;
            basis.max_gram_defect_raw = std::max(basis.max_gram_defect_raw,
                                                 std::abs(d - (a == b ? 1.0 : 0.0)));
        }

    // modified Gram-Schmidt polish in the grid inner product
    for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < a; ++b) {
            const double proj = detail::grid_dot(g, basis.e[a], basis.e[b]);
            for (std::size_t i = 0; i < n; ++i)
                basis.e[a][i] -= proj * basis.e[b][i];
        }
        const double nrm = std::sqrt(detail::grid_dot(g, basis.e[a], basis.e[a]));
        for (std::size_t i = 0; i < n; ++i)
            basis.e[a][i] /= nrm;
    }
    return basis;
}

/// <f, e_i> for i = 1..5.
inline std::array<double, 5> basis_coefficients(const OrthoBasis& basis, const VelocityGrid& g,
                                                std::span<const double> f)
{
    std::array<double, 5> c{};
    for (int i = 0; i < 5; ++i)
        c[i] = detail::grid_dot(g, f, basis.e[i]);
    return c;
}

/// Macroscopic projection Pf = sum_i <f, e_i> e_i.
inline std::vector<double> project_P(const OrthoBasis& basis, const VelocityGrid& g,
                                     std::span<const double> f)
{
    const std::array<double, 5> c = basis_coefficients(basis, g, f);
    std::vector<double> out(f.size(), 0.0);
    for (int i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] += c[i] * basis.e[i][j];
    return out;
}

/// Linearized relaxation operator Lf = Pf - f. Null space is span{e_i};
/// <Lf, f> = -||(I-P)f||^2.
inline std::vector<double> apply_L(const OrthoBasis& basis, const VelocityGrid& g,
                                   std::span<const double> f)
{
    std::vector<double> out = project_P(basis, g, f);
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] -= f[j];
    return out;
}

/// The six first-order derivatives of (c, a) with respect to (N, P, E) at the global
/// equilibrium, in closed form. The shared denominator -E0 k + 9 N0^2/(10 a0) is
/// negative whenever the equilibrium is admissible, so dc/dN and da/dE are negative.
/// The P-derivatives vanish identically at P0 = 0.
struct CoefficientDerivatives {
    double dc_dN = 0.0;
    double dc_dP = 0.0;
    double dc_dE = 0.0;
    double da_dN = 0.0;
    double da_dP = 0.0;
    double da_dE = 0.0;
};

inline CoefficientDerivatives coefficient_derivatives(const GlobalEquilibrium& ge)
{
    const double pos = ge.positivity();
    if (!(pos > 0.0))
        throw PositivityError("coefficient_derivatives: E0 k - 9 N0^2/(10 a0) must be positive");
    const double denom = -pos; // -E0 k + 9 N0^2/(10 a0)
    CoefficientDerivatives d;
    d.dc_dN = ge.E0 / denom;
    d.dc_dP = 0.0;
    d.dc_dE = -0.6 * ge.N0 / denom;
    d.da_dN = -0.6 * ge.N0 / denom;
    d.da_dP = 0.0;
    d.da_dE = 0.4 * ge.a0 * ge.k / denom;
    return d;
}

enum class GateauxDirection { N, P1, P2, P3, E };

/// Pointwise Gateaux derivative of the local Fermi-Dirac map at the global equilibrium:
///   dF/dN = ((3/5) N0 |p|^2 - E0) / denom (m - m^2)
///   dF/dP_i = (2 a0 / N0) p_i (m - m^2)
///   dF/dE = (-(2/5) a0 k |p|^2 + (3/5) N0) / denom (m - m^2)
/// with denom = -E0 k + 9 N0^2 / (10 a0).
inline std::vector<double> equilibrium_gateaux(const GlobalEquilibrium& ge, GateauxDirection dir)
{
    const double pos = ge.positivity();
    if (!(pos > 0.0))
        throw PositivityError("equilibrium_gateaux: E0 k - 9 N0^2/(10 a0) must be positive");
    const double denom = -pos;
    const VelocityGrid& g = ge.grid;
    std::vector<double> out(g.size());
    switch (dir) {
    case GateauxDirection::N:
        for (std::size_t i = 0; i < g.size(); ++i)
            out[i] = (0.6 * ge.N0 * g.p2[i] - ge.E0) / denom * ge.w[i];
        break;
    case GateauxDirection::P1:
    case GateauxDirection::P2:
    case GateauxDirection::P3: {
        const std::vector<double>& pc = dir == GateauxDirection::P1   ? g.px
            : dir == GateauxDirection::P2                             ? g.py
                                                                      : g.pz;
        for (std::size_t i = 0; i < g.size(); ++i)
            out[i] = 2.0 * ge.a0 / ge.N0 * pc[i] * ge.w[i];
        break;
    }
    case GateauxDirection::E:
        for (std::size_t i = 0; i < g.size(); ++i)
            out[i] = (-0.4 * ge.a0 * ge.k * g.p2[i] + 0.6 * ge.N0) / denom * ge.w[i];
        break;
    }
    return out;
}

/// First-order accuracy of the linearization F(m + eps sqrt(m-m^2) g) = m + eps (Pg) sqrt(m-m^2) + O(eps^2):
/// returns r(eps) = || (F_eq(perturbed) - m)/sqrt(m-m^2) - eps Pg ||; r(eps)/eps^2 stays
/// bounded as eps -> 0.
inline double linearization_residual(const GlobalEquilibrium& ge, const OrthoBasis& basis,
                                     std::span<const double> gfun, double eps, bool discrete = true)
{
    const VelocityGrid& g = ge.grid;
    std::vector<double> F(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        F[i] = ge.m[i] + eps * ge.sqrt_w[i] * gfun[i];

    const Moments mm = detail::cell_moments(F.data(), g);
    const double B = moments_B(mm);
    const double beta_max = beta_branch().beta_at_lower;
    if (!(B > 0.0) || !(B < beta_max))
        throw AdmissibilityError(0, B, beta_max);

    const FermiParams fp = discrete ? discrete_invert_equilibrium(mm, g) : invert_equilibrium(mm);
    const std::vector<double> Pg = project_P(basis, g, gfun);

    detail::KahanSum s;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!ge.unmasked[i])
            continue;
        const double feq = fermi_dirac_eval(fp, { g.px[i], g.py[i], g.pz[i] });
        const double diff = (feq - ge.m[i]) / ge.sqrt_w[i] - eps * Pg[i];
        s.add(diff * diff);
    }
    return std::sqrt(g.weight * s.value());
}

/// Micro-macro split of a phase-space perturbation: per-cell coefficients
///   abar = <f, sqrt(m-m^2)>, bbar_i = <f, p_i sqrt(m-m^2)>, cbar = <f, |p|^2 sqrt(m-m^2)>,
/// macroscopic part (abar + sum bbar_i p_i + cbar |p|^2) sqrt(m-m^2), micro part the rest.
/// The monomial weights are not orthogonal, so this split is *not* the projection P:
/// re-splitting the micro part gives nonzero coefficients again.
struct MicroMacro {
    std::vector<double> abar;                ///< per cell
    std::array<std::vector<double>, 3> bbar; ///< per cell
    std::vector<double> cbar;                ///< per cell
    std::vector<double> macro;               ///< phase-space field
    std::vector<double> micro;               ///< phase-space field
};

inline MicroMacro micro_macro_decompose(std::span<const double> f, const GlobalEquilibrium& ge,
                                        int n_x)
{
    const VelocityGrid& g = ge.grid;
    const std::size_t nn = g.size();
    if (f.size() != static_cast<std::size_t>(n_x) * nn)
        throw UsageError("micro_macro_decompose: field size does not match n_x * grid size");

    MicroMacro out;
    out.abar.resize(n_x);
    for (auto& b : out.bbar)
        b.resize(n_x);
    out.cbar.resize(n_x);
    out.macro.resize(f.size());
    out.micro.resize(f.size());

    for (int ix = 0; ix < n_x; ++ix) {
        const double* fc = f.data() + static_cast<std::size_t>(ix) * nn;
        detail::KahanSum sa, sb1, sb2, sb3, sc;
        for (std::size_t i = 0; i < nn; ++i) {
            const double v = fc[i] * ge.sqrt_w[i];
            sa.add(v);
            sb1.add(v * g.px[i]);
            sb2.add(v * g.py[i]);
            sb3.add(v * g.pz[i]);
            sc.add(v * g.p2[i]);
        }
        const double abar = g.weight * sa.value();
        const double b1 = g.weight * sb1.value();
        const double b2 = g.weight * sb2.value();
        const double b3 = g.weight * sb3.value();
        const double cbar = g.weight * sc.value();
        out.abar[ix] = abar;
        out.bbar[0][ix] = b1;
        out.bbar[1][ix] = b2;
        out.bbar[2][ix] = b3;
        out.cbar[ix] = cbar;
        double* mac = out.macro.data() + static_cast<std::size_t>(ix) * nn;
        double* mic = out.micro.data() + static_cast<std::size_t>(ix) * nn;
        for (std::size_t i = 0; i < nn; ++i) {
            mac[i] = (abar + b1 * g.px[i] + b2 * g.py[i] + b3 * g.pz[i] + cbar * g.p2[i]) * ge.sqrt_w[i];
            mic[i] = fc[i] - mac[i];
        }
    }
    return out;
}

} // namespace fermibgk
