#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>

#include "fermibgk/detail/math.hpp"
#include "fermibgk/errors.hpp"
#include "fermibgk/fdintegrals.hpp"
#include "fermibgk/velocity_grid.hpp"

namespace fermibgk {

/// Conserved fields of one spatial cell: number, momentum and energy density.
struct Moments {
    double N = 0.0;
    std::array<double, 3> P{ 0.0, 0.0, 0.0 };
    double E = 0.0;

    double P2() const { return P[0] * P[0] + P[1] * P[1] + P[2] * P[2]; }
};

/// Coefficients of a local Fermi-Dirac distribution 1/(e^{a|p-b|^2+c} + 1).
/// Any real c is a valid forward parameter; inversion outputs satisfy c > -ln 3.
struct FermiParams {
    double a = 1.0;
    std::array<double, 3> b{ 0.0, 0.0, 0.0 };
    double c = 0.0;
};

/// B(N,P,E) = N / (E - |P|^2/N)^{3/5}. The inversion is well-posed exactly when
/// this lands inside (0, beta(-ln 3)).
inline double moments_B(const Moments& m)
{
    if (!(m.N > 0.0))
        throw DegenerateMomentsError("moments_B: N must be positive, got " + std::to_string(m.N));
    const double internal = m.E - m.P2() / m.N;
    if (!(internal > 0.0))
        throw DegenerateMomentsError("moments_B: E - |P|^2/N = " + std::to_string(internal)
                                     + " must be positive");
    return m.N * std::pow(internal, -0.6);
}

/// Pointwise value of the distribution at momentum p.
inline double fermi_dirac_eval(const FermiParams& fp, const std::array<double, 3>& p)
{
    const double dx = p[0] - fp.b[0];
    const double dy = p[1] - fp.b[1];
    const double dz = p[2] - fp.b[2];
    return detail::fermi_of_exponent(fp.a * (dx * dx + dy * dy + dz * dz) + fp.c);
}

/// Moments of the distribution with coefficients fp:
///   N = a^{-3/2} 4 pi I_2(c),  E = a^{-5/2} 4 pi I_4(c) + N |b|^2,  P = N b.
inline Moments equilibrium_moments(const FermiParams& fp)
{
    if (!(fp.a > 0.0))
        throw UsageError("equilibrium_moments: a must be positive");
    const double M0 = 4.0 * M_PI * fd_integral(FdKind::plain, 2, fp.c);
    const double M2 = 4.0 * M_PI * fd_integral(FdKind::plain, 4, fp.c);
    Moments m;
    m.N = std::pow(fp.a, -1.5) * M0;
    m.P = { m.N * fp.b[0], m.N * fp.b[1], m.N * fp.b[2] };
    m.E = std::pow(fp.a, -2.5) * M2 + m.N * (fp.b[0] * fp.b[0] + fp.b[1] * fp.b[1] + fp.b[2] * fp.b[2]);
    return m;
}

/// Inverts moments into equilibrium coefficients through the monotone branch:
/// c = beta^{-1}(B), a = (4 pi I_2(c) / N)^{2/3}, b = P/N.
inline FermiParams invert_equilibrium(const Moments& m)
{
    const double B = moments_B(m);
    FermiParams fp;
    fp.c = beta_inverse(B);
    const double M0 = 4.0 * M_PI * fd_integral(FdKind::plain, 2, fp.c);
    fp.a = std::pow(M0 / m.N, 2.0 / 3.0);
    fp.b = { m.P[0] / m.N, m.P[1] / m.N, m.P[2] / m.N };
    return fp;
}

/// Quadrature moments of the distribution fp over the grid.
inline Moments grid_equilibrium_moments(const FermiParams& fp, const VelocityGrid& g)
{
    detail::KahanSum sN, sPx, sPy, sPz, sE;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double dx = g.px[i] - fp.b[0];
        const double dy = g.py[i] - fp.b[1];
        const double dz = g.pz[i] - fp.b[2];
        const double F = detail::fermi_of_exponent(fp.a * (dx * dx + dy * dy + dz * dz) + fp.c);
        sN.add(F);
        sPx.add(F * g.px[i]);
        sPy.add(F * g.py[i]);
        sPz.add(F * g.pz[i]);
        sE.add(F * g.p2[i]);
    }
    Moments m;
    m.N = g.weight * sN.value();
    m.P = { g.weight * sPx.value(), g.weight * sPy.value(), g.weight * sPz.value() };
    m.E = g.weight * sE.value();
    return m;
}

/// Finds coefficients whose *quadrature* moments on the grid reproduce m_discrete,
/// so relaxation conserves (N, P, E) at machine precision instead of up to
/// discretization error. 5-dimensional damped Newton, seeded by the continuous
/// inversion; the two solutions agree up to the quadrature error of the grid.
inline FermiParams discrete_invert_equilibrium(const Moments& m_discrete, const VelocityGrid& g,
                                               double tol = 1e-13, int max_iter = 50)
{
    FermiParams fp = invert_equilibrium(m_discrete);

    const double sigma = std::sqrt(m_discrete.E / m_discrete.N);
    const std::array<double, 5> scale = { m_discrete.N, m_discrete.N * sigma, m_discrete.N * sigma,
                                          m_discrete.N * sigma, m_discrete.E };

    auto residual = [&](const FermiParams& p) {
        const Moments mm = grid_equilibrium_moments(p, g);
        return std::array<double, 5>{ mm.N - m_discrete.N, mm.P[0] - m_discrete.P[0],
                                      mm.P[1] - m_discrete.P[1], mm.P[2] - m_discrete.P[2],
                                      mm.E - m_discrete.E };
    };
    auto scaled_norm = [&](const std::array<double, 5>& r) {
        double v = 0.0;
        for (int i = 0; i < 5; ++i)
            v = std::max(v, std::abs(r[i]) / scale[i]);
        return v;
    };

    // Jacobian of the grid moments w.r.t. (a, b1, b2, b3, c):
    //   dF/da = -|p-b|^2 G, dF/db_i = 2 a (p_i - b_i) G, dF/dc = -G,  G = F - F^2.
    auto newton_step = [&](const FermiParams& p, const std::array<double, 5>& res) {
        std::array<std::array<double, 5>, 5> J{};
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double dx = g.px[i] - p.b[0];
            const double dy = g.py[i] - p.b[1];
            const double dz = g.pz[i] - p.b[2];
            const double q2 = dx * dx + dy * dy + dz * dz;
            const double G = detail::fermi_weight_of_exponent(p.a * q2 + p.c);
            const std::array<double, 5> phi = { 1.0, g.px[i], g.py[i], g.pz[i], g.p2[i] };
            const std::array<double, 5> dF = { -q2 * G, 2.0 * p.a * dx * G, 2.0 * p.a * dy * G,
                                               2.0 * p.a * dz * G, -G };
            for (int row = 0; row < 5; ++row)
                for (int col = 0; col < 5; ++col)
                    J[row][col] += phi[row] * dF[col];
        }
        for (auto& row : J)
            for (auto& v : row)
                v *= g.weight;
        const std::array<double, 5> rhs = { -res[0], -res[1], -res[2], -res[3], -res[4] };
        return detail::solve_linear<5>(J, rhs);
    };
    auto advance = [](const FermiParams& p, const std::array<double, 5>& step, double lambda) {
        FermiParams q;
        q.a = p.a + lambda * step[0];
        q.b = { p.b[0] + lambda * step[1], p.b[1] + lambda * step[2], p.b[2] + lambda * step[3] };
        q.c = p.c + lambda * step[4];
        return q;
    };

    std::array<double, 5> r = residual(fp);
    double rnorm = scaled_norm(r);
    int it = 0;
    while (rnorm > tol) {
        if (it++ >= max_iter)
            throw ConvergenceError("discrete_invert_equilibrium did not reach tolerance", rnorm, max_iter);
        const std::array<double, 5> step = newton_step(fp, r);

        // damping: halve until a stays positive and the residual decreases
        double lambda = 1.0;
        bool accepted = false;
        for (int halve = 0; halve <= 8; ++halve, lambda *= 0.5) {
            const FermiParams next = advance(fp, step, lambda);
            if (!(next.a > 0.0))
                continue;
            const std::array<double, 5> r_next = residual(next);
            const double rnorm_next = scaled_norm(r_next);
            if (rnorm_next < rnorm) {
                fp = next;
                r = r_next;
                rnorm = rnorm_next;
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw ConvergenceError("discrete_invert_equilibrium: Newton stalled", rnorm, it);
    }

    // one full polish step, kept only if it lowers the residual further
    if (rnorm > 0.0) {
        const FermiParams next = advance(fp, newton_step(fp, r), 1.0);
        if (next.a > 0.0) {
            const std::array<double, 5> r_next = residual(next);
            if (scaled_norm(r_next) < rnorm)
                fp = next;
        }
    }
    return fp;
}

/// Coefficients of the relaxation-time law 1/tau = P(N) (C1 a^n + C2 a^m + C3) + C4,
/// with n >= 0, m <= 0, C_i >= 0 and at least one C_i nonzero.
struct TauCoefficients {
    std::vector<double> poly{ 0.0 }; ///< P(N) = sum_j poly[j] N^j
    double n = 0.0;
    double m = 0.0;
    double C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 1.0;

    void validate() const
    {
        if (n < 0.0 || m > 0.0)
            throw ConfigError("TauCoefficients: require n >= 0 and m <= 0");
        if (C1 < 0.0 || C2 < 0.0 || C3 < 0.0 || C4 < 0.0)
            throw ConfigError("TauCoefficients: every C_i must be nonnegative");
        if (C1 + C2 + C3 + C4 == 0.0)
            throw ConfigError("TauCoefficients: the sum of C_i must be nonzero");
    }

    static TauCoefficients constant_unit()
    {
        TauCoefficients tc;
        tc.C4 = 1.0;
        return tc;
    }
};

/// 1/tau for the given cell. The temperature dependence enters through a (T = 1/(k_B a)).
inline double relaxation_frequency(const Moments& m, const FermiParams& fp, const TauCoefficients& tc)
{
    tc.validate();
    double pn = 0.0;
    for (std::size_t j = tc.poly.size(); j-- > 0;)
        pn = pn * m.N + tc.poly[j];

    double bracket = tc.C3;
    if (tc.C1 > 0.0)
        bracket += tc.C1 * std::pow(fp.a, tc.n);
    if (tc.C2 > 0.0) {
        if (fp.a == 0.0 && tc.m < 0.0)
            throw SingularFrequencyError("relaxation_frequency: a = 0 with C2 > 0, m < 0");
        bracket += tc.C2 * std::pow(fp.a, tc.m);
    }
    const double nu = pn * bracket + tc.C4;
    if (!(nu >= 0.0) || !std::isfinite(nu))
        throw InvariantViolationError("relaxation_frequency: 1/tau = " + std::to_string(nu)
                                      + " is not a nonnegative finite value");
    return nu;
}

} // namespace fermibgk
