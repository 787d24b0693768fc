#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fermibgk/phasegrid.hpp"

namespace fermibgk {

/// The perturbation f = (F - m) / sqrt(m - m^2), masked where m - m^2 underflows
/// (weight below GlobalEquilibrium::mask_threshold). Masked nodes carry f = 0 and
/// are excluded from every norm.
struct PerturbationField {
    std::vector<double> f; ///< same layout as PhaseState::F
    double l2 = 0.0;       ///< weighted L2 over unmasked nodes
    std::size_t masked_nodes = 0;
};

inline PerturbationField perturbation_field(const PhaseState& s, const GlobalEquilibrium& ge,
                                            const SpatialGrid& sg)
{
    const VelocityGrid& g = ge.grid;
    PerturbationField out;
    out.f.assign(s.F.size(), 0.0);
    detail::KahanSum l2;
    for (int ix = 0; ix < s.n_x; ++ix) {
        const double* F = s.cell(ix);
        double* f = out.f.data() + static_cast<std::size_t>(ix) * g.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!ge.unmasked[i])
                continue;
            f[i] = (F[i] - ge.m[i]) / ge.sqrt_w[i];
            l2.add(f[i] * f[i]);
        }
    }
    out.masked_nodes = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!ge.unmasked[i])
            ++out.masked_nodes;
    out.l2 = std::sqrt(sg.dx * g.weight * l2.value());
    return out;
}

/// First-order spatial finite-difference norm of f: || (f(x+dx) - f(x-dx)) / (2 dx) ||.
/// Reported separately from ||f|| as the grid-resolvable slice of the energy functional.
inline double perturbation_dx_l2(const PerturbationField& pf, const SpatialGrid& sg,
                                 const VelocityGrid& vg)
{
    if (sg.n_x < 2)
        return 0.0;
    const std::size_t nn = vg.size();
    detail::KahanSum s;
    for (int ix = 0; ix < sg.n_x; ++ix) {
        const std::size_t up = static_cast<std::size_t>((ix + 1) % sg.n_x) * nn;
        const std::size_t dn = static_cast<std::size_t>((ix + sg.n_x - 1) % sg.n_x) * nn;
        for (std::size_t i = 0; i < nn; ++i) {
            const double d = (pf.f[up + i] - pf.f[dn + i]) / (2.0 * sg.dx);
            s.add(d * d);
        }
    }
    return std::sqrt(sg.dx * vg.weight * s.value());
}

/// Least-squares fit of log ||f|| against t on [t_lo, t_hi]: ||f(t)|| ~ C e^{-rate t}.
struct DecayFit {
    double rate = 0.0;
    double intercept = 0.0; ///< log C
    double r2 = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    bool reached_floor = false; ///< a norm hit exactly zero; fit truncated before it
    int n_used = 0;
};

inline DecayFit decay_fit(std::span<const double> t, std::span<const double> norm, double t_lo,
                          double t_hi)
{
    if (t.size() != norm.size())
        throw UsageError("decay_fit: mismatched series lengths");
    DecayFit fit;
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi)
            continue;
        if (norm[i] == 0.0) {
            fit.reached_floor = true;
            break;
        }
        if (!(norm[i] > 0.0))
            throw UsageError("decay_fit: norms must be nonnegative");
        xs.push_back(t[i]);
        ys.push_back(std::log(norm[i]));
    }
    fit.n_used = static_cast<int>(xs.size());
    if (fit.n_used < 10)
        throw UsageError("decay_fit: need at least 10 samples in the window, got "
                         + std::to_string(fit.n_used));

    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < fit.n_used; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / fit.n_used, my = sy / fit.n_used;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < fit.n_used; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    fit.rate = -slope;
    fit.intercept = my - slope * mx;
    double ss_res = 0.0;
    for (int i = 0; i < fit.n_used; ++i) {
        const double r = ys[i] - (my + slope * (xs[i] - mx));
        ss_res += r * r;
    }
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

/// Near-equilibrium monitor: the four macroscopic deviations of the a-priori bounds,
/// raw and relative to the current perturbation size, the distance of max B to the
/// branch endpoint, and the conserved integrals of f.
struct MonitorRecord {
    double dev_N = 0.0; ///< max_x |N - N0|
    double dev_P = 0.0; ///< max_x |P|
    double dev_E = 0.0; ///< max_x |E - E0|
    double dev_B = 0.0; ///< max_x |B - N0/E0^{3/5}|
    double ratio_N = 0.0, ratio_P = 0.0, ratio_E = 0.0, ratio_B = 0.0; ///< dev / ||f||
    double f_l2 = 0.0;
    double margin = 0.0; ///< beta(-ln 3) - max_x B
    bool near_boundary = false;
    std::array<double, 5> f_integrals{}; ///< int f (1, p, |p|^2) sqrt(m-m^2) dx dp
    std::array<double, 5> f_integral_drift{}; ///< vs baseline, when provided
};

inline MonitorRecord smallness_monitor(const PhaseState& s, const GlobalEquilibrium& ge,
                                       const SpatialGrid& sg, const MonitorRecord* baseline = nullptr)
{
    const VelocityGrid& g = ge.grid;
    MonitorRecord rec;
    const double B0 = ge.N0 * std::pow(ge.E0, -0.6);
    const double beta_max = beta_branch().beta_at_lower;

    double max_B = 0.0;
    const std::vector<Moments> mom = compute_moments(s, g);
    for (const Moments& m : mom) {
        rec.dev_N = std::max(rec.dev_N, std::abs(m.N - ge.N0));
        rec.dev_P = std::max(rec.dev_P, std::sqrt(m.P2()));
        rec.dev_E = std::max(rec.dev_E, std::abs(m.E - ge.E0));
        const double B = moments_B(m);
        rec.dev_B = std::max(rec.dev_B, std::abs(B - B0));
        max_B = std::max(max_B, B);
    }
    rec.margin = beta_max - max_B;
    rec.near_boundary = rec.margin < 1e-3;

    const PerturbationField pf = perturbation_field(s, ge, sg);
    rec.f_l2 = pf.l2;
    auto ratio = [&](double dev) { return dev == 0.0 ? 0.0 : dev / pf.l2; };
    rec.ratio_N = ratio(rec.dev_N);
    rec.ratio_P = ratio(rec.dev_P);
    rec.ratio_E = ratio(rec.dev_E);
    rec.ratio_B = ratio(rec.dev_B);

    // conserved integrals of f (the transported form of mass/momentum/energy conservation)
    detail::KahanSum s0, s1, s2, s3, s4;
    for (int ix = 0; ix < s.n_x; ++ix) {
        const double* f = pf.f.data() + static_cast<std::size_t>(ix) * g.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = f[i] * ge.sqrt_w[i];
            s0.add(v);
            s1.add(v * g.px[i]);
            s2.add(v * g.py[i]);
            s3.add(v * g.pz[i]);
            s4.add(v * g.p2[i]);
        }
    }
    const double vol = sg.dx * g.weight;
    rec.f_integrals = { vol * s0.value(), vol * s1.value(), vol * s2.value(), vol * s3.value(),
                        vol * s4.value() };
    if (baseline)
        for (int i = 0; i < 5; ++i)
            rec.f_integral_drift[i] = rec.f_integrals[i] - baseline->f_integrals[i];
    return rec;
}

} // namespace fermibgk
