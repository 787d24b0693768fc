#pragma once

#include <cmath>
#include <vector>

#include "fermibgk/detail/math.hpp"
#include "fermibgk/errors.hpp"

namespace fermibgk {

/// Radial integral families over r in [0, inf):
///   plain:    I_k(c) = int r^k / (e^{r^2+c} + 1) dr
///   weighted: J_k(c) = int r^k e^{r^2+c} / (e^{r^2+c} + 1)^2 dr
/// Integration by parts ties them together: J_2 = I_0/2, J_4 = 3 I_2/2, J_6 = 5 I_4/2.
enum class FdKind { plain, weighted };

enum class QuadScheme { gauss_legendre, simpson };

/// Discretization of the radial integrals. The integrand decays like e^{-r^2-c}
/// past its peak, so a c-dependent finite cutoff loses nothing in double precision.
struct QuadratureRule {
    QuadScheme scheme = QuadScheme::gauss_legendre;
    /// Gauss-Legendre: nodes per panel. Simpson: subintervals per panel (rounded up to even).
    int nodes = 64;
    /// Panel width on [0, cutoff(c)].
    double panel_width = 1.5;

    /// Truncation radius: the integrand at cutoff(c) is below 1e-16 of its peak.
    static double cutoff(double c) { return std::sqrt(std::max(0.0, 36.0 - std::min(c, 0.0))) + 6.0; }
};

namespace detail {

    struct GlRule {
        std::vector<double> x, w;
    };

    inline const GlRule& gl_rule(int n)
    {
        thread_local int cached_n = 0;
        thread_local GlRule rule;
        if (cached_n != n) {
            gauss_legendre(n, rule.x, rule.w);
            cached_n = n;
        }
        return rule;
    }

    template <typename F>
    inline double integrate_radial(double upper, const QuadratureRule& rule, F&& integrand)
    {
        const int n_panels = std::max(1, static_cast<int>(std::ceil(upper / rule.panel_width)));
        const double h = upper / n_panels;
        KahanSum total;
        if (rule.scheme == QuadScheme::gauss_legendre) {
            const auto& [x, w] = gl_rule(rule.nodes);
            for (int p = 0; p < n_panels; ++p) {
                const double mid = (p + 0.5) * h;
                for (int i = 0; i < rule.nodes; ++i)
                    total.add(0.5 * h * w[i] * integrand(mid + 0.5 * h * x[i]));
            }
        } else {
            const int m = rule.nodes + (rule.nodes % 2); // Simpson needs an even count
            const double dr = h / m;
            for (int p = 0; p < n_panels; ++p) {
                const double r0 = p * h;
                KahanSum panel;
                panel.add(integrand(r0));
                panel.add(integrand(r0 + h));
                for (int i = 1; i < m; ++i)
                    panel.add((i % 2 ? 4.0 : 2.0) * integrand(r0 + i * dr));
                total.add(panel.value() * dr / 3.0);
            }
        }
        return total.value();
    }

} // namespace detail

/// Evaluates I_k(c) or J_k(c) for even k in {0, 2, 4, 6}.
inline double fd_integral(FdKind kind, int order, double c, const QuadratureRule& rule = {})
{
    if (!std::isfinite(c))
        throw UsageError("fd_integral: c must be finite");
    if (order != 0 && order != 2 && order != 4 && order != 6)
        throw UsageError("fd_integral: order must be one of {0, 2, 4, 6}");
    const double upper = QuadratureRule::cutoff(c);
    if (kind == FdKind::plain)
        return detail::integrate_radial(upper, rule, [&](double r) {
            return std::pow(r, order) * fermibgk::detail::fermi_of_exponent(r * r + c);
        });
    return detail::integrate_radial(upper, rule, [&](double r) {
        return std::pow(r, order) * fermibgk::detail::fermi_weight_of_exponent(r * r + c);
    });
}

/// beta(c) = (4 pi I_2) / (4 pi I_4)^{3/5}, the moment ratio that the inversion
/// of (N, P, E) into equilibrium coefficients has to invert in c.
inline double beta(double c, const QuadratureRule& rule = {})
{
    const double M0 = 4.0 * M_PI * fd_integral(FdKind::plain, 2, c, rule);
    const double M2 = 4.0 * M_PI * fd_integral(FdKind::plain, 4, c, rule);
    return M0 * std::pow(M2, -0.6);
}

/// beta'(c) in the integrated-by-parts form
///   beta'(c) = (-M2*K + (9/10) M0^2) / M2^{8/5},
/// with M0 = 4 pi I_2, M2 = 4 pi I_4, K = 2 pi I_0. Strictly negative for c >= -ln 3.
inline double beta_prime(double c, const QuadratureRule& rule = {})
{
    const double M0 = 4.0 * M_PI * fd_integral(FdKind::plain, 2, c, rule);
    const double M2 = 4.0 * M_PI * fd_integral(FdKind::plain, 4, c, rule);
    const double K = 2.0 * M_PI * fd_integral(FdKind::plain, 0, c, rule);
    return (-M2 * K + 0.9 * M0 * M0) * std::pow(M2, -1.6);
}

/// The monotone branch of beta: [-ln 3, inf), on which beta is strictly decreasing.
/// Behavior left of -ln 3 is not assumed anywhere.
struct BetaBranch {
    double lower;         ///< -ln 3
    double beta_at_lower; ///< beta(-ln 3), the supremum of invertible B values
};

inline const BetaBranch& beta_branch()
{
    static const BetaBranch branch = [] {
        const double lower = -std::log(3.0);
        return BetaBranch{ lower, beta(lower) };
    }();
    return branch;
}

/// Solves beta(c) = B for the unique c in (-ln 3, inf).
/// Safeguarded Newton inside a verified bracket; bisects whenever an iterate
/// leaves the bracket or beta' degenerates.
inline double beta_inverse(double B)
{
    const BetaBranch& branch = beta_branch();
    if (!std::isfinite(B) || B <= 0.0 || B >= branch.beta_at_lower)
        throw OutOfBranchError(B, branch.beta_at_lower);

    double lo = branch.lower;      // beta(lo) > B
    double hi = std::max(lo + 1.0, 1.0);
    double beta_hi = beta(hi);
    while (beta_hi > B) {
        hi = 2.0 * hi;
        if (hi > 650.0)
            throw UsageError("beta_inverse: B underflows the branch representable in double precision");
        beta_hi = beta(hi);
    }

    // contract: |beta(c) - B| <= 1e-10 B. The iteration aims two orders lower so
    // downstream finite-difference checks are not limited by the inversion noise.
    double c = 0.5 * (lo + hi);
    double best_c = c;
    double best_res = std::abs(beta(c) - B);
    for (int it = 0; it < 200 && best_res > 1e-13 * B; ++it) {
        const double bc = beta(c);
        const double res = std::abs(bc - B);
        if (res < best_res) {
            best_res = res;
            best_c = c;
        }
        if (bc > B)
            lo = c; // beta decreasing: root is to the right
        else
            hi = c;
        if (hi - lo <= 1e-15 * (1.0 + std::abs(c)))
            break;
        const double slope = beta_prime(c);
        double next = c - (bc - B) / slope;
        if (!(std::abs(slope) > 1e-14) || !(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        c = next;
    }
    if (best_res <= 1e-10 * B)
        return best_c;
    throw ConvergenceError("beta_inverse did not converge", best_res, 200);
}

} // namespace fermibgk
