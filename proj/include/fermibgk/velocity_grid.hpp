#pragma once

#include <cstddef>
#include <vector>

#include "fermibgk/errors.hpp"

namespace fermibgk {

/// Cartesian midpoint grid on [-p_max, p_max]^3 with uniform weight dp^3.
/// Midpoint placement keeps the node set exactly symmetric under p -> -p,
/// so odd moments of even integrands cancel to the last bit.
struct VelocityGrid {
    double p_max = 0.0;
    int n_p = 0;
    double dp = 0.0;
    double weight = 0.0; ///< quadrature weight per node (dp^3)
    std::vector<double> px, py, pz, p2;

    static VelocityGrid make(double p_max, int n_p)
    {
        if (!(p_max > 0.0) || n_p < 2)
            throw UsageError("VelocityGrid: need p_max > 0 and n_p >= 2");
        VelocityGrid g;
        g.p_max = p_max;
        g.n_p = n_p;
        g.dp = 2.0 * p_max / n_p;
        g.weight = g.dp * g.dp * g.dp;
        const std::size_t n = static_cast<std::size_t>(n_p) * n_p * n_p;
        g.px.resize(n);
        g.py.resize(n);
        g.pz.resize(n);
        g.p2.resize(n);
        std::size_t idx = 0;
        for (int i = 0; i < n_p; ++i) {
            const double x = -p_max + (i + 0.5) * g.dp;
            for (int j = 0; j < n_p; ++j) {
                const double y = -p_max + (j + 0.5) * g.dp;
                for (int k = 0; k < n_p; ++k, ++idx) {
                    const double z = -p_max + (k + 0.5) * g.dp;
                    g.px[idx] = x;
                    g.py[idx] = y;
                    g.pz[idx] = z;
                    g.p2[idx] = x * x + y * y + z * z;
                }
            }
        }
        return g;
    }

    std::size_t size() const { return p2.size(); }
};

} // namespace fermibgk
