#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

#include "fermibgk/errors.hpp"

namespace fermibgk::detail {

/// 1/(e^z + 1), overflow-safe for any finite z.
inline double fermi_of_exponent(double z)
{
    if (z > 0.0) {
        const double t = std::exp(-z);
        return t / (1.0 + t);
    }
    return 1.0 / (std::exp(z) + 1.0);
}

/// e^z/(e^z + 1)^2 = F - F^2, symmetric in z, overflow-safe.
inline double fermi_weight_of_exponent(double z)
{
    const double t = std::exp(-std::abs(z));
    const double d = 1.0 + t;
    return t / (d * d);
}

/// Neumaier-compensated accumulator for long reductions.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v)
    {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
/// Newton iteration on the Legendre polynomial from the Chebyshev-like initial guess.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15)
                break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

/// Solves the n x n system A x = b in place by Gaussian elimination with partial pivoting.
template <int N>
inline std::array<double, N> solve_linear(std::array<std::array<double, N>, N> A, std::array<double, N> b)
{
    for (int col = 0; col < N; ++col) {
        int piv = col;
        for (int r = col + 1; r < N; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col]))
                piv = r;
        if (A[piv][col] == 0.0)
            throw ConvergenceError("singular linear system in Newton step", 0.0, 0);
        std::swap(A[col], A[piv]);
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < N; ++r) {
            const double f = A[r][col] / A[col][col];
            for (int c = col; c < N; ++c)
                A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, N> x{};
    for (int r = N - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < N; ++c)
            s -= A[r][c] * x[c];
        x[r] = s / A[r][r];
    }
    return x;
}

/// Runs fn(begin, end) over disjoint chunks of [0, n). Writes must be disjoint per
/// index, so results do not depend on `threads`. The first exception thrown by a
/// worker is rethrown on the calling thread after all workers join.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& fn)
{
    if (threads <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(threads, n);
    const std::size_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::vector<std::exception_ptr> errors(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e)
            break;
        pool.emplace_back([&, t, b, e] {
            try {
                fn(b, e);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (const auto& err : errors)
        if (err)
            std::rethrow_exception(err);
}

} // namespace fermibgk::detail
