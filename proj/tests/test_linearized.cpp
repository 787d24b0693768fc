#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fermibgk/linearized.hpp"
#include "oracles.hpp"

using namespace fermibgk;
using Catch::Approx;

namespace {

const GlobalEquilibrium& lin_ge()
{
    static const GlobalEquilibrium ge
        = GlobalEquilibrium::from_params(1.0, 0.0, VelocityGrid::make(6.0, 64));
    return ge;
}

const OrthoBasis& lin_basis()
{
    static const OrthoBasis basis = build_basis(lin_ge());
    return basis;
}

std::vector<double> random_field(std::mt19937_64& gen, std::size_t n)
{
    std::normal_distribution<double> dist;
    std::vector<double> f(n);
    for (double& v : f)
        v = dist(gen);
    return f;
}

std::vector<double> microscopic_part(const GlobalEquilibrium& ge, const OrthoBasis& basis,
                                     std::vector<double> f)
{
    const std::vector<double> Pf = project_P(basis, ge.grid, f);
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] -= Pf[i];
    return f;
}

} // namespace

TEST_CASE("closed-form basis is orthonormal before any polish")
{
    const OrthoBasis& basis = lin_basis();
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            CHECK(basis.gram_raw[a][b] == Approx(a == b ? 1.0 : 0.0).margin(1e-10));
    CHECK(basis.max_gram_defect_raw < 1e-10);
    CHECK(std::abs(basis.gram_raw[4][0]) < 1e-10); // <e5, e1>
}

TEST_CASE("polished basis is orthonormal to roundoff")
{
    const OrthoBasis& basis = lin_basis();
    const GlobalEquilibrium& ge = lin_ge();
    for (int a = 0; a < 5; ++a)
        for (int b = a; b < 5; ++b) {
            const double d = detail::grid_dot(ge.grid, basis.e[a], basis.e[b]);
            CHECK(d == Approx(a == b ? 1.0 : 0.0).margin(1e-14));
        }
}

TEST_CASE("closed forms agree with an independent Gram-Schmidt oracle")
{
    const GlobalEquilibrium& ge = lin_ge();
    const OrthoBasis& basis = lin_basis();
    const VelocityGrid& g = ge.grid;

    // raw monomial-weighted family, orthogonalized from scratch in the test
    std::array<std::vector<double>, 5> gs;
    for (auto& v : gs)
        v.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = ge.sqrt_w[i];
        gs[0][i] = s;
        gs[1][i] = g.px[i] * s;
        gs[2][i] = g.py[i] * s;
        gs[3][i] = g.pz[i] * s;
        gs[4][i] = g.p2[i] * s;
    }
    for (int a = 0; a < 5; ++a) {
        for (int rep = 0; rep < 2; ++rep) // re-orthogonalize for full precision
            for (int b = 0; b < a; ++b) {
                const double proj = detail::grid_dot(g, gs[a], gs[b]);
                for (std::size_t i = 0; i < g.size(); ++i)
                    gs[a][i] -= proj * gs[b][i];
            }
        const double nrm = std::sqrt(detail::grid_dot(g, gs[a], gs[a]));
        for (std::size_t i = 0; i < g.size(); ++i)
            gs[a][i] /= nrm;
    }
    for (int a = 0; a < 5; ++a) {
        double max_diff = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            max_diff = std::max(max_diff, std::abs(gs[a][i] - basis.e[a][i]));
        CHECK(max_diff < 1e-10);
    }
}

TEST_CASE("build_basis near the branch endpoint still passes its identities")
{
    const GlobalEquilibrium ge = GlobalEquilibrium::from_params(
        1.0, -std::log(3.0) + 1e-6, VelocityGrid::make(6.0, 64));
    const OrthoBasis basis = build_basis(ge);
    CHECK(basis.max_gram_defect_raw < 1e-10);
}

TEST_CASE("build_basis rejects a broken positivity combination")
{
    GlobalEquilibrium ge = GlobalEquilibrium::from_params(1.0, 0.0, VelocityGrid::make(6.0, 24));
    ge.k = 1e-12; // force E0 k - 9 N0^2/(10 a0) < 0
    CHECK_THROWS_AS(build_basis(ge), PositivityError);
}

TEST_CASE("project_P fixes basis vectors and kills the orthogonal complement")
{
    const GlobalEquilibrium& ge = lin_ge();
    const OrthoBasis& basis = lin_basis();

    const std::vector<double> Pe3 = project_P(basis, ge.grid, basis.e[2]);
    for (std::size_t i = 0; i < Pe3.size(); ++i)
        CHECK(Pe3[i] == Approx(basis.e[2][i]).margin(1e-12));

    auto gen = oracles::rng(31);
    const std::vector<double> micro = microscopic_part(ge, basis, random_field(gen, ge.grid.size()));
    const std::vector<double> Pmicro = project_P(basis, ge.grid, micro);
    const double nrm = std::sqrt(detail::grid_dot(ge.grid, Pmicro, Pmicro));
    CHECK(nrm < 1e-10);
}

TEST_CASE("project_P is idempotent and self-adjoint")
{
    const GlobalEquilibrium& ge = lin_ge();
    const OrthoBasis& basis = lin_basis();
    auto gen = oracles::rng(37);
    for (int trial = 0; trial < 5; ++trial) {
        const std::vector<double> f = random_field(gen, ge.grid.size());
        const std::vector<double> h = random_field(gen, ge.grid.size());
        const std::vector<double> Pf = project_P(basis, ge.grid, f);
        const std::vector<double> PPf = project_P(basis, ge.grid, Pf);
        double scale = 0.0, diff = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            diff = std::max(diff, std::abs(PPf[i] - Pf[i]));
            scale = std::max(scale, std::abs(Pf[i]));
        }
        CHECK(diff <= 1e-10 * std::max(scale, 1.0));

        const std::vector<double> Ph = project_P(basis, ge.grid, h);
        CHECK(detail::grid_dot(ge.grid, Pf, h) == Approx(detail::grid_dot(ge.grid, f, Ph)).epsilon(1e-10));

        // <Pf, (I-P)f> = 0
        std::vector<double> rest = f;
        for (std::size_t i = 0; i < f.size(); ++i)
            rest[i] -= Pf[i];
        const double cross = detail::grid_dot(ge.grid, Pf, rest);
        CHECK(std::abs(cross) < 1e-10 * detail::grid_dot(ge.grid, f, f));
    }
}

TEST_CASE("L annihilates the null space and negates the microscopic part")
{
    const GlobalEquilibrium& ge = lin_ge();
    const OrthoBasis& basis = lin_basis();

    const std::vector<double> Le1 = apply_L(basis, ge.grid, basis.e[0]);
    for (double v : Le1)
        CHECK(std::abs(v) < 1e-12);

    auto gen = oracles::rng(41);
    const std::vector<double> micro = microscopic_part(ge, basis, random_field(gen, ge.grid.size()));
    const std::vector<double> Lmicro = apply_L(basis, ge.grid, micro);
    for (std::size_t i = 0; i < micro.size(); ++i)
        CHECK(Lmicro[i] == Approx(-micro[i]).margin(1e-10));
}

TEST_CASE("coercivity identity <Lf, f> = -||(I-P)f||^2")
{
    const GlobalEquilibrium& ge = lin_ge();
    const OrthoBasis& basis = lin_basis();
    auto gen = oracles::rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const std::vector<double> f = random_field(gen, ge.grid.size());
        const std::vector<double> Lf = apply_L(basis, ge.grid, f);
        const double lhs = detail::grid_dot(ge.grid, Lf, f);
        CHECK(lhs <= 0.0);
        std::vector<double> rest = f;
        const std::vector<double> Pf = project_P(basis, ge.grid, f);
        for (std::size_t i = 0; i < f.size(); ++i)
            rest[i] -= Pf[i];
        const double rhs = detail::grid_dot(ge.grid, rest, rest);
        CHECK(std::abs(lhs + rhs) <= 1e-12 * rhs);
    }
}

TEST_CASE("linearization residual is second order in the perturbation size")
{
    const GlobalEquilibrium& ge = lin_ge();
    const OrthoBasis& basis = lin_basis();

    SECTION("zero perturbation gives zero residual")
    {
        const std::vector<double> zero(ge.grid.size(), 0.0);
        CHECK(linearization_residual(ge, basis, zero, 1e-3) < 1e-14);
    }

    SECTION("r(eps)/eps^2 is stable over three decades")
    {
        auto gen = oracles::rng(47);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> g = random_field(gen, ge.grid.size());
            // normalize so the eps = 1e-2 state stays comfortably admissible
            const double nrm = std::sqrt(detail::grid_dot(ge.grid, g, g));
            for (double& v : g)
                v /= nrm;
            double lo = HUGE_VAL, hi = 0.0;
            for (double eps : { 1e-2, 1e-3, 1e-4 }) {
                const double ratio = linearization_residual(ge, basis, g, eps) / (eps * eps);
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
            CHECK(hi <= 2.0 * lo);
        }
    }

    SECTION("a microscopic perturbation leaves the equilibrium untouched")
    {
        auto gen = oracles::rng(53);
        std::vector<double> g = microscopic_part(ge, basis, random_field(gen, ge.grid.size()));
        const double nrm = std::sqrt(detail::grid_dot(ge.grid, g, g));
        for (double& v : g)
            v /= nrm;
        CHECK(linearization_residual(ge, basis, g, 1e-3) < 1e-10);
    }
}

TEST_CASE("coefficient derivatives: closed forms vs the inversion pipeline")
{
    const GlobalEquilibrium& ge = lin_ge();
    const CoefficientDerivatives d = coefficient_derivatives(ge);

    CHECK(d.dc_dP == 0.0);
    CHECK(d.da_dP == 0.0);

    // the shared denominator -E0 k + 9 N0^2/(10 a0) is negative on the branch,
    // so dc/dN and da/dE come out negative, dc/dE and da/dN positive
    CHECK(d.dc_dN < 0.0);
    CHECK(d.da_dE < 0.0);
    CHECK(d.dc_dE > 0.0);
    CHECK(d.da_dN > 0.0);

    auto c_of = [&](double N, double E) { return beta_inverse(moments_B({ N, {}, E })); };
    auto a_of = [&](double N, double E) {
        const double c = c_of(N, E);
        return std::pow(4.0 * M_PI * fd_integral(FdKind::plain, 2, c) / N, 2.0 / 3.0);
    };

    const double hN = 1e-6 * ge.N0;
    const double hE = 1e-6 * ge.E0;
    const double fd_dc_dN = (c_of(ge.N0 + hN, ge.E0) - c_of(ge.N0 - hN, ge.E0)) / (2.0 * hN);
    const double fd_dc_dE = (c_of(ge.N0, ge.E0 + hE) - c_of(ge.N0, ge.E0 - hE)) / (2.0 * hE);
    const double fd_da_dN = (a_of(ge.N0 + hN, ge.E0) - a_of(ge.N0 - hN, ge.E0)) / (2.0 * hN);
    const double fd_da_dE = (a_of(ge.N0, ge.E0 + hE) - a_of(ge.N0, ge.E0 - hE)) / (2.0 * hE);

    CHECK(d.dc_dN == Approx(fd_dc_dN).epsilon(1e-5));
    CHECK(d.dc_dE == Approx(fd_dc_dE).epsilon(1e-5));
    CHECK(d.da_dN == Approx(fd_da_dN).epsilon(1e-5));
    CHECK(d.da_dE == Approx(fd_da_dE).epsilon(1e-5));
}

TEST_CASE("Lemma-positivity holds across sampled admissible equilibria")
{
    auto gen = oracles::rng(59);
    std::uniform_real_distribution<double> da(0.3, 3.0);
    std::uniform_real_distribution<double> dc(-std::log(3.0) + 1e-3, 8.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a0 = da(gen);
        const double c0 = dc(gen);
        // continuum version of E0 k - 9 N0^2/(10 a0), no grid involved
        const double M0 = 4.0 * M_PI * fd_integral(FdKind::plain, 2, c0);
        const double M2 = 4.0 * M_PI * fd_integral(FdKind::plain, 4, c0);
        const double K = 2.0 * M_PI * fd_integral(FdKind::plain, 0, c0);
        const double N0 = std::pow(a0, -1.5) * M0;
        const double E0 = std::pow(a0, -2.5) * M2;
        const double k = std::pow(a0, -1.5) * K;
        CHECK(E0 * k - 9.0 * N0 * N0 / (10.0 * a0) > 0.0);
    }
}

TEST_CASE("equilibrium Gateaux derivatives match finite differences of the pipeline")
{
    // a modest grid keeps the finite-difference sweep cheap; the identity is pointwise
    const GlobalEquilibrium ge = GlobalEquilibrium::from_params(1.0, 0.3, VelocityGrid::make(6.0, 24));
    const VelocityGrid& g = ge.grid;

    const std::vector<double> dN = equilibrium_gateaux(ge, GateauxDirection::N);
    const std::vector<double> dP2 = equilibrium_gateaux(ge, GateauxDirection::P2);
    const std::vector<double> dE = equilibrium_gateaux(ge, GateauxDirection::E);

    // the derivative along P carries a bare factor p2: it vanishes wherever p2 = 0
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.py[i] == 0.0)
            CHECK(dP2[i] == 0.0);

    auto field_of = [&](double N, double E) {
        const FermiParams fp = invert_equilibrium({ N, {}, E });
        std::vector<double> out(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            out[i] = fermi_dirac_eval(fp, { g.px[i], g.py[i], g.pz[i] });
        return out;
    };
    auto field_of_P2 = [&](double P2) {
        const FermiParams fp = invert_equilibrium({ ge.N0, { 0.0, P2, 0.0 }, ge.E0 });
        std::vector<double> out(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            out[i] = fermi_dirac_eval(fp, { g.px[i], g.py[i], g.pz[i] });
        return out;
    };

    // N-direction value at p = 0 (off grid): -E0/(-E0 k + 9 N0^2/(10 a0)) (m - m^2)(0)
    {
        const double hN = 1e-6 * ge.N0;
        const double w0 = detail::fermi_weight_of_exponent(ge.c0);
        const double expected = -ge.E0 / (-ge.positivity()) * w0;
        const double fd0 = (fermi_dirac_eval(invert_equilibrium({ ge.N0 + hN, {}, ge.E0 }), { 0.0, 0.0, 0.0 })
                            - fermi_dirac_eval(invert_equilibrium({ ge.N0 - hN, {}, ge.E0 }), { 0.0, 0.0, 0.0 }))
            / (2.0 * hN);
        CHECK(fd0 == Approx(expected).epsilon(1e-5));
    }

    const double hN = 1e-6 * ge.N0;
    const double hE = 1e-6 * ge.E0;
    const std::vector<double> fN_p = field_of(ge.N0 + hN, ge.E0);
    const std::vector<double> fN_m = field_of(ge.N0 - hN, ge.E0);
    const std::vector<double> fE_p = field_of(ge.N0, ge.E0 + hE);
    const std::vector<double> fE_m = field_of(ge.N0, ge.E0 - hE);
    const std::vector<double> fP_p = field_of_P2(1e-6 * ge.N0);
    const std::vector<double> fP_m = field_of_P2(-1e-6 * ge.N0);

    double scaleN = 0.0, scaleE = 0.0, scaleP = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        scaleN = std::max(scaleN, std::abs(dN[i]));
        scaleE = std::max(scaleE, std::abs(dE[i]));
        scaleP = std::max(scaleP, std::abs(dP2[i]));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs((fN_p[i] - fN_m[i]) / (2.0 * hN) - dN[i]) <= 1e-5 * scaleN);
        CHECK(std::abs((fE_p[i] - fE_m[i]) / (2.0 * hE) - dE[i]) <= 1e-5 * scaleE);
        CHECK(std::abs((fP_p[i] - fP_m[i]) / (2e-6 * ge.N0) - dP2[i]) <= 1e-5 * scaleP);
    }
}

TEST_CASE("micro-macro decomposition")
{
    const GlobalEquilibrium& ge = lin_ge();
    const VelocityGrid& g = ge.grid;

    SECTION("f = sqrt(m-m^2) reproduces the quadrature moments of the weight")
    {
        const MicroMacro mm = micro_macro_decompose(ge.sqrt_w, ge, 1);
        // independent quadrature oracle for the moments of m - m^2
        double k_ref = 0.0, c_ref = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            k_ref += ge.w[i];
            c_ref += g.p2[i] * ge.w[i];
        }
        k_ref *= g.weight;
        c_ref *= g.weight;
        CHECK(mm.abar[0] == Approx(k_ref).epsilon(1e-12));
        CHECK(mm.cbar[0] == Approx(c_ref).epsilon(1e-12));
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(mm.bbar[j][0]) < 1e-14);
        // and the continuum identity <|p|^2 (m-m^2)> = 3 N0/(2 a0) holds to grid accuracy
        CHECK(mm.cbar[0] == Approx(1.5 * ge.N0 / ge.a0).epsilon(1e-8));
    }

    SECTION("odd perturbations carry no abar or cbar")
    {
        std::vector<double> f(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            f[i] = g.px[i] * ge.sqrt_w[i];
        const MicroMacro mm = micro_macro_decompose(f, ge, 1);
        CHECK(std::abs(mm.abar[0]) < 1e-14);
        CHECK(std::abs(mm.cbar[0]) < 1e-14);
        CHECK(mm.bbar[0][0] > 0.0);
    }

    SECTION("macro + micro reconstructs f; the split is not a projection")
    {
        auto gen = oracles::rng(61);
        const std::vector<double> f = random_field(gen, g.size());
        const MicroMacro mm = micro_macro_decompose(f, ge, 1);
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(mm.macro[i] + mm.micro[i] == Approx(f[i]).margin(1e-12));

        const MicroMacro again = micro_macro_decompose(mm.micro, ge, 1);
        const double residual_coeff = std::abs(again.abar[0]) + std::abs(again.cbar[0]);
        CHECK(residual_coeff > 1e-6); // the monomial family is not orthogonal
    }
}
