#include <gtest/gtest.h>

#include <cmath>

#include "kinchain/experiments.hpp"
#include "kinchain/kinetic_solver.hpp"
#include "kinchain/phonon_mc.hpp"

using namespace kinchain;

namespace {

KineticParams base(double g0, double g1, double T) {
    KineticParams p;
    p.gamma0 = g0;
    p.gamma1 = g1;
    p.T = T;
    return p;
}

double indicator_left(double y, double) { return (y >= -1.0 && y <= 0.0) ? 1.0 : 0.0; }

double max_abs_diff(const KineticField& a, const KineticField& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.W.size(); ++n) m = std::max(m, std::abs(a.W[n] - b.W[n]));
    return m;
}

// Unpinned chain, gamma1 = 1, k = 1/4: nu = 2|c| / (2|c| + 1) with |c| = |v| = cos(pi/4).
double p_plus_quarter() {
    const double c = std::sqrt(2.0) / 2.0;
    const double nu = 2.0 * c / (2.0 * c + 1.0);
    const double v = std::cos(kPi * 0.25);
    const double wp = nu / (2.0 * v);
    return (1.0 - wp) * (1.0 - wp);
}

}  // namespace

TEST(FreeFlowPoint, TransmittedIndicator) {
    const KineticSolver s(base(0.0, 1.0, 0.0));
    EXPECT_NEAR(s.free_flow_point(indicator_left, 0.5, 0.25, 1.0), 0.34314575, 1e-7);
    EXPECT_NEAR(s.free_flow_point(indicator_left, 0.5, 0.25, 1.0), p_plus_quarter(), 1e-9);
    EXPECT_EQ(s.free_flow_point(indicator_left, 1.0, 0.25, 1.0), 0.0);
}

TEST(FreeFlow, ConstantAtTemperatureIsStationary) {
    const KineticSolver s(base(0.0, 1.0, 0.7));
    const KineticField W0(s.grid(), 0.7);
    for (double t : {0.3, 1.0, 2.5}) {
        const KineticField W = s.free_flow_interface(W0, t);
        // p+ + p- + g = 1 holds to the quadrature tolerance of the table (~1e-11).
        for (double w : W.W) ASSERT_NEAR(w, 0.7, 1e-10) << "t=" << t;
    }
}

TEST(FreeFlow, GridMatchesCharacteristics) {
    // Smooth data; the grid solution differs from the pointwise one only by interpolation.
    const KineticSolver s(base(0.5, 1.0, 0.3));
    auto f = [](double y, double k) { return 0.3 + std::exp(-(y + 0.6) * (y + 0.6) / 0.1) * (1.0 + 0.5 * std::cos(kTwoPi * k)); };
    const KineticField W = s.free_flow_interface(s.make_field(f), 0.7);
    const auto& g = s.grid();
    double worst = 0.0;
    for (std::size_t i = 0; i < g.ny; ++i)
        for (std::size_t j = 0; j < g.nk(); ++j) {
            if (!s.rule().coeffs.valid[j] || std::abs(g.y(i)) > 3.0) continue;
            worst = std::max(worst, std::abs(W.at(i, j) - s.free_flow_point(f, g.y(i), g.k(j), 0.7)));
        }
    EXPECT_LT(worst, 2e-3);
}

TEST(FreeFlow, NonCrossingCharacteristicsDecayExactly) {
    const KineticSolver s(base(0.5, 1.0, 0.0));
    // Constant in y on each side, so interpolation is exact away from the crossing layer.
    auto f = [](double y, double k) { return y < 0.0 ? 1.0 + std::sin(kTwoPi * k) * 0.5 : 0.0; };
    const double t = 0.4;
    const KineticField W = s.free_flow_interface(s.make_field(f), t);
    const auto& g = s.grid();
    for (std::size_t j = 0; j < g.nk(); ++j) {
        const double a = s.loss_rate(j);
        for (std::size_t i = 0; i < g.ny / 2; ++i) {
            const double y = g.y(i);
            if (y > -std::abs(s.velocity(j)) * t - 0.05 || y < -3.5) continue;
            ASSERT_NEAR(W.at(i, j), std::exp(-a * t) * f(y, g.k(j)), 1e-12);
        }
    }
}

TEST(SolveKinetic, NoScatteringEqualsFreeFlow) {
    const KineticSolver s(base(0.0, 1.0, 0.4));
    const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{1.0, 0.25, -0.5, 0.25, 0.1}, 0.4);
    EXPECT_LE(max_abs_diff(s.solve(W0, 0.8), s.free_flow_interface(W0, 0.8)), 1e-12);
}

TEST(SolveKinetic, ThermalEquilibriumIsStationary) {
    const KineticSolver s(base(0.5, 1.0, 0.7));
    const KineticField W = s.solve(KineticField(s.grid(), 0.7), 1.0);
    double worst = 0.0;
    for (double w : W.W) worst = std::max(worst, std::abs(w - 0.7));
    EXPECT_LE(worst, 1e-6);
}

TEST(SolveKinetic, PositivityPreserved) {
    const KineticSolver s(base(0.5, 1.0, 0.2));
    const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{1.0, 0.2, -0.3, 0.3, 0.1}, 0.0);
    const KineticField W = s.solve(W0, 0.6);
    for (double w : W.W) ASSERT_GE(w, -1e-12);
}

TEST(SolveKinetic, SemigroupOnSlabBoundaries) {
    const KineticSolver s(base(0.5, 1.0, 0.3));
    const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{1.0, 0.25, -0.5, 0.25, 0.1}, 0.3);
    const KineticField once = s.solve(W0, 0.5);
    const KineticField twice = s.solve(s.solve(W0, 0.3), 0.2);
    EXPECT_LE(max_abs_diff(once, twice), 1e-8);
    EXPECT_NEAR(twice.t, 0.5, 1e-14);
}

TEST(SolveKinetic, CutoffPathAgreesWithCreationPath) {
    KineticParams p = base(0.5, 1.0, 0.7);
    const KineticSolver direct(p);
    p.chi_path = true;
    const KineticSolver chi(p);
    const KineticField W0 = packet_limit_field(direct.grid(), PacketSpec{1.0, 0.25, -0.5, 0.25, 0.1}, 0.7);
    const KineticField a = direct.solve(W0, 0.5);
    const KineticField b = chi.solve(W0, 0.5);
    // Limited by the steep derivatives of the cutoff on dy = 1/64.
    EXPECT_LE(max_abs_diff(a, b), 3e-3);
    // Both keep the equilibrium.
    const KineticField e = chi.solve(KineticField(chi.grid(), 0.7), 0.5);
    for (double w : e.W) ASSERT_NEAR(w, 0.7, 5e-3);
}

TEST(SolveKinetic, AgreesWithParticlesWithoutInterface) {
    const KineticSolver s(base(0.5, 0.0, 0.0));
    const KineticField W0 = s.make_field(indicator_left);
    const KineticField W = s.solve(W0, 0.5);
    std::vector<TestFunction> G;
    for (int i = 0; i < 8; ++i) {
        TestFunction g;
        g.yc = -1.4 + 0.25 * i;
        g.width = 0.2;
        const double c = 0.1 * i;
        g.k_factor = [c](double k) { return 1.0 + std::cos(kTwoPi * (k - c)); };
        G.push_back(g);
    }
    McParams mc;
    mc.n_particles = 200000;
    mc.seed = 11;
    const McResult m = run_mc(W0, 0.5, s, mc, G);
    for (std::size_t q = 0; q < G.size(); ++q) {
        const double ref = s.pair_field(W, G[q]);
        EXPECT_LE(std::abs(m.probes[q].value - ref), 3.0 * m.probes[q].std_error)
            << "probe " << q << " solver " << ref << " particles " << m.probes[q].value;
    }
}

TEST(SolveKinetic, PicardFailureIsReported) {
    KineticParams p = base(0.5, 1.0, 0.0);
    p.picard_max = 1;
    p.picard_tol = 1e-300;
    const KineticSolver s(p);
    const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{}, 0.0);
    try {
        s.solve(W0, 0.1);
        FAIL() << "expected non-convergence";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("did not converge"), std::string::npos);
    }
}

TEST(SolveKinetic, RejectsBadInput) {
    const KineticSolver s(base(0.5, 1.0, 0.0));
    KineticParams q = base(0.5, 1.0, 0.0);
    q.ny = 64;
    const KineticSolver other(q);
    EXPECT_THROW(s.solve(KineticField(other.grid()), 0.1), std::invalid_argument);
    EXPECT_THROW(s.solve(KineticField(s.grid()), -0.1), std::domain_error);
    EXPECT_THROW(KineticSolver(base(-1.0, 1.0, 0.0)), std::invalid_argument);
}

TEST(Energy, ZeroFieldHasNoNormAndNoDissipation) {
    const KineticSolver s(base(0.5, 1.0, 0.0));
    const KineticField Z(s.grid());
    EXPECT_EQ(s.l2_norm(Z), 0.0);
    EXPECT_EQ(s.dissipation_rate(Z), 0.0);
}

TEST(Energy, NormIsNonincreasingAtZeroTemperature) {
    const KineticSolver s(base(0.5, 1.0, 0.0));
    KineticField W = packet_limit_field(s.grid(), PacketSpec{1.0, 0.25, -0.6, 0.25, 0.1}, 0.0);
    double prev = s.l2_norm(W);
    for (int n = 0; n < 15; ++n) {
        W = s.solve(W, 0.1);
        const double now = s.l2_norm(W);
        ASSERT_LE(now, prev * (1.0 + 1e-12)) << "slab " << n;
        EXPECT_LE(s.dissipation_rate(W), 1e-10);
        prev = now;
    }
}

TEST(Energy, NormMatchesQuadrature) {
    const KineticSolver s(base(0.5, 1.0, 0.0));
    // int_{-1}^{0} int_T (1 + cos 2 pi k)^2 dk dy = 3/2
    const KineticField W = s.make_field([](double y, double k) { return (y > -1.0 && y < 0.0) ? 1.0 + std::cos(kTwoPi * k) : 0.0; });
    EXPECT_NEAR(s.l2_norm(W), std::sqrt(1.5), 1e-12);
}

TEST(Interface, ResidualShrinksWithTheGrid) {
    double prev = 1e9;
    for (std::size_t ny : {256, 512, 1024}) {
        KineticParams p = base(0.0, 1.0, 0.5);
        p.ny = ny;
        p.nk = 64;
        const KineticSolver s(p);
        const KineticField W = s.solve(packet_limit_field(s.grid(), PacketSpec{1.0, 0.25, -0.5, 0.25, 0.1}, 0.5), 0.6);
        const double r = s.interface_residual(W);
        EXPECT_LT(r, prev) << "ny=" << ny;
        prev = r;
    }
    EXPECT_LT(prev, 5e-2);
}

TEST(Chi, CutoffShape) {
    EXPECT_EQ(chi_cutoff(0.0), 1.0);
    EXPECT_EQ(chi_cutoff(0.5), 1.0);
    EXPECT_EQ(chi_cutoff(-1.0), 0.0);
    for (double y = -1.2; y <= 1.2; y += 0.01) {
        EXPECT_DOUBLE_EQ(chi_cutoff(y), chi_cutoff(-y));
        EXPECT_GE(chi_cutoff(y), 0.0);
        EXPECT_LE(chi_cutoff(y), 1.0);
        const double h = 1e-6;
        EXPECT_NEAR(chi_cutoff_prime(y), (chi_cutoff(y + h) - chi_cutoff(y - h)) / (2 * h), 1e-5) << y;
    }
}
