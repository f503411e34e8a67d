#include <gtest/gtest.h>

#include <cmath>

#include "kinchain/experiments.hpp"
#include "kinchain/kinetic_solver.hpp"
#include "kinchain/phonon_mc.hpp"

using namespace kinchain;

namespace {

KineticParams params(double g0, double g1, double T, std::size_t ny = 512, std::size_t nk = 256) {
    KineticParams p;
    p.gamma0 = g0;
    p.gamma1 = g1;
    p.T = T;
    p.ny = ny;
    p.nk = nk;
    return p;
}

struct Freq {
    double transmit = 0, reflect = 0, absorb = 0;
};

Freq draw_many(double k, const InterfaceRule& rule, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t c[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) ++c[static_cast<int>(interface_event(k, rule, rng))];
    const double dn = static_cast<double>(n);
    return {c[0] / dn, c[1] / dn, c[2] / dn};
}

double binomial_sigma(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

std::vector<TestFunction> probes_between(double lo, double hi, int n) {
    std::vector<TestFunction> G;
    for (int i = 0; i < n; ++i) {
        TestFunction g;
        g.yc = lo + (hi - lo) * i / (n - 1);
        g.width = 0.2;
        const double c = 0.13 * i;
        g.k_factor = [c](double k) { return 1.0 + std::cos(kTwoPi * (k - c)); };
        G.push_back(g);
    }
    return G;
}

}  // namespace

TEST(Interface, NoThermostatAlwaysTransmits) {
    const KineticSolver s(params(0.0, 0.0, 0.0, 64, 64));
    std::mt19937_64 rng(3);
    for (double k : {-0.499, -0.3, -0.001, 0.0005, 0.25, 0.49})
        for (int n = 0; n < 1000; ++n) ASSERT_EQ(interface_event(k, s.rule(), rng), InterfaceOutcome::Transmit);
}

TEST(Interface, FrequenciesAtQuarterMode) {
    // nk = 254 puts a cell centre exactly on k = 1/4.
    const KineticSolver s(params(0.0, 1.0, 0.0, 64, 254));
    const std::size_t n = 1000000;
    const Freq f = draw_many(0.25, s.rule(), n, 17);
    const double pp = 0.34314575, pm = 0.17157288, g = 0.48528137;
    EXPECT_LE(std::abs(f.transmit - pp), 3.0 * binomial_sigma(pp, n));
    EXPECT_LE(std::abs(f.reflect - pm), 3.0 * binomial_sigma(pm, n));
    EXPECT_LE(std::abs(f.absorb - g), 3.0 * binomial_sigma(g, n));
}

TEST(Interface, StrongThermostatReflects) {
    const KineticSolver s(params(0.0, 1000.0, 0.0, 64, 254));
    const Freq f = draw_many(0.25, s.rule(), 100000, 5);
    EXPECT_GT(f.reflect, 0.98);
}

TEST(Interface, BandEdgeCellsRejected) {
    const KineticSolver s(params(0.0, 1.0, 0.0, 64, 256));
    std::mt19937_64 rng(1);
    EXPECT_THROW(interface_event(0.001, s.rule(), rng), std::domain_error);
    EXPECT_THROW(interface_event(0.4995, s.rule(), rng), std::domain_error);
    EXPECT_NO_THROW(interface_event(0.2, s.rule(), rng));
}

TEST(Clock, SurvivalMatchesExponential) {
    const std::size_t n = 1000000;
    for (double k : {0.1, 0.25, 0.4}) {
        const double expect = std::exp(-2.0 * 0.5 * R_total(k) * 0.8);
        const double got = survival_without_scatter(k, 0.5, 0.8, n, 9);
        EXPECT_LE(std::abs(got - expect), 3.0 * binomial_sigma(expect, n)) << "k=" << k;
    }
    std::mt19937_64 rng(1);
    EXPECT_TRUE(std::isinf(scatter_clock(0.25, 0.0, rng)));
}

TEST(Transport, PureTransportMatchesShiftedData) {
    // gamma0 = gamma1 = 0: particles carry the piecewise-constant grid data along
    // y -> y + v(k) t, so each probe equals a sum of exact cell integrals.
    const KineticSolver s(params(0.0, 0.0, 0.0, 128, 64));
    const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{1.0, 0.3, -0.8, 0.2, 0.15}, 0.0);
    const double t = 0.7;
    const auto G = probes_between(-1.2, 0.6, 10);
    McParams mc;
    mc.n_particles = 200000;
    mc.seed = 4;
    const McResult m = run_mc(W0, t, s, mc, G);

    const auto& g = s.grid();
    const Dispersion& d = s.dispersion();
    const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)}, gw[3] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
    for (std::size_t q = 0; q < G.size(); ++q) {
        double exact = 0.0;
        for (std::size_t i = 0; i < g.ny; ++i)
            for (std::size_t j = 0; j < g.nk(); ++j) {
                const double w = W0.at(i, j);
                if (w == 0.0) continue;
                double cell = 0.0;
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) {
                        const double y = g.y(i) + 0.5 * g.dy() * gx[a];
                        const double k = g.k(j) + 0.5 * g.dk() * gx[b];
                        cell += gw[a] * gw[b] * G[q](y + d.group_velocity(k) * t, k);
                    }
                exact += w * cell * 0.25 * g.dy() * g.dk();
            }
        EXPECT_LE(std::abs(m.probes[q].value - exact), 3.0 * m.probes[q].std_error)
            << "probe " << q << " exact " << exact << " mc " << m.probes[q].value;
    }
    // Nothing is absorbed without the thermostat.
    EXPECT_NEAR(m.alive_weight, m.initial_weight, 1e-9 * m.initial_weight);
    EXPECT_NEAR(m.initial_weight, s.total_mass(W0), 1e-12);
}

TEST(Transport, ScatteringConservesWeight) {
    const KineticSolver s(params(0.5, 0.0, 0.0, 128, 64));
    const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{}, 0.0);
    McParams mc;
    mc.n_particles = 50000;
    const McResult m = run_mc(W0, 1.0, s, mc);
    EXPECT_NEAR(m.alive_weight, m.initial_weight, 1e-9 * m.initial_weight);
}

TEST(Equilibrium, ConstantTemperatureIsStationaryOnBlocks) {
    const KineticSolver s(params(0.5, 1.0, 0.5));
    McParams mc;
    mc.n_particles = 200000;
    mc.seed = 21;
    const McResult m = run_mc(KineticField(s.grid(), 0.5), 1.0, s, mc);
    int bad = 0;
    double zmax = 0.0;
    for (const auto& c : coarsen(m, 8, 8)) {
        const double z = std::abs(c.value - 0.5) / c.std_error;
        zmax = std::max(zmax, z);
        if (z > 3.0) ++bad;
    }
    EXPECT_EQ(bad, 0) << "max |z| " << zmax;
    EXPECT_GT(m.n_emitted, 0u);
}

TEST(Determinism, SameSeedSameResult) {
    const KineticSolver s(params(0.5, 1.0, 0.2, 128, 64));
    const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{}, 0.2);
    const auto G = probes_between(-1.0, 1.0, 3);
    McParams mc;
    mc.n_particles = 20000;
    mc.seed = 8;
    const McResult a = run_mc(W0, 0.5, s, mc, G);
    const McResult b = run_mc(W0, 0.5, s, mc, G);
    EXPECT_EQ(a.W.W, b.W.W);
    for (std::size_t q = 0; q < G.size(); ++q) EXPECT_EQ(a.probes[q].value, b.probes[q].value);
    mc.seed = 9;
    const McResult c = run_mc(W0, 0.5, s, mc, G);
    EXPECT_NE(a.probes[0].value, c.probes[0].value);
}

TEST(Errors, BadInputRejected) {
    const KineticSolver s(params(0.5, 1.0, 0.0, 128, 64));
    const KineticSolver other(params(0.5, 1.0, 0.0, 64, 64));
    McParams mc;
    mc.n_particles = 100;
    EXPECT_THROW(run_mc(KineticField(other.grid(), 1.0), 0.1, s, mc), std::invalid_argument);
    EXPECT_THROW(run_mc(KineticField(s.grid(), -1.0), 0.1, s, mc), std::invalid_argument);
    EXPECT_THROW(run_mc(KineticField(s.grid(), 1.0), -0.1, s, mc), std::domain_error);
    mc.block = 0;
    EXPECT_THROW(run_mc(KineticField(s.grid(), 1.0), 0.1, s, mc), std::invalid_argument);
}

TEST(Coarsen, BlocksMustDivideGrid) {
    const KineticSolver s(params(0.0, 0.0, 0.0, 128, 64));
    McParams mc;
    mc.n_particles = 1000;
    const McResult m = run_mc(KineticField(s.grid(), 1.0), 0.0, s, mc);
    EXPECT_THROW(coarsen(m, 7, 8), std::invalid_argument);
    // Sampling is stratified in cumulative mass, row by row, so at t = 0 whole
    // y-bands hold exactly their share.
    for (const auto& c : coarsen(m, 4, 1)) EXPECT_NEAR(c.value, 1.0, 1e-12);
}
