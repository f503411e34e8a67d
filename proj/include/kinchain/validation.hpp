// The acceptance invariant suite, shared by the acceptance test binary and
// the `validate` subcommand.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "kinchain/chain_sim.hpp"
#include "kinchain/experiments.hpp"
#include "kinchain/kinetic_solver.hpp"
#include "kinchain/phonon_mc.hpp"
#include "kinchain/scattering.hpp"
#include "kinchain/thermostat_coeffs.hpp"

namespace kinchain {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;
};

namespace validation {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

// Closed form for the nearest-neighbour unpinned chain: nu = 2|v| / (2|v| + gamma1).
inline double nu_unpinned_closed(double k, double gamma1) {
    const double v = std::abs(std::cos(kPi * k));
    return 2.0 * v / (2.0 * v + gamma1);
}

inline CriterionResult coefficient_normalization() {
    CriterionResult r{1, "coefficient normalization p+ + p- + g = 1", true, "", 0, 10};
    double worst = 0.0;
    for (const Dispersion& d : {Dispersion::nn_unpinned(), Dispersion::nn_pinned(1.0)})
        for (double g1 : {0.5, 1.0, 2.0}) {
            const auto c = interface_coefficients(TorusGrid(256), g1, d);
            for (std::size_t j = 0; j < c.size(); ++j)
                if (c.valid[j]) worst = std::max(worst, std::abs(c.p_plus[j] + c.p_minus[j] + c.g[j] - 1.0));
        }
    r.pass = worst <= 1e-8;
    r.detail = "max residual " + fmt(worst) + " (tol 1e-8)";
    return r;
}

inline CriterionResult nu_identity() {
    CriterionResult r{2, "identity Re nu = (1 + gamma1/(2|v|)) |nu|^2", true, "", 0, 30};
    double worst_u = 0.0, worst_p = 0.0, worst_closed = 0.0;
    for (double g1 : {0.5, 1.0, 2.0}) {
        for (int preset = 0; preset < 2; ++preset) {
            const Dispersion d = preset == 0 ? Dispersion::nn_unpinned() : Dispersion::nn_pinned(1.0);
            const auto c = interface_coefficients(TorusGrid(256), g1, d);
            for (std::size_t j = 0; j < c.size(); ++j) {
                if (!c.valid[j]) continue;
                const double v = std::abs(d.group_velocity(c.grid[j]));
                const double res = std::abs(c.nu[j].real() - (1.0 + g1 / (2.0 * v)) * std::norm(c.nu[j]));
                if (preset == 0) {
                    worst_u = std::max(worst_u, res);
                    worst_closed = std::max(worst_closed, std::abs(c.nu[j] - nu_unpinned_closed(c.grid[j], g1)));
                } else {
                    worst_p = std::max(worst_p, res);
                }
            }
        }
    }
    r.pass = worst_u <= 1e-6 && worst_closed <= 1e-6 && worst_p <= 1e-4;
    r.detail = "unpinned " + fmt(worst_u) + " (closed-form deviation " + fmt(worst_closed) + ", tol 1e-6), pinned " +
               fmt(worst_p) + " (tol 1e-4)";
    return r;
}

inline CriterionResult closed_form_quarter() {
    CriterionResult r{3, "closed-form oracle at k = 1/4, gamma1 = 1", true, "", 0, 10};
    const Dispersion d = Dispersion::nn_unpinned();
    const NuValue nv = nu(0.25, 1.0, d);
    const double v = std::abs(d.group_velocity(0.25));
    const cplx wp = nv.value / (2.0 * v);
    const double pp = std::norm(1.0 - wp), pm = std::norm(wp), g = std::norm(nv.value) / v;
    const double nu_ref = 2.0 - std::sqrt(2.0);  // 2 cos(pi/4) / (2 cos(pi/4) + 1)
    const double pp_ref = std::pow(1.0 - nu_ref / std::sqrt(2.0), 2.0);
    const double pm_ref = std::pow(nu_ref / std::sqrt(2.0), 2.0);
    const double g_ref = nu_ref * nu_ref * std::sqrt(2.0);
    const double err = std::max({std::abs(nv.value - nu_ref), std::abs(pp - pp_ref), std::abs(pm - pm_ref), std::abs(g - g_ref)});
    r.pass = err <= 1e-5 && std::abs(nu_ref - 0.5857864) < 1e-7 && std::abs(pp_ref - 0.3431458) < 1e-7 &&
             std::abs(pm_ref - 0.1715729) < 1e-7 && std::abs(g_ref - 0.4852814) < 1e-7;
    std::ostringstream os;
    os.precision(8);
    os << "nu " << nv.value.real() << ", (p+, p-, g) = (" << pp << ", " << pm << ", " << g << "), max dev " << fmt(err);
    r.detail = os.str();
    return r;
}

inline CriterionResult bessel_correlation() {
    CriterionResult r{4, "J(t) = J0(2t) for the unpinned chain", true, "", 0, 5};
    const Dispersion d = Dispersion::nn_unpinned();
    double worst = 0.0;
    for (int i = 0; i <= 50; ++i) {
        const double t = 20.0 * i / 50.0;
        worst = std::max(worst, std::abs(J_of_t(t, d) - std::cyl_bessel_j(0.0, 2.0 * t)));
    }
    r.pass = worst <= 1e-8;
    r.detail = "max |J - J0(2t)| " + fmt(worst) + " over 51 points (tol 1e-8)";
    return r;
}

inline CriterionResult kernel_normalization() {
    CriterionResult r{5, "kernel normalization int R(k,k') dk' = s^2(2k) + 2 s^2(k)", true, "", 0, 5};
    const TorusGrid grid(256);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double k = grid[j];
        const double integral = integrate_periodic([k](double kp) { return R_pair(k, kp); }, 1e-14);
        const double s2k = std::sin(2.0 * kPi * k), sk = std::sin(kPi * k);
        worst = std::max(worst, std::abs(integral - (s2k * s2k + 2.0 * sk * sk)));
    }
    r.pass = worst <= 1e-10;
    r.detail = "max deviation " + fmt(worst) + " on 256 cells (tol 1e-10)";
    return r;
}

inline CriterionResult l2_contraction() {
    CriterionResult r{6, "L2 contraction and energy identity", true, "", 0, 120};
    KineticParams p;
    p.gamma0 = 0.5;
    p.gamma1 = 1.0;
    p.L = 8.0;
    p.ny = 1024;
    p.nk = 128;
    const KineticSolver s(p);
    const PacketSpec pk{1.0, 0.25, -1.0, 0.25, 0.1};
    KineticField W = packet_limit_field(s.grid(), pk, 0.0);
    const std::size_t n_slabs = 20;  // t in [0, 2]
    std::vector<KineticField> at_slab{W};
    double worst_increase = 0.0;
    double prev = s.l2_norm(W);
    for (std::size_t n = 0; n < n_slabs; ++n) {
        W = s.solve(W, p.slab);
        const double cur = s.l2_norm(W);
        worst_increase = std::max(worst_increase, cur - prev);
        prev = cur;
        at_slab.push_back(W);
    }
    const double delta = 1e-3;
    double worst_rel = 0.0;
    for (int m = 0; m < 10; ++m) {
        const double ts = 0.15 + 0.2 * m;
        const auto b = static_cast<std::size_t>(std::floor(ts / p.slab));
        const double off = ts - static_cast<double>(b) * p.slab;
        const KineticField& base = at_slab[b];
        const double nm = s.l2_norm(s.solve(base, off - delta));
        const double np = s.l2_norm(s.solve(base, off + delta));
        const double lhs = 0.5 * (np * np - nm * nm) / (2.0 * delta);  // (1/2) d/dt ||W||^2
        const double rhs = s.dissipation_rate(s.solve(base, off));
        worst_rel = std::max(worst_rel, std::abs(lhs - rhs) / std::abs(rhs));
    }
    r.pass = worst_increase <= 1e-8 && worst_rel <= 1e-4;
    r.detail = "max per-step norm increase " + fmt(worst_increase) + " (tol 1e-8); identity max rel error " +
               fmt(worst_rel) + " at 10 times (tol 1e-4)";
    return r;
}

inline CriterionResult stationarity(std::uint64_t seed = 1) {
    CriterionResult r{7, "stationarity of W = T (solver and particles)", true, "", 0, 120};
    KineticParams p;
    p.gamma0 = 0.5;
    p.gamma1 = 1.0;
    p.T = 0.5;
    const KineticSolver s(p);
    const KineticField W0 = s.make_field([](double, double) { return 0.5; });
    const KineticField W = s.solve(W0, 1.0);
    double dev = 0.0;
    for (double x : W.W) dev = std::max(dev, std::abs(x - 0.5));
    McParams mc;
    mc.n_particles = 100000;
    mc.seed = seed;
    const McResult m = run_mc(W0, 1.0, s, mc);
    double zmax = 0.0;
    int bad = 0;
    for (const auto& c : coarsen(m, 8, 8)) {
        const double z = std::abs(c.value - 0.5) / c.std_error;
        zmax = std::max(zmax, z);
        if (z > 3.0) ++bad;
    }
    r.pass = dev <= 1e-6 && bad == 0;
    r.detail = "solver max|W - T| " + fmt(dev) + " (tol 1e-6); particles max |z| " + fmt(zmax) +
               " on 64 coarse cells (" + std::to_string(bad) + " beyond 3 sigma)";
    return r;
}

/// Twenty probes placed where the packet solution carries mass at t = 1.
inline std::vector<TestFunction> cross_solver_probes() {
    std::vector<TestFunction> G;
    const double kc[4] = {0.0, 0.2, -0.2, 0.35};
    for (int i = 0; i < 20; ++i) {
        TestFunction g;
        g.yc = -1.5 + 0.1 * i;
        g.width = 0.2;
        const double c = kc[i % 4];
        g.k_factor = [c](double k) { return 1.0 + std::cos(kTwoPi * (k - c)); };
        g.label = "G" + std::to_string(i);
        G.push_back(g);
    }
    return G;
}

inline CriterionResult cross_solver(std::uint64_t seed = 1) {
    CriterionResult r{8, "solver vs particles on a packet, 20 probes", true, "", 0, 300};
    const auto G = cross_solver_probes();
    double zmax = 0.0;
    int bad = 0;
    for (double T : {0.0, 0.5}) {
        KineticParams p;
        p.gamma0 = 0.5;
        p.gamma1 = 1.0;
        p.T = T;
        const KineticSolver s(p);
        const KineticField W0 = packet_limit_field(s.grid(), PacketSpec{1.0, 0.25, -1.0, 0.25, 0.1}, T);
        const KineticField W = s.solve(W0, 1.0);
        McParams mc;
        mc.n_particles = 100000;
        mc.seed = seed;
        const McResult m = run_mc(W0, 1.0, s, mc, G);
        for (std::size_t q = 0; q < G.size(); ++q) {
            const double z = std::abs(m.probes[q].value - s.pair_field(W, G[q])) / m.probes[q].std_error;
            zmax = std::max(zmax, z);
            if (z > 3.0) ++bad;
        }
    }
    r.pass = bad == 0;
    r.detail = "max |z| " + fmt(zmax) + " over 40 comparisons (T = 0, 0.5), " + std::to_string(bad) + " beyond 3 sigma";
    return r;
}

inline CriterionResult microscopic_oracle(std::uint64_t seed = 1) {
    CriterionResult r{9, "chain second moments vs exact covariance evolution", true, "", 0, 300};
    ChainParams P;
    P.N = 8;
    P.eps = 1.0;
    P.gamma0 = 1.0;
    P.gamma1 = 1.0;
    P.T = 0.5;
    const std::size_t N = P.N, D = 2 * N, M = 10000;
    const double t = 5.0, dt = 0.005;
    std::vector<double> X0(D);
    for (std::size_t i = 0; i < N; ++i) {
        X0[i] = 0.3 * std::cos(1.0 + static_cast<double>(i));
        X0[N + i] = (i == 2 ? 1.0 : 0.0) + 0.2 * std::sin(0.5 * static_cast<double>(i));
    }
    std::vector<double> M0(D * D);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) M0[i * D + j] = X0[i] * X0[j];
    const auto Mex = evolve_covariance_exact(P, M0, t);
    const ChainModel model(P);
    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    std::vector<std::vector<double>> finals(M);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t mi = 0; mi < static_cast<std::ptrdiff_t>(M); ++mi) {
        ChainState s = model.zero_state(seed, static_cast<std::uint64_t>(mi));
        s.q.assign(X0.begin(), X0.begin() + static_cast<std::ptrdiff_t>(N));
        s.p.assign(X0.begin() + static_cast<std::ptrdiff_t>(N), X0.end());
        model.advance(s, dt, steps);
        std::vector<double> X(D);
        for (std::size_t i = 0; i < N; ++i) {
            X[i] = s.q[i];
            X[N + i] = s.p[i];
        }
        finals[static_cast<std::size_t>(mi)] = X;
    }
    double zmax = 0.0;
    int bad = 0, entries = 0;
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = i; j < D; ++j) {
            std::vector<double> v(M);
            for (std::size_t m = 0; m < M; ++m) v[m] = finals[m][i] * finals[m][j];
            const double mean = pairwise_sum(v) / static_cast<double>(M);
            for (auto& x : v) x = (x - mean) * (x - mean);
            const double se = std::sqrt(pairwise_sum(v) / static_cast<double>(M - 1) / static_cast<double>(M));
            const double z = std::abs(mean - Mex[i * D + j]) / se;
            zmax = std::max(zmax, z);
            ++entries;
            if (z > 3.0) ++bad;
        }
    r.pass = bad == 0;
    r.detail = "max |z| " + fmt(zmax) + " over " + std::to_string(entries) + " entries (" + std::to_string(bad) +
               " beyond 3 sigma), dt = 0.005, 1e4 trajectories";
    return r;
}

inline CriterionResult kinetic_limit(const ExperimentConfig& cfg = ExperimentConfig{}) {
    CriterionResult r{10, "kinetic-limit probe d(eps) decreasing", true, "", 0, 1800};
    const ConvergeResult c = run_converge(cfg);
    bool decreasing = true;
    for (std::size_t i = 1; i < c.rows.size(); ++i) decreasing = decreasing && c.rows[i].d < c.rows[i - 1].d;
    double supG = 0.0;
    for (double s : c.sup_G) supG = std::max(supG, s);
    const double bound = 0.08 * supG * c.energy_scale;
    const double last = c.rows.empty() ? 0.0 : c.rows.back().d;
    r.pass = decreasing && last <= bound;
    std::ostringstream os;
    os << "d = ";
    for (const auto& row : c.rows) os << fmt(row.d) << " (eps " << row.eps << ") ";
    os << "; bound 0.08 max|G| E = " << fmt(bound);
    r.detail = os.str();
    return r;
}

inline CriterionResult energy_monotonicity(std::uint64_t seed = 1) {
    CriterionResult r{11, "chain energy nonincreasing (T = 0) and bounded growth (T > 0)", true, "", 0, 300};
    const double e = 1.0 / 32.0;
    const PacketSpec pk{1.0, 0.25, -0.4, 0.25, 0.1};
    double worst0 = -1e300, worstT = -1e300;
    for (double T : {0.0, 0.5}) {
        ChainEnsembleSpec spec;
        spec.params = ChainParams{CouplingSpec::nn_unpinned(), 256, e, 0.5, 1.0, T};
        spec.packet = pk;
        spec.t_micro = 0.5 / e;
        spec.members = 400;
        spec.seed = seed;
        spec.outputs = 20;
        const ChainEnsembleResult ens = run_chain_ensemble(spec);
        for (std::size_t o = 1; o < ens.times.size(); ++o) {
            if (T == 0.0) {
                // excess over the previous output, in units of the standard error
                const double se = std::max(ens.energy_se[o], 1e-300);
                worst0 = std::max(worst0, (ens.energy_mean[o] - ens.energy_mean[o - 1]) / se);
            } else {
                const double se = std::max(ens.energy_se[o], 1e-300);
                const double growth = ens.energy_mean[o] - ens.energy_mean[0] - spec.params.gamma1 * T * ens.times[o];
                worstT = std::max(worstT, growth / se);
            }
        }
    }
    r.pass = worst0 <= 2.0 && worstT <= 2.0;
    r.detail = "T = 0: max increase " + fmt(worst0) + " SE; T = 0.5: max excess over gamma1 T t " + fmt(worstT) +
               " SE (tol 2 SE)";
    return r;
}

inline CriterionResult timed(const std::function<CriterionResult()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r = f();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.budget_seconds > 0.0 && r.seconds > r.budget_seconds) {
        r.pass = false;
        r.detail += "; over the runtime budget of " + fmt(r.budget_seconds) + " s";
    }
    return r;
}

}  // namespace validation

/// Runs criteria 1..11 (or the subset in `only`), in order.
inline std::vector<CriterionResult> run_validation(const std::vector<int>& only = {},
                                                   const std::function<void(const CriterionResult&)>& report = {}) {
    using namespace validation;
    const std::vector<std::function<CriterionResult()>> all{
        coefficient_normalization, nu_identity, closed_form_quarter, bessel_correlation,
        kernel_normalization,      l2_contraction, [] { return stationarity(); }, [] { return cross_solver(); },
        [] { return microscopic_oracle(); }, [] { return kinetic_limit(); }, [] { return energy_monotonicity(); }};
    std::vector<CriterionResult> out;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        CriterionResult r;
        try {
            r = timed(all[i]);
        } catch (const std::exception& e) {
            r.id = id;
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        out.push_back(r);
        if (report) report(r);
    }
    return out;
}

}  // namespace kinchain
