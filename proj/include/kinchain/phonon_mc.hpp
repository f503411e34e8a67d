// Monte Carlo particle solver for the kinetic interface problem.
//
// Particles move with velocity v(k) = omega'(k)/(2 pi), scatter at rate
// 2 gamma0 R(k) to k' ~ R(k, .)/R(k), and at y = 0 are transmitted,
// reflected or absorbed. For T > 0 the interface emits particles at rate
// T g(k) |v(k)| per unit time and per dk. Event driven, no time step.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinchain/kinetic_solver.hpp"
#include "kinchain/scattering.hpp"
#include "kinchain/wigner.hpp"

namespace kinchain {

enum class InterfaceOutcome { Transmit, Reflect, Absorb };

inline InterfaceOutcome interface_draw(const std::array<double, 3>& p, std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < p[0]) return InterfaceOutcome::Transmit;
    if (u < p[0] + p[1]) return InterfaceOutcome::Reflect;
    return InterfaceOutcome::Absorb;
}

/// Outcome for a particle of mode k hitting the interface, with the
/// coefficients interpolated linearly between cell centres. Band-edge
/// cells have no coefficients and are rejected.
inline InterfaceOutcome interface_event(double k, const InterfaceRule& rule, std::mt19937_64& rng) {
    if (rule.coeffs.gamma1 > 0.0 && !rule.coeffs.valid[rule.coeffs.grid.cell_of(k)])
        throw std::domain_error("interface_event: k lies in a band-edge cell");
    return interface_draw(rule.at(k), rng);
}

struct Particle {
    double y = 0.0;
    double k = 0.0;
    double w = 0.0;
    bool alive = true;
};

struct McParams {
    std::size_t n_particles = 100000;
    std::uint64_t seed = 1;
    std::size_t block = 2048;           // particles per RNG stream
    std::size_t max_particles = 50000000;
    bool buffer = true;                 // extend the sampled region beyond the window
};

struct ProbeEstimate {
    std::string label;
    double value = 0.0;
    double std_error = 0.0;
};

/// Raw tallies of one independent particle group: per-cell sums of
/// contributions and of their squares.
struct McGroup {
    std::size_t n = 0;
    std::vector<double> s1, s2;
};

struct McResult {
    KineticField W;       // histogram density on the solver grid
    KineticField W_se;    // per-cell standard error
    std::vector<ProbeEstimate> probes;
    double initial_weight = 0.0;
    double emitted_weight = 0.0;
    double alive_weight = 0.0;  // total weight alive at time t (anywhere)
    std::size_t n_initial = 0;
    std::size_t n_emitted = 0;
    std::vector<std::string> warnings;
    McGroup initial, emitted;
};

// Unbiased variance of a sum of n iid contributions with sums s1, s2.
inline double sum_variance(double s1, double s2, std::size_t n) {
    if (n < 2) return 0.0;
    const double dn = static_cast<double>(n);
    return std::max(0.0, (s2 - s1 * s1 / dn) * dn / (dn - 1.0));
}

struct CoarseCell {
    double y0, y1, k0, k1;
    double value;      // mean density over the block
    double std_error;
};

/// Histogram averaged over blocks of (ny/by) x (nk/bk) cells.
inline std::vector<CoarseCell> coarsen(const McResult& r, std::size_t by, std::size_t bk) {
    const KineticGrid& g = r.W.grid;
    if (by == 0 || bk == 0 || g.ny % by != 0 || g.nk() % bk != 0)
        throw std::invalid_argument("coarsen: block counts must divide the grid");
    const std::size_t cy = g.ny / by, ck = g.nk() / bk;
    const double f = 1.0 / static_cast<double>(cy * ck);
    std::vector<CoarseCell> out;
    for (std::size_t a = 0; a < by; ++a)
        for (std::size_t b = 0; b < bk; ++b) {
            double value = 0.0, var = 0.0;
            for (const McGroup* grp : {&r.initial, &r.emitted}) {
                if (grp->n == 0) continue;
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t i = a * cy; i < (a + 1) * cy; ++i)
                    for (std::size_t j = b * ck; j < (b + 1) * ck; ++j) {
                        s1 += grp->s1[i * g.nk() + j] * f;
                        s2 += grp->s2[i * g.nk() + j] * f * f;
                    }
                value += s1;
                var += sum_variance(s1, s2, grp->n);
            }
            out.push_back({g.y(a * cy) - 0.5 * g.dy(), g.y((a + 1) * cy - 1) + 0.5 * g.dy(),
                           g.k(b * ck) - 0.5 * g.dk(), g.k((b + 1) * ck - 1) + 0.5 * g.dk(), value,
                           std::sqrt(var)});
        }
    return out;
}

/// Exponential scattering clock at rate 2 gamma0 R(k); infinite when the rate vanishes.
inline double scatter_clock(double k, double gamma0, std::mt19937_64& rng) {
    const double rate = 2.0 * gamma0 * R_total(k);
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return std::exponential_distribution<double>(rate)(rng);
}

class PhononEnsemble {
public:
    PhononEnsemble(const KineticSolver& solver, McParams mc) : solver_(solver), mc_(mc) {
        if (mc_.block == 0) throw std::invalid_argument("McParams: block must be positive");
        const Dispersion& d = solver.dispersion();
        for (std::size_t n = 0; n < 4096; ++n)
            vmax_ = std::max(vmax_, std::abs(d.group_velocity(-0.5 + (n + 0.5) / 4096.0)));
        vmax_ *= 1.01;
    }

    /// Moves one particle for time `dt`, event by event.
    void advance(Particle& p, double dt, std::mt19937_64& rng) const {
        const Dispersion& d = solver_.dispersion();
        const InterfaceRule& rule = solver_.rule();
        const double gamma0 = solver_.params().gamma0;
        const bool interface = solver_.params().gamma1 > 0.0;
        double left = dt;
        while (p.alive && left > 0.0) {
            const double v = d.group_velocity(p.k);
            const double ts = scatter_clock(p.k, gamma0, rng);
            double tc = std::numeric_limits<double>::infinity();
            if (interface && p.y * v < 0.0) tc = -p.y / v;
            const double step = std::min({ts, tc, left});
            if (step == left) {
                p.y += v * left;
                left = 0.0;
            } else if (tc <= ts) {
                left -= tc;
                p.y = 0.0;
                switch (interface_draw(rule.at(p.k), rng)) {
                    case InterfaceOutcome::Transmit: break;
                    case InterfaceOutcome::Reflect: p.k = -p.k; break;
                    case InterfaceOutcome::Absorb: p.alive = false; break;
                }
                // The sign of y decides the side: nudge off zero in the direction of travel.
                p.y = std::copysign(0.0, d.group_velocity(p.k));
            } else {
                left -= ts;
                p.y += v * ts;
                p.k = ScatteringKernel::sample_outgoing_mode(p.k, rng);
            }
        }
    }

    McResult run(const KineticField& W0, double t, const std::vector<TestFunction>& probes = {}) const;

private:
    const KineticSolver& solver_;
    McParams mc_;
    double vmax_ = 0.0;
};

namespace detail {

// Cumulative table over initial cells (grid cells plus the two buffers).
struct InitialSampler {
    struct Cell {
        double y0, y1;
        std::size_t j;
    };
    std::vector<Cell> cells;
    std::vector<double> cum;
    double total = 0.0;

    InitialSampler(const KineticField& W0, double buffer) {
        const KineticGrid& g = W0.grid;
        const double dy = g.dy(), dk = g.dk();
        std::vector<double> mass;
        auto push = [&](double y0, double y1, std::size_t j, double w) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("run_mc: W0 must be finite and >= 0");
            if (w == 0.0 || y1 <= y0) return;
            cells.push_back({y0, y1, j});
            mass.push_back(w * (y1 - y0) * dk);
        };
        for (std::size_t j = 0; j < g.nk(); ++j) push(-0.5 * g.L - buffer, -0.5 * g.L, j, W0.at(0, j));
        for (std::size_t i = 0; i < g.ny; ++i)
            for (std::size_t j = 0; j < g.nk(); ++j) push(g.y(i) - 0.5 * dy, g.y(i) + 0.5 * dy, j, W0.at(i, j));
        for (std::size_t j = 0; j < g.nk(); ++j) push(0.5 * g.L, 0.5 * g.L + buffer, j, W0.at(g.ny - 1, j));
        cum.resize(mass.size());
        double acc = 0.0;
        for (std::size_t n = 0; n < mass.size(); ++n) cum[n] = (acc += mass[n]);
        total = acc;
    }

    // Position u in [0, total) to a particle, plus two uniforms for the cell interior.
    Particle draw(double u, double ry, double rk, const TorusGrid& kg) const {
        auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const std::size_t n = std::min<std::size_t>(it - cum.begin(), cells.size() - 1);
        const Cell& c = cells[n];
        Particle p;
        p.y = c.y0 + ry * (c.y1 - c.y0);
        p.k = kg[c.j] + (rk - 0.5) * kg.step();
        return p;
    }
};

struct Tally {
    std::vector<double> s1, s2;
    std::vector<double> p1, p2;
    double alive = 0.0;
    void init(std::size_t cells, std::size_t probes) {
        s1.assign(cells, 0.0);
        s2.assign(cells, 0.0);
        p1.assign(probes, 0.0);
        p2.assign(probes, 0.0);
        alive = 0.0;
    }
};

}  // namespace detail

inline McResult PhononEnsemble::run(const KineticField& W0, double t, const std::vector<TestFunction>& probes) const {
    if (t < 0.0) throw std::domain_error("run_mc: t must be >= 0");
    const KineticGrid& g = solver_.grid();
    if (W0.grid.ny != g.ny || W0.grid.nk() != g.nk() || W0.grid.L != g.L)
        throw std::invalid_argument("run_mc: W0 grid does not match the solver grid");
    McResult res;
    const double T = solver_.params().T;
    const detail::InitialSampler init(W0, mc_.buffer ? vmax_ * t : 0.0);
    const InterfaceRule& rule = solver_.rule();
    const Dispersion& disp = solver_.dispersion();

    // Emission: T g(k) |v(k)| per dk per unit time, k drawn uniformly on the torus with importance weights.
    double emit_rate = 0.0;
    if (T > 0.0 && solver_.params().gamma1 > 0.0) {
        std::vector<double> r(g.nk());
        for (std::size_t j = 0; j < g.nk(); ++j) r[j] = rule.g[j] * std::abs(disp.group_velocity(g.k(j)));
        emit_rate = T * pairwise_sum(r) * g.dk();
    }
    const double emit_mass = emit_rate * t;

    std::size_t n_init = init.total > 0.0 ? mc_.n_particles : 0;
    std::size_t n_emit = 0;
    if (emit_mass > 0.0) {
        const double share = emit_mass / (emit_mass + init.total);
        n_emit = std::max<std::size_t>(1000, static_cast<std::size_t>(std::llround(share * mc_.n_particles)));
    }
    if (n_init + n_emit > mc_.max_particles) {
        res.warnings.push_back("particle cap reached: excess emitted particles dropped and their weight absorbed");
        n_emit = mc_.max_particles > n_init ? mc_.max_particles - n_init : 0;
        n_init = std::min(n_init, mc_.max_particles);
    }
    res.n_initial = n_init;
    res.n_emitted = n_emit;
    res.initial_weight = init.total;
    res.emitted_weight = n_emit > 0 ? emit_mass : 0.0;

    const double w_init = n_init > 0 ? init.total / static_cast<double>(n_init) : 0.0;
    const double cellvol = g.dy() * g.dk();
    const std::size_t ncell = g.size();

    // Initial and emitted particles are tallied as separate independent groups.
    auto simulate = [&](std::size_t count, std::uint64_t tag, bool emitted) {
        // Particles advance in parallel; tallies are accumulated afterwards in index order.
        std::vector<Particle> out(count);
        const std::size_t nblocks = (count + mc_.block - 1) / mc_.block;
#pragma omp parallel for schedule(dynamic, 1)
        for (std::size_t b = 0; b < nblocks; ++b) {
            std::seed_seq seq{static_cast<std::uint64_t>(mc_.seed), tag, static_cast<std::uint64_t>(b)};
            std::mt19937_64 rng(seq);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            const std::size_t lo = b * mc_.block, hi = std::min(count, lo + mc_.block);
            for (std::size_t n = lo; n < hi; ++n) {
                Particle p;
                double dt = t;
                if (!emitted) {
                    // Stratified in the cumulative mass.
                    const double u = (static_cast<double>(n) + uni(rng)) / static_cast<double>(count) * init.total;
                    const double ry = uni(rng), rk = uni(rng);
                    p = init.draw(u, ry, rk, g.kgrid);
                    p.w = w_init;
                } else {
                    p.k = wrap_torus(-0.5 + (static_cast<double>(n) + uni(rng)) / static_cast<double>(count));
                    const double v = disp.group_velocity(p.k);
                    p.w = T * rule.at(p.k)[2] * std::abs(v) * t / static_cast<double>(count);
                    p.y = std::copysign(0.0, v);
                    dt = t * uni(rng);  // emitted at time t - dt
                }
                advance(p, dt, rng);
                out[n] = p;
            }
        }
        detail::Tally tl;
        tl.init(ncell, probes.size());
        for (const Particle& p : out) {
            if (!p.alive) continue;
            tl.alive += p.w;
            if (std::abs(p.y) < 0.5 * g.L) {
                auto i = static_cast<std::size_t>((p.y + 0.5 * g.L) / g.dy());
                i = std::min(i, g.ny - 1);
                const std::size_t c = i * g.nk() + g.kgrid.cell_of(p.k);
                const double x = p.w / cellvol;
                tl.s1[c] += x;
                tl.s2[c] += x * x;
            }
            for (std::size_t q = 0; q < probes.size(); ++q) {
                const double x = p.w * probes[q](p.y, p.k);
                tl.p1[q] += x;
                tl.p2[q] += x * x;
            }
        }
        return tl;
    };

    const detail::Tally ti = simulate(n_init, 0, false);
    const detail::Tally te = simulate(n_emit, 1, true);

    const auto& var = sum_variance;
    res.W = KineticField(g);
    res.W_se = KineticField(g);
    res.W.t = res.W_se.t = W0.t + t;
    for (std::size_t c = 0; c < ncell; ++c) {
        res.W.W[c] = ti.s1[c] + te.s1[c];
        res.W_se.W[c] = std::sqrt(var(ti.s1[c], ti.s2[c], n_init) + var(te.s1[c], te.s2[c], n_emit));
    }
    for (std::size_t q = 0; q < probes.size(); ++q)
        res.probes.push_back({probes[q].label, ti.p1[q] + te.p1[q],
                              std::sqrt(var(ti.p1[q], ti.p2[q], n_init) + var(te.p1[q], te.p2[q], n_emit))});
    res.alive_weight = ti.alive + te.alive;
    res.initial = {n_init, ti.s1, ti.s2};
    res.emitted = {n_emit, te.s1, te.s2};
    return res;
}

inline McResult run_mc(const KineticField& W0, double t, const KineticSolver& solver, const McParams& mc,
                       const std::vector<TestFunction>& probes = {}) {
    return PhononEnsemble(solver, mc).run(W0, t, probes);
}

/// Fraction of particles at fixed k with no scattering event before t.
inline double survival_without_scatter(double k, double gamma0, double t, std::size_t n, std::uint64_t seed) {
    std::seed_seq seq{seed, std::uint64_t{7}};
    std::mt19937_64 rng(seq);
    std::size_t survived = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (scatter_clock(k, gamma0, rng) > t) ++survived;
    return static_cast<double>(survived) / static_cast<double>(n);
}

}  // namespace kinchain
