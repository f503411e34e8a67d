// Deterministic solver for the linear kinetic equation
//   d_t W + v(k) d_y W = gamma0 L W,  v = omega'/(2 pi),
// on y in [-L/2, L/2] with a transmitting/reflecting/absorbing interface
// at y = 0 that emits at temperature T.
//
// Transport is exact along characteristics with monotone cubic (PCHIP)
// interpolation in y on each side of the interface. The collision gain
// enters through the Duhamel formula, integrated over time slabs by
// product integration with exact exponential weights.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "kinchain/dispersion.hpp"
#include "kinchain/numerics.hpp"
#include "kinchain/scattering.hpp"
#include "kinchain/thermostat_coeffs.hpp"
#include "kinchain/wigner.hpp"

namespace kinchain {

struct KineticParams {
    CouplingSpec coupling;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    double T = 0.0;
    std::size_t ny = 512;
    std::size_t nk = 256;
    double L = 8.0;
    double slab = 0.1;
    std::size_t substeps = 4;
    double picard_tol = 1e-10;
    std::size_t picard_max = 50;
    bool chi_path = false;  // solve T > 0 through the cutoff decomposition
};

/// Midpoint cells y_i = -L/2 + (i + 1/2) dy (y = 0 is a cell edge) times a
/// midpoint torus grid in k.
struct KineticGrid {
    std::size_t ny = 2;
    double L = 1.0;
    TorusGrid kgrid{2};

    KineticGrid() = default;
    KineticGrid(std::size_t ny_, std::size_t nk, double L_) : ny(ny_), L(L_), kgrid(nk) {
        if (ny_ < 6 || ny_ % 2 != 0) throw std::invalid_argument("KineticGrid: ny must be even and >= 6");
        if (!(L_ > 0.0)) throw std::invalid_argument("KineticGrid: L must be positive");
    }
    std::size_t nk() const { return kgrid.size(); }
    double dy() const { return L / static_cast<double>(ny); }
    double dk() const { return kgrid.step(); }
    double y(std::size_t i) const { return -0.5 * L + (static_cast<double>(i) + 0.5) * dy(); }
    double k(std::size_t j) const { return kgrid[j]; }
    std::size_t size() const { return ny * nk(); }
};

/// W(y_i, k_j) stored row-major: index i * nk + j.
struct KineticField {
    KineticGrid grid;
    double t = 0.0;
    std::vector<double> W;

    KineticField() = default;
    explicit KineticField(const KineticGrid& g, double value = 0.0) : grid(g), W(g.size(), value) {}

    double& at(std::size_t i, std::size_t j) { return W[i * grid.nk() + j]; }
    double at(std::size_t i, std::size_t j) const { return W[i * grid.nk() + j]; }

    static KineticField from_function(const KineticGrid& g, const std::function<double(double, double)>& f) {
        KineticField F(g);
        for (std::size_t i = 0; i < g.ny; ++i)
            for (std::size_t j = 0; j < g.nk(); ++j) F.at(i, j) = f(g.y(i), g.k(j));
        return F;
    }
};

/// Even cutoff: 1 on [-1/2, 1/2], 0 outside [-1, 1], smooth in between.
inline double chi_cutoff(double y) {
    const double a = std::abs(y);
    if (a <= 0.5) return 1.0;
    if (a >= 1.0) return 0.0;
    auto psi = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
    const double u = 2.0 * (1.0 - a);  // 1 at |y| = 1/2, 0 at |y| = 1
    return psi(u) / (psi(u) + psi(1.0 - u));
}

inline double chi_cutoff_prime(double y) {
    const double a = std::abs(y);
    if (a <= 0.5 || a >= 1.0) return 0.0;
    const double u = 2.0 * (1.0 - a);
    const double p = std::exp(-1.0 / u), q = std::exp(-1.0 / (1.0 - u));
    const double dp = p / (u * u), dq = -q / ((1.0 - u) * (1.0 - u));
    const double ds_du = (dp * (p + q) - p * (dp + dq)) / ((p + q) * (p + q));
    const double du_dy = y > 0.0 ? -2.0 : 2.0;
    return ds_du * du_dy;
}

/// Source F(y, k) = -T v(k) chi'(y) of the cutoff decomposition.
struct SourceField {
    double T = 0.0;
    KineticField F;
    KineticField chi;
};

/// Per-cell interface probabilities used by the solvers. Cells excluded by
/// the band-edge rule take the coefficients of the nearest valid cell.
struct InterfaceRule {
    InterfaceCoefficients coeffs;
    double T = 0.0;
    std::vector<double> p_plus, p_minus, g;

    InterfaceRule() = default;
    InterfaceRule(InterfaceCoefficients c, double temperature) : coeffs(std::move(c)), T(temperature) {
        const std::size_t n = coeffs.size();
        p_plus.assign(n, 1.0);
        p_minus.assign(n, 0.0);
        g.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t src = j;
            if (!coeffs.valid[j]) {
                std::size_t best = n;
                double dist = std::numeric_limits<double>::infinity();
                for (std::size_t l = 0; l < n; ++l)
                    if (coeffs.valid[l] && std::abs(coeffs.grid[l] - coeffs.grid[j]) < dist) {
                        dist = std::abs(coeffs.grid[l] - coeffs.grid[j]);
                        best = l;
                    }
                if (best == n) {
                    if (coeffs.gamma1 == 0.0) continue;  // no interface at all
                    throw std::invalid_argument("InterfaceRule: no valid k cell on the grid");
                }
                src = best;
            }
            p_plus[j] = coeffs.p_plus[src];
            p_minus[j] = coeffs.p_minus[src];
            g[j] = coeffs.g[src];
        }
    }

    /// (p+, p-, g) at a continuous k, linear between cell centres.
    std::array<double, 3> at(double k) const {
        const TorusGrid& grid = coeffs.grid;
        const double n = static_cast<double>(grid.size());
        const double u = (wrap_torus(k) + 0.5) * n - 0.5;
        const double fl = std::floor(u);
        const double f = u - fl;
        auto idx = [&](double x) {
            auto m = static_cast<std::ptrdiff_t>(x);
            const auto N = static_cast<std::ptrdiff_t>(grid.size());
            return static_cast<std::size_t>(((m % N) + N) % N);
        };
        const std::size_t a = idx(fl), b = idx(fl + 1.0);
        return {(1.0 - f) * p_plus[a] + f * p_plus[b], (1.0 - f) * p_minus[a] + f * p_minus[b],
                (1.0 - f) * g[a] + f * g[b]};
    }

    /// Outgoing value for incoming (transmitted-side, reflected-side) values.
    double apply(std::size_t j, double w_through, double w_reflected) const {
        return p_plus[j] * w_through + p_minus[j] * w_reflected + g[j] * T;
    }
};

struct SolveReport {
    std::size_t slabs = 0;
    std::size_t max_picard_iterations = 0;
    double max_contraction = 0.0;
};

struct ProbeValue {
    double value = 0.0;
};

class KineticSolver {
public:
    explicit KineticSolver(const KineticParams& p)
        : KineticSolver(p, interface_coefficients(TorusGrid(p.nk), p.gamma1, Dispersion(p.coupling))) {}

    KineticSolver(const KineticParams& p, InterfaceCoefficients coeffs)
        : params_(p), grid_(p.ny, p.nk, p.L), disp_(p.coupling), rule_(std::move(coeffs), p.T) {
        if (p.gamma0 < 0.0 || p.gamma1 < 0.0 || p.T < 0.0)
            throw std::invalid_argument("KineticSolver: gamma0, gamma1, T must be >= 0");
        if (!(p.slab > 0.0) || p.substeps == 0) throw std::invalid_argument("KineticSolver: bad slab settings");
        if (rule_.coeffs.size() != p.nk) throw std::invalid_argument("KineticSolver: coefficient grid mismatch");
        const std::size_t nk = p.nk;
        v_.resize(nk);
        a_.resize(nk);
        f1_.resize(nk);
        f2_.resize(nk);
        for (std::size_t j = 0; j < nk; ++j) {
            const double k = grid_.k(j);
            v_[j] = disp_.group_velocity(k);
            a_[j] = 2.0 * p.gamma0 * R_total(k);
            const double s = sn(k), c = cs(k);
            f1_[j] = s * s * c * c;
            f2_[j] = s * s * s * s;
        }
    }

    const KineticParams& params() const { return params_; }
    const KineticGrid& grid() const { return grid_; }
    const InterfaceRule& rule() const { return rule_; }
    const Dispersion& dispersion() const { return disp_; }
    double velocity(std::size_t j) const { return v_[j]; }
    double loss_rate(std::size_t j) const { return a_[j]; }

    KineticField make_field(const std::function<double(double, double)>& f) const {
        return KineticField::from_function(grid_, f);
    }

    /// Exact free flow with interface over time t: damping e^{-2 gamma0 R t},
    /// transmission/reflection at the crossing and creation g T e^{-2 gamma0 R tau}
    /// where tau is the time elapsed since the crossing.
    KineticField free_flow_interface(const KineticField& W0, double t) const {
        check_grid(W0);
        if (t < 0.0) throw std::domain_error("free_flow_interface: t must be >= 0");
        Columns X = to_columns(W0);
        Columns out(grid_);
        for (std::size_t j = 0; j < grid_.nk(); ++j)
            for (std::size_t i = 0; i < grid_.ny; ++i) out.v[j * grid_.ny + i] = transported(X, i, j, t, params_.T);
        KineticField F = from_columns(out);
        F.t = W0.t + t;
        return F;
    }

    /// Free flow evaluated at an arbitrary (y, k) for an analytic initial
    /// field; interface coefficients are computed at k itself.
    double free_flow_point(const std::function<double(double, double)>& W0, double y, double k, double t) const {
        const double v = disp_.group_velocity(k);
        const double a = 2.0 * params_.gamma0 * R_total(k);
        const double foot = y - v * t;
        const double decay = std::exp(-a * t);
        const bool crossed = (y > 0.0 && foot < 0.0) || (y < 0.0 && foot > 0.0);
        if (!crossed) return decay * W0(foot, k);
        double pp = 1.0, pm = 0.0, g = 0.0;
        if (params_.gamma1 > 0.0) {
            const NuValue nv = nu(k, params_.gamma1, disp_);
            const cplx wp = params_.gamma1 * nv.value / (2.0 * std::abs(v));
            pp = std::norm(1.0 - wp);
            pm = std::norm(wp);
            g = params_.gamma1 * std::norm(nv.value) / std::abs(v);
        }
        const double tau = y / v;
        return decay * (pp * W0(foot, k) + pm * W0(-foot, -k)) + std::exp(-a * tau) * g * params_.T;
    }

    /// Full solution at time t from W0.
    KineticField solve(const KineticField& W0, double t, SolveReport* report = nullptr) const {
        check_grid(W0);
        if (t < 0.0) throw std::domain_error("solve_kinetic: t must be >= 0");
        if (params_.chi_path && params_.T > 0.0) return solve_chi(W0, t, report);
        if (params_.gamma0 == 0.0) return free_flow_interface(W0, t);
        return evolve(W0, t, params_.T, nullptr, report);
    }

    SourceField source() const {
        SourceField s;
        s.T = params_.T;
        s.F = make_field([&](double y, double k) { return -params_.T * disp_.group_velocity(k) * chi_cutoff_prime(y); });
        s.chi = make_field([](double y, double) { return chi_cutoff(y); });
        return s;
    }

    /// T > 0 through W = U + T chi, U' = G U + F, U(0) = W0 - T chi, where G
    /// is the generator with a non-emitting interface.
    KineticField solve_chi(const KineticField& W0, double t, SolveReport* report = nullptr) const {
        check_grid(W0);
        const SourceField s = source();
        KineticField U0 = W0;
        for (std::size_t n = 0; n < U0.W.size(); ++n) U0.W[n] -= s.T * s.chi.W[n];
        const Columns Fc = to_columns(s.F);
        KineticField U = evolve(U0, t, 0.0, &Fc, report);
        for (std::size_t n = 0; n < U.W.size(); ++n) U.W[n] += s.T * s.chi.W[n];
        return U;
    }

    double l2_norm(const KineticField& W) const {
        check_grid(W);
        std::vector<double> sq(W.W.size());
        for (std::size_t n = 0; n < sq.size(); ++n) sq[n] = W.W[n] * W.W[n];
        return std::sqrt(pairwise_sum(sq) * grid_.dy() * grid_.dk());
    }

    /// One-sided traces W(0-, k_j), W(0+, k_j) by quadratic extrapolation
    /// from the three cells on each side.
    std::pair<double, double> traces(const KineticField& W, std::size_t j) const {
        const std::size_t h = grid_.ny / 2;
        const double left = (15.0 * W.at(h - 1, j) - 10.0 * W.at(h - 2, j) + 3.0 * W.at(h - 3, j)) / 8.0;
        const double right = (15.0 * W.at(h, j) - 10.0 * W.at(h + 1, j) + 3.0 * W.at(h + 2, j)) / 8.0;
        return {left, right};
    }

    /// Right side of the energy identity, equal to (1/2) d/dt ||W||^2:
    ///   -gamma0 int R(k,k') [W(y,k) - W(y,k')]^2 - (1/2) int v(k) [W(0-,k)^2 - W(0+,k)^2] dk.
    double dissipation_rate(const KineticField& W) const {
        check_grid(W);
        const std::size_t nk = grid_.nk();
        const double dk = grid_.dk();
        // sum_{k,k'} R (W - W')^2 = 2 sum_k R(k) W^2 - 2 sum_k W (R W)(k)
        std::vector<double> rows(grid_.ny);
        for (std::size_t i = 0; i < grid_.ny; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < nk; ++j) {
                m1 += f1_[j] * W.at(i, j);
                m2 += f2_[j] * W.at(i, j);
            }
            m1 *= dk;
            m2 *= dk;
            double acc = 0.0;
            for (std::size_t j = 0; j < nk; ++j) {
                const double w = W.at(i, j);
                const double gain = 16.0 * (f2_[j] * m1 + f1_[j] * m2);
                acc += 2.0 * w * (R_total(grid_.k(j)) * w - gain);
            }
            rows[i] = acc * dk;
        }
        const double bulk = -params_.gamma0 * pairwise_sum(rows) * grid_.dy();
        std::vector<double> flux(nk);
        for (std::size_t j = 0; j < nk; ++j) {
            const auto [l, r] = traces(W, j);
            flux[j] = v_[j] * (l * l - r * r);
        }
        return bulk - 0.5 * pairwise_sum(flux) * dk;
    }

    /// Max over valid k cells of the interface-condition residual on the traces.
    double interface_residual(const KineticField& W) const {
        check_grid(W);
        double worst = 0.0;
        for (std::size_t j = 0; j < grid_.nk(); ++j) {
            if (!rule_.coeffs.valid[j]) continue;
            const std::size_t jm = grid_.kgrid.mirror(j);
            const auto [l, r] = traces(W, j);
            const auto [lm, rm] = traces(W, jm);
            const double res = v_[j] > 0.0 ? r - rule_.apply(j, l, rm) : l - rule_.apply(j, r, lm);
            worst = std::max(worst, std::abs(res));
        }
        return worst;
    }

    /// <W, G> = int W G dy dk by the midpoint rule.
    double pair_field(const KineticField& W, const TestFunction& G) const {
        check_grid(W);
        std::vector<double> kf(grid_.nk());
        for (std::size_t j = 0; j < grid_.nk(); ++j) kf[j] = G.k_factor(grid_.k(j));
        std::vector<double> rows(grid_.ny);
        for (std::size_t i = 0; i < grid_.ny; ++i) {
            const double gy = G.g(grid_.y(i));
            double acc = 0.0;
            for (std::size_t j = 0; j < grid_.nk(); ++j) acc += W.at(i, j) * kf[j];
            rows[i] = gy * acc;
        }
        return pairwise_sum(rows) * grid_.dy() * grid_.dk();
    }

    double total_mass(const KineticField& W) const {
        check_grid(W);
        return pairwise_sum(W.W) * grid_.dy() * grid_.dk();
    }

private:
    // Column-major working storage with per-side PCHIP slopes.
    struct Columns {
        std::size_t ny = 0, nk = 0;
        std::vector<double> v, d;
        Columns() = default;
        explicit Columns(const KineticGrid& g) : ny(g.ny), nk(g.nk()), v(g.size(), 0.0), d(g.size(), 0.0) {}
    };

    void check_grid(const KineticField& W) const {
        if (W.grid.ny != grid_.ny || W.grid.nk() != grid_.nk() || W.grid.L != grid_.L || W.W.size() != grid_.size())
            throw std::invalid_argument("kinetic field grid does not match the solver grid");
    }

    Columns to_columns(const KineticField& W) const {
        Columns c(grid_);
        for (std::size_t i = 0; i < grid_.ny; ++i)
            for (std::size_t j = 0; j < grid_.nk(); ++j) c.v[j * grid_.ny + i] = W.at(i, j);
        build_slopes(c);
        return c;
    }

    KineticField from_columns(const Columns& c) const {
        KineticField F(grid_);
        for (std::size_t i = 0; i < grid_.ny; ++i)
            for (std::size_t j = 0; j < grid_.nk(); ++j) F.at(i, j) = c.v[j * grid_.ny + i];
        return F;
    }

    void build_slopes(Columns& c) const {
        const std::size_t h = grid_.ny / 2;
        const double dy = grid_.dy();
        for (std::size_t j = 0; j < c.nk; ++j)
            for (std::size_t side = 0; side < 2; ++side) {
                const std::size_t off = j * c.ny + side * h;
                pchip_slopes(std::span<const double>(c.v.data() + off, h), dy, std::span<double>(c.d.data() + off, h));
            }
    }

    // Quadratic through the three cells nearest the interface, evaluated
    // r cells beyond the last one (0 <= r <= 1/2). Never changes sign.
    static double extrapolate(double f0, double f1, double f2, double r) {
        const double v = f0 + r * (1.5 * f0 - 2.0 * f1 + 0.5 * f2) + 0.5 * r * r * (f0 - 2.0 * f1 + f2);
        if ((f0 >= 0.0 && v < 0.0) || (f0 <= 0.0 && v > 0.0)) return 0.0;
        return v;
    }

    /// Interpolant of column j on one side (0: y < 0, 1: y > 0) at z.
    /// Constant beyond the outer edge, quadratic extrapolation toward y = 0.
    double eval(const Columns& X, std::size_t j, int side, double z) const {
        const std::size_t h = grid_.ny / 2;
        const double dy = grid_.dy();
        const double* f = X.v.data() + j * X.ny + (side ? h : 0);
        const double* d = X.d.data() + j * X.ny + (side ? h : 0);
        const double first = side ? 0.5 * dy : -0.5 * grid_.L + 0.5 * dy;
        const double s = (z - first) / dy;
        const auto last = static_cast<double>(h - 1);
        if (side == 0) {
            if (s <= 0.0) return f[0];
            if (s >= last) return extrapolate(f[h - 1], f[h - 2], f[h - 3], std::min(s - last, 0.5));
        } else {
            if (s >= last) return f[h - 1];
            if (s <= 0.0) return extrapolate(f[0], f[1], f[2], std::min(-s, 0.5));
        }
        const auto i = static_cast<std::size_t>(s);
        return hermite(f[i], f[i + 1], d[i], d[i + 1], dy, s - static_cast<double>(i));
    }

    enum class Branch { After, Before };

    // Age (time since the backward characteristic crossed y = 0), infinite
    // when the characteristic through (y_i, k_j) never reaches the interface.
    double crossing_age(std::size_t i, std::size_t j) const {
        const double y = grid_.y(i), v = v_[j];
        if (v == 0.0 || (y > 0.0) != (v > 0.0)) return std::numeric_limits<double>::infinity();
        return y / v;
    }

    /// Value of field X carried to (y_i, k_j) over age u, undamped. After:
    /// the foot is on the same side as y. Before: the foot lies across
    /// the interface and the transmitted/reflected parts are mixed.
    double carried(const Columns& X, std::size_t i, std::size_t j, double u, Branch b) const {
        const double y = grid_.y(i);
        const int side = y < 0.0 ? 0 : 1;
        double z = y - v_[j] * u;
        if (b == Branch::After) {
            z = side == 0 ? std::min(z, 0.0) : std::max(z, 0.0);
            return eval(X, j, side, z);
        }
        z = side == 0 ? std::max(z, 0.0) : std::min(z, 0.0);
        const std::size_t jm = grid_.kgrid.mirror(j);
        return rule_.p_plus[j] * eval(X, j, 1 - side, z) + rule_.p_minus[j] * eval(X, jm, side, -z);
    }

    /// Damped free flow (with creation at temperature T) of X over time t, at one cell.
    double transported(const Columns& X, std::size_t i, std::size_t j, double t, double T) const {
        const double uc = crossing_age(i, j);
        const double decay = std::exp(-a_[j] * t);
        if (uc >= t) return decay * carried(X, i, j, t, Branch::After);
        return decay * carried(X, i, j, t, Branch::Before) + T * rule_.g[j] * std::exp(-a_[j] * uc);
    }

    /// Weights (w0, w1) with int_{u0}^{u1} e^{-a u} [(1-s) g0 + s g1] du = w0 g0 + w1 g1,
    /// s = (u - u0)/(u1 - u0).
    static std::pair<double, double> exp_lin_weights(double a, double u0, double u1) {
        const double D = u1 - u0;
        if (D <= 0.0) return {0.0, 0.0};
        const double E0 = std::exp(-a * u0);
        const double x = a * D;
        double i1, i0;  // int_0^1 e^{-xs} s ds, int_0^1 e^{-xs} (1-s) ds
        if (x < 1e-4) {
            i1 = 0.5 - x / 3.0 + x * x / 8.0;
            i0 = 0.5 - x / 6.0 + x * x / 24.0;
        } else {
            const double e = std::exp(-x);
            i1 = (1.0 - e * (1.0 + x)) / (x * x);
            i0 = (x - 1.0 + e) / (x * x);
        }
        return {E0 * D * i0, E0 * D * i1};
    }

    /// Adds to out[cell] the product-integration terms of node J that use the
    /// source fields Q[l] (l = lo_field) and Q[l+1] (hi), over the age interval
    /// [u_{l+1}, u_l], for the contributions selected by the two flags.
    /// Q(sigma) is linear in sigma between nodes; the crossing age splits the interval.
    void interval_terms(const std::vector<Columns>& Q, std::size_t J, std::size_t l, double dtau, bool use_lo,
                        bool use_hi, std::vector<double>& out) const {
        const std::size_t ny = grid_.ny, nk = grid_.nk();
        const double u_hi = static_cast<double>(J - l - 1) * dtau;  // age of node l+1
        const double u_lo = static_cast<double>(J - l) * dtau;      // age of node l
        const Columns& Xl = Q[l];
        const Columns& Xh = Q[l + 1];
        for (std::size_t j = 0; j < nk; ++j) {
            const double a = a_[j];
            for (std::size_t i = 0; i < ny; ++i) {
                const double uc = crossing_age(i, j);
                double acc = 0.0;
                if (uc > u_hi && uc < u_lo) {
                    const double lam = (u_lo - uc) / dtau;  // Q(sigma_c) = (1-lam) Q_l + lam Q_{l+1}
                    const auto [wa0, wa1] = exp_lin_weights(a, u_hi, uc);
                    const auto [wb0, wb1] = exp_lin_weights(a, uc, u_lo);
                    if (use_hi) {
                        acc += wa0 * carried(Xh, i, j, u_hi, Branch::After);
                        acc += wa1 * lam * carried(Xh, i, j, uc, Branch::After);
                        acc += wb0 * lam * carried(Xh, i, j, uc, Branch::Before);
                    }
                    if (use_lo) {
                        acc += wa1 * (1.0 - lam) * carried(Xl, i, j, uc, Branch::After);
                        acc += wb0 * (1.0 - lam) * carried(Xl, i, j, uc, Branch::Before);
                        acc += wb1 * carried(Xl, i, j, u_lo, Branch::Before);
                    }
                } else {
                    const Branch b = (0.5 * (u_hi + u_lo) < uc) ? Branch::After : Branch::Before;
                    const auto [w0, w1] = exp_lin_weights(a, u_hi, u_lo);
                    if (use_hi) acc += w0 * carried(Xh, i, j, u_hi, b);
                    if (use_lo) acc += w1 * carried(Xl, i, j, u_lo, b);
                }
                out[j * ny + i] += acc;
            }
        }
    }

    /// Adds int_0^tau e^{-a u} F(carried over age u) du for a time-independent
    /// source F, by 5-point Gauss-Legendre on pieces of length <= dtau split
    /// at the crossing age.
    void source_terms(const Columns& F, double tau, double dtau, std::vector<double>& out) const {
        using GL = boost::math::quadrature::gauss<double, 5>;
        static const auto& x = GL::abscissa();
        static const auto& w = GL::weights();
        const std::size_t ny = grid_.ny, nk = grid_.nk();
        const auto pieces = static_cast<std::size_t>(std::ceil(tau / dtau - 1e-9));
        for (std::size_t j = 0; j < nk; ++j)
            for (std::size_t i = 0; i < ny; ++i) {
                const double uc = crossing_age(i, j);
                double acc = 0.0;
                auto piece = [&](double u0, double u1, Branch b) {
                    const double c = 0.5 * (u0 + u1), h = 0.5 * (u1 - u0);
                    for (std::size_t q = 0; q < x.size(); ++q)
                        for (double sgn : {-1.0, 1.0}) {
                            if (q == 0 && sgn > 0.0) continue;
                            const double u = c + sgn * h * x[q];
                            acc += h * w[q] * std::exp(-a_[j] * u) * carried(F, i, j, u, b);
                        }
                };
                for (std::size_t l = 0; l < pieces; ++l) {
                    const double u0 = static_cast<double>(l) * dtau;
                    const double u1 = std::min(tau, u0 + dtau);
                    if (uc > u0 && uc < u1) {
                        piece(u0, uc, Branch::After);
                        piece(uc, u1, Branch::Before);
                    } else {
                        piece(u0, u1, 0.5 * (u0 + u1) < uc ? Branch::After : Branch::Before);
                    }
                }
                out[j * ny + i] += acc;
            }
    }

    /// Q = 2 gamma0 R W, column-major, with slopes.
    void gain(const std::vector<double>& Wc, Columns& Q) const {
        const std::size_t ny = grid_.ny, nk = grid_.nk();
        const double dk = grid_.dk();
        const double c = 2.0 * params_.gamma0 * 16.0;
        for (std::size_t i = 0; i < ny; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < nk; ++j) {
                m1 += f1_[j] * Wc[j * ny + i];
                m2 += f2_[j] * Wc[j * ny + i];
            }
            m1 *= dk;
            m2 *= dk;
            for (std::size_t j = 0; j < nk; ++j) Q.v[j * ny + i] = c * (f2_[j] * m1 + f1_[j] * m2);
        }
        build_slopes(Q);
    }

    double l2_cols(const std::vector<double>& a, const std::vector<double>* b) const {
        std::vector<double> sq(a.size());
        for (std::size_t n = 0; n < a.size(); ++n) {
            const double d = b ? a[n] - (*b)[n] : a[n];
            sq[n] = d * d;
        }
        return std::sqrt(pairwise_sum(sq) * grid_.dy() * grid_.dk());
    }

    /// One slab of length h from column field Wn.
    Columns slab(const Columns& Wn, double h, double T, const Columns* src, SolveReport* report) const {
        const std::size_t m = params_.substeps;
        const double dtau = h / static_cast<double>(m);
        const std::size_t ny = grid_.ny, nk = grid_.nk();
        std::vector<Columns> Q(m + 1, Columns(grid_));
        gain(Wn.v, Q[0]);
        Columns Wj = Wn;
        for (std::size_t J = 1; J <= m; ++J) {
            const double tau = static_cast<double>(J) * dtau;
            std::vector<double> B(grid_.size(), 0.0);
            for (std::size_t j = 0; j < nk; ++j)
                for (std::size_t i = 0; i < ny; ++i) B[j * ny + i] = transported(Wn, i, j, tau, T);
            for (std::size_t l = 0; l + 1 < J; ++l) interval_terms(Q, J, l, dtau, true, true, B);
            interval_terms(Q, J, J - 1, dtau, true, false, B);
            if (src) source_terms(*src, tau, dtau, B);

            // Node-local fixed point W = B + P(Q(W)).
            Q[J] = Q[J - 1];
            std::vector<double> W(B.size());
            double prev_diff = 0.0;
            std::size_t it = 0;
            for (;; ++it) {
                std::vector<double> next = B;
                interval_terms(Q, J, J - 1, dtau, false, true, next);
                const double diff = it == 0 ? std::numeric_limits<double>::infinity() : l2_cols(next, &W);
                W.swap(next);
                if (it > 0) {
                    if (it > 1 && prev_diff > 0.0 && report)
                        report->max_contraction = std::max(report->max_contraction, diff / prev_diff);
                    prev_diff = diff;
                    if (diff <= params_.picard_tol * std::max(1.0, l2_cols(W, nullptr))) break;
                }
                if (it >= params_.picard_max) {
                    std::ostringstream os;
                    os << "solve_kinetic: Picard iteration did not converge in " << params_.picard_max
                       << " iterations (last difference " << diff << ")";
                    throw std::runtime_error(os.str());
                }
                gain(W, Q[J]);
            }
            if (report) report->max_picard_iterations = std::max(report->max_picard_iterations, it);
            Wj.v = W;
            build_slopes(Wj);
        }
        return Wj;
    }

    KineticField evolve(const KineticField& W0, double t, double T, const Columns* src, SolveReport* report) const {
        Columns W = to_columns(W0);
        const double h = params_.slab;
        auto n_full = static_cast<std::size_t>(std::floor(t / h + 1e-12));
        double rest = t - static_cast<double>(n_full) * h;
        if (rest < 1e-12 * std::max(1.0, t)) rest = 0.0;
        SolveReport local;
        for (std::size_t n = 0; n < n_full; ++n) W = slab(W, h, T, src, &local);
        if (rest > 0.0) W = slab(W, rest, T, src, &local);
        local.slabs = n_full + (rest > 0.0 ? 1 : 0);
        if (report) *report = local;
        KineticField F = from_columns(W);
        F.t = W0.t + t;
        return F;
    }

    KineticParams params_;
    KineticGrid grid_;
    Dispersion disp_;
    InterfaceRule rule_;
    std::vector<double> v_, a_, f1_, f2_;
};

inline KineticField free_flow_interface(const KineticField& W0, double t, const KineticSolver& s) {
    return s.free_flow_interface(W0, t);
}
inline KineticField solve_kinetic(const KineticField& W0, double t, const KineticSolver& s,
                                  SolveReport* report = nullptr) {
    return s.solve(W0, t, report);
}
inline double l2_norm(const KineticField& W, const KineticSolver& s) { return s.l2_norm(W); }
inline double dissipation_rate(const KineticField& W, const KineticSolver& s) { return s.dissipation_rate(W); }

/// CSV with columns y,k,W.
inline void write_field_csv(const KineticField& F, std::ostream& os) {
    os << "y,k,W\n";
    os.precision(17);
    for (std::size_t i = 0; i < F.grid.ny; ++i)
        for (std::size_t j = 0; j < F.grid.nk(); ++j) os << F.grid.y(i) << ',' << F.grid.k(j) << ',' << F.at(i, j) << '\n';
}

}  // namespace kinchain
