// Thermostat response functions and the interface coefficients p+, p-, g.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kinchain/dispersion.hpp"
#include "kinchain/numerics.hpp"

namespace kinchain {

/// J(t) = integral over the torus of cos(omega(k) t).
inline double J_of_t(double t, const Dispersion& disp) {
    if (t < 0.0) throw std::domain_error("J_of_t: t must be nonnegative");
    return integrate_periodic([&](double k) { return std::cos(disp.omega(k) * t); }, 1e-12);
}

/// Laplace transform of J: integral of lambda / (lambda^2 + omega^2(k)).
/// `resonance` (if in (0, 1/2)) is passed to the adaptive rule as a breakpoint.
inline cplx J_tilde(cplx lambda, const Dispersion& disp, double resonance = -1.0) {
    if (!(lambda.real() > 0.0)) throw std::domain_error("J_tilde: requires Re(lambda) > 0");
    const cplx l2 = lambda * lambda;
    auto f = [&](double k) -> cplx {
        const double w = disp.omega(k);
        return lambda / (l2 + w * w);
    };
    // omega is even: integrate over [0, 1/2] and double.
    std::array<double, 1> br{resonance};
    const std::span<const double> breaks = (resonance > 0.0 && resonance < 0.5) ? std::span<const double>(br)
                                                                                 : std::span<const double>();
    return 2.0 * integrate_adaptive(f, 0.0, 0.5, breaks);
}

/// g(lambda) = (1 + gamma1 J~(lambda))^{-1}.
inline cplx g_tilde(cplx lambda, double gamma1, const Dispersion& disp, double resonance = -1.0) {
    return 1.0 / (1.0 + gamma1 * J_tilde(lambda, disp, resonance));
}

struct NuValue {
    cplx value;
    double error = 0.0;      // Richardson error estimate
    bool converged = true;   // false when error > 1e-4
};

/// Boundary value nu(k) = lim_{e -> 0+} g~(e - i omega(k)).
///
/// Evaluated at e in s * {1e-2, 1e-3, 1e-4} and extrapolated to e = 0.
/// The scale s = min(1, d) shrinks with the distance d of omega(k) to the
/// band edges, where the branch points of g~ sit.
inline NuValue nu(double k, double gamma1, const Dispersion& disp) {
    if (gamma1 == 0.0) return {cplx(1.0, 0.0), 0.0, true};
    const double u = disp.omega(k);
    const double dist = std::min(u - disp.omega_min(), disp.omega_max() - u);
    if (!(dist > 0.0)) throw std::domain_error("nu: k sits on a band edge");
    const double scale = std::min(1.0, dist);
    const double res = std::abs(wrap_torus(k));
    std::array<double, 3> eps{1e-2 * scale, 1e-3 * scale, 1e-4 * scale};
    std::array<cplx, 3> vals{};
    for (std::size_t i = 0; i < eps.size(); ++i) vals[i] = g_tilde(cplx(eps[i], -u), gamma1, disp, res);
    const auto ex = richardson(eps, vals);
    return {ex.value, ex.error, ex.error <= 1e-4};
}

/// Per-cell interface coefficients on a midpoint k-grid.
struct InterfaceCoefficients {
    double gamma1 = 0.0;
    TorusGrid grid{2};
    std::vector<bool> valid;
    std::vector<cplx> nu;
    std::vector<cplx> wp;       // script-p, gamma1 nu / (2 |v|)
    std::vector<double> p_plus;
    std::vector<double> p_minus;
    std::vector<double> g;      // absorption probability
    std::vector<double> nu_error;

    std::size_t size() const { return grid.size(); }
};

/// Band-edge exclusion: cells whose centre is closer than one cell width
/// to k = 0 or |k| = 1/2.
inline bool band_edge_cell(const TorusGrid& grid, std::size_t j) {
    const double k = std::abs(grid[j]);
    return std::min(k, std::abs(0.5 - k)) < grid.step();
}

inline InterfaceCoefficients interface_coefficients(const TorusGrid& grid, double gamma1, const Dispersion& disp) {
    if (gamma1 < 0.0) throw std::invalid_argument("gamma1 must be nonnegative");
    const std::size_t n = grid.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    InterfaceCoefficients c;
    c.gamma1 = gamma1;
    c.grid = grid;
    c.valid.assign(n, false);
    c.nu.assign(n, cplx(nan, nan));
    c.wp.assign(n, cplx(nan, nan));
    c.p_plus.assign(n, nan);
    c.p_minus.assign(n, nan);
    c.g.assign(n, nan);
    c.nu_error.assign(n, nan);
    // Evaluate on k > 0 and mirror; every quantity depends on |k| only.
    for (std::size_t j = n / 2; j < n; ++j) {
        if (band_edge_cell(grid, j)) continue;
        const double k = grid[j];
        const double v = std::abs(disp.group_velocity(k));
        const NuValue nv = nu(k, gamma1, disp);
        const cplx wp = gamma1 * nv.value / (2.0 * v);
        for (std::size_t idx : {j, grid.mirror(j)}) {
            c.valid[idx] = true;
            c.nu[idx] = nv.value;
            c.nu_error[idx] = nv.error;
            c.wp[idx] = wp;
            c.p_plus[idx] = std::norm(1.0 - wp);
            c.p_minus[idx] = std::norm(wp);
            c.g[idx] = gamma1 * std::norm(nv.value) / v;
        }
    }
    return c;
}

}  // namespace kinchain
