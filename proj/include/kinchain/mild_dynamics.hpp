// Deterministic damped dynamics of the wave function: the 2x2 generator
// Omega_eps(k), its exponential, the thermostat memory kernel J_eps and the
// Volterra resolvent g_eps, and the mild solution built from them.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "kinchain/dispersion.hpp"
#include "kinchain/numerics.hpp"
#include "kinchain/scattering.hpp"

namespace kinchain {

struct Mat2 {
    cplx a11, a12, a21, a22;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22, a21 * o.a11 + a22 * o.a21,
                a21 * o.a12 + a22 * o.a22};
    }
    std::array<cplx, 2> apply(cplx x, cplx y) const { return {a11 * x + a12 * y, a21 * x + a22 * y}; }
    cplx det() const { return a11 * a22 - a12 * a21; }
};

/// Per-mode rates of the damped generator.
struct ModeRates {
    double omega;      // omega(k)
    double damping;    // a = gamma0 eps R(k)
    double beta;       // gamma0 R(k) / omega(k); 0 where omega vanishes
    double omega_eps;  // omega sqrt(1 - (eps beta)^2)
};

/// Omega_eps(k) = [[-a - i w, a], [a, -a + i w]] with a = gamma0 eps R(k).
class DampedPropagator {
public:
    DampedPropagator(double eps, double gamma0, Dispersion disp) : eps_(eps), gamma0_(gamma0), disp_(std::move(disp)) {
        if (eps < 0.0 || gamma0 < 0.0) throw std::invalid_argument("DampedPropagator: eps and gamma0 must be >= 0");
        // Fail early if eps beta reaches 1 anywhere on a dense grid.
        for (int j = 1; j <= 2048; ++j) rates(0.5 * j / 2048.0);
    }

    double eps() const { return eps_; }
    double gamma0() const { return gamma0_; }
    const Dispersion& dispersion() const { return disp_; }

    ModeRates rates(double k) const {
        const double w = disp_.omega(k);
        const double R = R_total(k);
        const double beta = w > 0.0 ? gamma0_ * R / w : 0.0;
        const double eb = eps_ * beta;
        if (eb >= 1.0) {
            std::ostringstream os;
            os << "DampedPropagator: eps*beta = " << eb << " >= 1 at k=" << k << " (overdamped mode)";
            throw std::domain_error(os.str());
        }
        return {w, gamma0_ * eps_ * R, beta, w * std::sqrt(1.0 - eb * eb)};
    }

    /// Eigenvalues -a +- i omega_eps.
    std::pair<cplx, cplx> eigenvalues(double k) const {
        const auto r = rates(k);
        return {cplx(-r.damping, r.omega_eps), cplx(-r.damping, -r.omega_eps)};
    }

    Mat2 generator(double k) const {
        const auto r = rates(k);
        return {cplx(-r.damping, -r.omega), r.damping, r.damping, cplx(-r.damping, r.omega)};
    }

    /// exp(Omega_eps(k) t). The generator has trace -2a and determinant
    /// omega^2, so by Cayley-Hamilton
    ///   exp(Omega t) = e^{-a t} [cos(w t) I + (Omega + a I) sin(w t) / w],  w = omega_eps.
    Mat2 e_Omega(double k, double t) const {
        if (t < 0.0) throw std::domain_error("e_Omega: t must be nonnegative");
        const auto r = rates(k);
        const double decay = std::exp(-r.damping * t);
        const double c = std::cos(r.omega_eps * t);
        const double s = sin_over(r.omega_eps, t);
        const cplx d1 = cplx(0.0, -r.omega) * s;
        return {decay * (c + d1), decay * r.damping * s, decay * r.damping * s, decay * (c - d1)};
    }

    /// j_eps(t, k) = (1/2) exp(Omega t) f . f with f = (1, -1).
    double j_eps(double t, double k) const {
        const auto r = rates(k);
        return std::exp(-r.damping * t) * (std::cos(r.omega_eps * t) - r.damping * sin_over(r.omega_eps, t));
    }

    /// Laplace transform of j_eps(., k): lambda / (lambda^2 + 2 a lambda + omega^2).
    cplx j_eps_laplace(cplx lambda, double k) const {
        const auto r = rates(k);
        return lambda / (lambda * lambda + 2.0 * r.damping * lambda + r.omega * r.omega);
    }

private:
    // sin(w t) / w, continuous at w = 0.
    static double sin_over(double w, double t) {
        const double x = w * t;
        if (std::abs(x) < 1e-8) return t * (1.0 - x * x / 6.0);
        return std::sin(x) / w;
    }

    double eps_;
    double gamma0_;
    Dispersion disp_;
};

/// J_eps(t) = integral over the torus of j_eps(t, k).
inline double J_eps(double t, const DampedPropagator& prop) {
    if (t < 0.0) throw std::domain_error("J_eps: t must be nonnegative");
    return integrate_periodic([&](double k) { return prop.j_eps(t, k); }, 1e-12);
}

inline cplx J_tilde_eps(cplx lambda, const DampedPropagator& prop, double resonance = -1.0) {
    if (!(lambda.real() > 0.0)) throw std::domain_error("J_tilde_eps: requires Re(lambda) > 0");
    std::array<double, 1> br{resonance};
    const std::span<const double> breaks = (resonance > 0.0 && resonance < 0.5) ? std::span<const double>(br)
                                                                                 : std::span<const double>();
    return 2.0 * integrate_adaptive([&](double k) { return prop.j_eps_laplace(lambda, k); }, 0.0, 0.5, breaks);
}

inline cplx g_tilde_eps(cplx lambda, double gamma1, const DampedPropagator& prop, double resonance = -1.0) {
    return 1.0 / (1.0 + gamma1 * J_tilde_eps(lambda, prop, resonance));
}

/// g_eps(ds) = delta(ds) + h(s) ds, with the density h sampled at s = n dt.
struct VolterraKernel {
    double dt = 0.0;
    double gamma1 = 0.0;
    std::vector<double> h;
    double laplace_residual = 0.0;  // max over the check points, see solve_volterra
    bool laplace_ok = true;

    double t_max() const { return dt * static_cast<double>(h.empty() ? 0 : h.size() - 1); }

    /// 1 + integral_0^{t_max} e^{-lambda s} h(s) ds by the trapezoid rule.
    cplx laplace(cplx lambda) const {
        std::vector<cplx> terms(h.size());
        for (std::size_t n = 0; n < h.size(); ++n) {
            const double w = (n == 0 || n + 1 == h.size()) ? 0.5 : 1.0;
            terms[n] = w * std::exp(-lambda * (dt * static_cast<double>(n))) * h[n];
        }
        return 1.0 + pairwise_sum(terms) * dt;
    }
};

/// Trapezoidal solve of h = -gamma1 J - gamma1 J * h from kernel samples
/// J[n] = J(n dt).
inline VolterraKernel solve_volterra_sampled(std::span<const double> J, double gamma1, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("solve_volterra: dt must be positive");
    if (gamma1 < 0.0) throw std::invalid_argument("solve_volterra: gamma1 must be >= 0");
    double jmax = 0.0;
    for (double v : J) jmax = std::max(jmax, std::abs(v));
    if (gamma1 * dt * jmax >= 0.5) {
        std::ostringstream os;
        os << "solve_volterra: step too large, gamma1*dt*max|J| = " << gamma1 * dt * jmax << " >= 1/2";
        throw std::invalid_argument(os.str());
    }
    VolterraKernel K;
    K.dt = dt;
    K.gamma1 = gamma1;
    K.h.assign(J.size(), 0.0);
    if (gamma1 == 0.0 || J.empty()) return K;
    auto& h = K.h;
    h[0] = -gamma1 * J[0];
    const double diag = 1.0 + 0.5 * gamma1 * dt * J[0];
    for (std::size_t n = 1; n < J.size(); ++n) {
        double acc = 0.5 * J[n] * h[0];
        for (std::size_t m = 1; m < n; ++m) acc += J[n - m] * h[m];
        h[n] = (-gamma1 * J[n] - gamma1 * dt * acc) / diag;
    }
    return K;
}

/// Resolvent density of the torus kernel J_eps on [0, t_max], with the
/// Laplace transform compared against (1 + gamma1 J~_eps)^{-1} at
/// lambda = 1, 2, 4 (flag set when the deviation exceeds 1e-6).
inline VolterraKernel solve_volterra(const DampedPropagator& prop, double gamma1, double dt, double t_max) {
    if (!(t_max > 0.0) || !(dt > 0.0)) throw std::invalid_argument("solve_volterra: dt and t_max must be positive");
    const auto n = static_cast<std::size_t>(std::llround(t_max / dt));
    std::vector<double> J(n + 1);
    for (std::size_t i = 0; i <= n; ++i) J[i] = J_eps(dt * static_cast<double>(i), prop);
    VolterraKernel K = solve_volterra_sampled(J, gamma1, dt);
    for (double lam : {1.0, 2.0, 4.0}) {
        const cplx want = g_tilde_eps(lam, gamma1, prop);
        K.laplace_residual = std::max(K.laplace_residual, std::abs(K.laplace(lam) - want));
    }
    K.laplace_ok = K.laplace_residual <= 1e-6;
    return K;
}

/// Mode lattice k_j = j / N wrapped to the torus, as used by finite chains.
inline double mode_k(std::size_t j, std::size_t n) {
    return wrap_torus(static_cast<double>(j) / static_cast<double>(n));
}

inline std::size_t mode_neg(std::size_t j, std::size_t n) { return (n - j) % n; }

/// Mild solution of the damped, thermostatted but noise-free wave equation
/// on the mode lattice of an N-site chain. psi0[j] is the amplitude at
/// k_j = j / N; the k-integrals are mode averages. Time integrals use the
/// trapezoid rule with step close to dt.
inline std::vector<cplx> solve_deterministic(std::span<const cplx> psi0, double t, const DampedPropagator& prop,
                                             double gamma1, double dt = 1e-3) {
    const std::size_t N = psi0.size();
    if (N == 0) return {};
    if (t < 0.0 || !(dt > 0.0)) throw std::invalid_argument("solve_deterministic: need t >= 0, dt > 0");
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / dt - 1e-9)));
    const double h = t / static_cast<double>(n);

    std::vector<double> ks(N);
    for (std::size_t j = 0; j < N; ++j) ks[j] = mode_k(j, N);
    auto Psi = [&](std::size_t j) { return std::array<cplx, 2>{psi0[j], std::conj(psi0[mode_neg(j, N)])}; };

    std::vector<cplx> out(N);
    for (std::size_t j = 0; j < N; ++j) {
        const auto [a, b] = Psi(j);
        out[j] = prop.e_Omega(ks[j], t).apply(a, b)[0];
    }
    if (gamma1 == 0.0 || t == 0.0) return out;

    // Free p0 and the mode-averaged memory kernel on the time grid.
    std::vector<double> p00(n + 1), J(n + 1);
    std::vector<cplx> terms(N);
    std::vector<double> jterms(N);
    for (std::size_t m = 0; m <= n; ++m) {
        const double s = h * static_cast<double>(m);
        for (std::size_t j = 0; j < N; ++j) {
            const auto [a, b] = Psi(j);
            const auto v = prop.e_Omega(ks[j], s).apply(a, b);
            terms[j] = (v[0] - v[1]) / cplx(0.0, 2.0);
            jterms[j] = prop.j_eps(s, ks[j]);
        }
        p00[m] = pairwise_sum(terms).real() / static_cast<double>(N);
        J[m] = pairwise_sum(jterms) / static_cast<double>(N);
    }
    const VolterraKernel K = solve_volterra_sampled(J, gamma1, h);

    // p0 = g * p0^0 = p0^0 + h * p0^0.
    std::vector<double> p0(n + 1);
    for (std::size_t m = 0; m <= n; ++m) {
        double acc = 0.0;
        for (std::size_t i = 0; i <= m; ++i) {
            const double w = (i == 0 || i == m) ? 0.5 : 1.0;
            acc += w * K.h[m - i] * p00[i];
        }
        p0[m] = p00[m] + (m == 0 ? 0.0 : h * acc);
    }

    for (std::size_t j = 0; j < N; ++j) {
        cplx acc = 0.0;
        for (std::size_t m = 0; m <= n; ++m) {
            const double w = (m == 0 || m == n) ? 0.5 : 1.0;
            const Mat2 e = prop.e_Omega(ks[j], t - h * static_cast<double>(m));
            acc += w * (e.a11 - e.a12) * p0[m];
        }
        out[j] -= cplx(0.0, gamma1) * h * acc;
    }
    return out;
}

/// (1/2) times the mode average of |psi|^2.
inline double wave_energy(std::span<const cplx> psi) {
    std::vector<double> v(psi.size());
    for (std::size_t j = 0; j < psi.size(); ++j) v[j] = std::norm(psi[j]);
    return 0.5 * pairwise_sum(v) / static_cast<double>(psi.size());
}

}  // namespace kinchain
