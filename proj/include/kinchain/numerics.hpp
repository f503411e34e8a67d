// Small numerical building blocks shared by the kinchain modules.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace kinchain {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// sin(pi k) and cos(pi k), the shorthand used throughout the kernels.
inline double sn(double k) { return std::sin(kPi * k); }
inline double cs(double k) { return std::cos(kPi * k); }

/// Map k onto the unit torus [-1/2, 1/2).
inline double wrap_torus(double k) {
    k -= std::floor(k + 0.5);
    return k;
}

/// Pairwise (cascade) summation. Result depends only on the order of `xs`.
template <typename T>
T pairwise_sum(std::span<const T> xs) {
    constexpr std::size_t kBlock = 32;
    if (xs.size() <= kBlock) {
        T s{};
        for (const auto& x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

template <typename T>
T pairwise_sum(const std::vector<T>& xs) {
    return pairwise_sum(std::span<const T>(xs.data(), xs.size()));
}

/// Uniform midpoint grid on the torus: k_j = -1/2 + (j + 1/2)/n.
/// Never contains 0 or +-1/2 when n is even.
class TorusGrid {
public:
    explicit TorusGrid(std::size_t n) : n_(n) {
        if (n < 2 || n % 2 != 0) throw std::invalid_argument("TorusGrid: size must be even and >= 2");
    }
    std::size_t size() const { return n_; }
    double step() const { return 1.0 / static_cast<double>(n_); }
    double operator[](std::size_t j) const { return -0.5 + (static_cast<double>(j) + 0.5) * step(); }
    /// Index of the cell holding k (k wrapped to the torus first).
    std::size_t cell_of(double k) const {
        const double u = (wrap_torus(k) + 0.5) * static_cast<double>(n_);
        auto j = static_cast<std::ptrdiff_t>(std::floor(u));
        j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n_) - 1);
        return static_cast<std::size_t>(j);
    }
    /// Index of the mirrored cell, k -> -k.
    std::size_t mirror(std::size_t j) const { return n_ - 1 - j; }

private:
    std::size_t n_;
};

/// Globally adaptive Gauss-Kronrod (10/21 point) integration of a real or
/// complex integrand over [a, b]. The interval with the largest error
/// estimate is bisected until the total estimate falls below
/// max(abs_tol, rel_tol * |integral|). Optional interior breakpoints seed
/// the initial partition.
template <typename F>
auto integrate_adaptive(F&& f, double a, double b, std::span<const double> breaks = {}, double rel_tol = 1e-11,
                        double abs_tol = 1e-15, std::size_t max_intervals = 20000) {
    using R = decltype(f(a));
    using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
    using G = boost::math::quadrature::gauss<double, 10>;
    static const auto& xk = GK::abscissa();
    static const auto& wk = GK::weights();
    static const auto& wg = G::weights();

    struct Piece {
        double lo, hi;
        R value;
        double err;
        bool operator<(const Piece& o) const { return err < o.err; }
    };
    auto rule = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        const R f0 = f(c);
        R kr = f0 * wk[0];
        R ga{};
        for (std::size_t i = 1; i < xk.size(); ++i) {
            const R s = f(c - h * xk[i]) + f(c + h * xk[i]);
            kr += s * wk[i];
            if (i % 2 == 1) ga += s * wg[i / 2];
        }
        return Piece{lo, hi, kr * h, std::abs((kr - ga) * h)};
    };

    std::vector<double> pts{a};
    for (double x : breaks)
        if (x > a && x < b) pts.push_back(x);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    std::vector<Piece> heap;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        if (pts[i + 1] > pts[i]) heap.push_back(rule(pts[i], pts[i + 1]));
    std::make_heap(heap.begin(), heap.end());
    auto totals = [&] {
        R v{};
        double e = 0.0;
        for (const auto& p : heap) {
            v += p.value;
            e += p.err;
        }
        return std::pair<R, double>{v, e};
    };
    auto [value, err] = totals();
    while (err > std::max(abs_tol, rel_tol * std::abs(value)) && heap.size() < max_intervals) {
        std::pop_heap(heap.begin(), heap.end());
        const Piece worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) {  // interval exhausted in floating point
            heap.push_back(worst);
            std::push_heap(heap.begin(), heap.end());
            break;
        }
        const Piece l = rule(worst.lo, mid), r = rule(mid, worst.hi);
        value += l.value + r.value - worst.value;
        err += l.err + r.err - worst.err;
        heap.push_back(l);
        std::push_heap(heap.begin(), heap.end());
        heap.push_back(r);
        std::push_heap(heap.begin(), heap.end());
    }
    return totals().first;
}

/// Integral over the torus of a smooth periodic function by the
/// trapezoid rule, doubling the node count until two successive estimates
/// agree to `abs_tol`. Spectrally convergent for analytic integrands.
template <typename F>
auto integrate_periodic(F&& f, double abs_tol = 1e-12, std::size_t n0 = 64, std::size_t n_max = 1u << 20) {
    using R = decltype(f(0.0));
    auto trap = [&](std::size_t n) {
        std::vector<R> vals(n);
        const double h = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) vals[j] = f(-0.5 + h * static_cast<double>(j));
        return pairwise_sum(vals) * h;
    };
    std::size_t n = n0;
    R prev = trap(n);
    while (n < n_max) {
        n *= 2;
        R cur = trap(n);
        if (std::abs(cur - prev) <= abs_tol) return cur;
        prev = cur;
    }
    throw std::runtime_error("integrate_periodic: no convergence");
}

/// Polynomial extrapolation to h = 0 through samples (h_i, v_i) by
/// Neville's scheme. Returns the extrapolated value and the difference to
/// the extrapolation that drops the coarsest node (error estimate).
struct Extrapolated {
    cplx value;
    double error;
};

inline Extrapolated richardson(std::span<const double> h, std::span<const cplx> v) {
    if (h.size() != v.size() || h.size() < 2) throw std::invalid_argument("richardson: need >= 2 nodes");
    auto neville = [](std::span<const double> hs, std::span<const cplx> vs) {
        std::vector<cplx> p(vs.begin(), vs.end());
        const std::size_t n = p.size();
        for (std::size_t m = 1; m < n; ++m)
            for (std::size_t i = 0; i + m < n; ++i)
                p[i] = (hs[i + m] * p[i] - hs[i] * p[i + 1]) / (hs[i + m] - hs[i]);
        return p[0];
    };
    const cplx full = neville(h, v);
    const cplx reduced = neville(h.subspan(1), v.subspan(1));
    return {full, std::abs(full - reduced)};
}

/// Fritsch-Carlson slopes for data on a uniform grid with spacing dx.
inline void pchip_slopes(std::span<const double> f, double dx, std::span<double> d) {
    const std::size_t n = f.size();
    if (n == 1) {
        d[0] = 0.0;
        return;
    }
    if (n == 2) {
        d[0] = d[1] = (f[1] - f[0]) / dx;
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double s0 = (f[i] - f[i - 1]) / dx;
        const double s1 = (f[i + 1] - f[i]) / dx;
        if (s0 * s1 <= 0.0)
            d[i] = 0.0;
        else
            d[i] = 2.0 * s0 * s1 / (s0 + s1);  // harmonic mean, equal spacing
    }
    auto end_slope = [dx](double fa, double fb, double fc) {
        const double s0 = (fb - fa) / dx;
        const double s1 = (fc - fb) / dx;
        double e = (3.0 * s0 - s1) / 2.0;
        if (e * s0 <= 0.0) return 0.0;
        if (s0 * s1 <= 0.0 && std::abs(e) > 3.0 * std::abs(s0)) return 3.0 * s0;
        return e;
    };
    d[0] = end_slope(f[0], f[1], f[2]);
    d[n - 1] = -end_slope(f[n - 1], f[n - 2], f[n - 3]);
}

/// Cubic Hermite evaluation on the interval [x_i, x_i + dx] at fraction s.
inline double hermite(double f0, double f1, double d0, double d1, double dx, double s) {
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * dx * d0 + (-2 * s3 + 3 * s2) * f1 +
           (s3 - s2) * dx * d1;
}

}  // namespace kinchain
