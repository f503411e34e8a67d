// Conservative-noise scattering kernels and the linear collision operator.
#pragma once

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "kinchain/numerics.hpp"

namespace kinchain {

/// r(k, k') = 4 s(k) s(k - k') s(2k - k').
inline double r_kernel(double k, double kp) { return 4.0 * sn(k) * sn(k - kp) * sn(2.0 * k - kp); }

/// R(k, k') = [r^2(k, k - k') + r^2(k, k + k')] / 2.
inline double R_pair(double k, double kp) {
    const double a = r_kernel(k, k - kp);
    const double b = r_kernel(k, k + kp);
    return 0.5 * (a * a + b * b);
}

/// Expanded form of R_pair: 16 s^2(k) s^2(k') [s^2(k) c^2(k') + c^2(k) s^2(k')].
inline double R_pair_expanded(double k, double kp) {
    const double s = sn(k), c = cs(k), sp = sn(kp), cp = cs(kp);
    return 16.0 * s * s * sp * sp * (s * s * cp * cp + c * c * sp * sp);
}

/// R(k) = integral of R(k, .) = s^2(2k) + 2 s^2(k).
inline double R_total(double k) {
    const double a = sn(2.0 * k);
    const double b = sn(k);
    return a * a + 2.0 * b * b;
}

/// Fourier symbol of the Ito drift stencil theta; equals 4 R(k).
inline double theta_hat(double k) {
    const double s = sn(k), c = cs(k);
    return 8.0 * s * s * (1.0 + 2.0 * c * c);
}

/// Scattering tables on a midpoint k-grid with bulk noise strength gamma0.
///
/// The kernel splits as
///   R(k, k') = 16 s^4(k) [s^2 c^2](k') + 16 s^2(k) c^2(k) [s^4](k'),
/// so the gain operator has rank two; apply_Rcal uses that, and
/// apply_Rcal_dense evaluates the full double sum for cross-checking.
class ScatteringKernel {
public:
    ScatteringKernel(double gamma0, std::size_t nk) : gamma0_(gamma0), grid_(nk) {
        if (gamma0 < 0.0) throw std::invalid_argument("gamma0 must be nonnegative");
        total_.resize(nk);
        f1_.resize(nk);
        f2_.resize(nk);
        for (std::size_t j = 0; j < nk; ++j) {
            const double k = grid_[j];
            const double s = sn(k), c = cs(k);
            total_[j] = R_total(k);
            f1_[j] = s * s * c * c;
            f2_[j] = s * s * s * s;
        }
    }

    double gamma0() const { return gamma0_; }
    const TorusGrid& grid() const { return grid_; }
    std::size_t size() const { return grid_.size(); }
    std::span<const double> total_rate() const { return total_; }

    /// Gain operator on the grid: (R F)(k_j) = sum_l R(k_j, k_l) F_l dk.
    void apply_Rcal(std::span<const double> F, std::span<double> out) const {
        const auto [m1, m2] = moments(F);
        for (std::size_t j = 0; j < size(); ++j) out[j] = 16.0 * (f2_[j] * m1 + f1_[j] * m2);
    }

    std::vector<double> apply_Rcal(std::span<const double> F) const {
        std::vector<double> out(size());
        apply_Rcal(F, out);
        return out;
    }

    std::vector<double> apply_Rcal_dense(std::span<const double> F) const {
        std::vector<double> out(size());
        const double dk = grid_.step();
        for (std::size_t j = 0; j < size(); ++j) {
            std::vector<double> terms(size());
            for (std::size_t l = 0; l < size(); ++l) terms[l] = R_pair(grid_[j], grid_[l]) * F[l];
            out[j] = pairwise_sum(terms) * dk;
        }
        return out;
    }

    /// Gain operator evaluated at an arbitrary k from grid data.
    double Rcal_at(double k, std::span<const double> F) const {
        const auto [m1, m2] = moments(F);
        const double s = sn(k), c = cs(k);
        return 16.0 * (s * s * s * s * m1 + s * s * c * c * m2);
    }

    /// L F(k) = 2 sum_l R(k, k_l) [F_l - F(k)] dk. (The gamma0 factor is not included.)
    std::vector<double> apply_L(std::span<const double> F) const {
        std::vector<double> out(size());
        apply_Rcal(F, out);
        for (std::size_t j = 0; j < size(); ++j) out[j] = 2.0 * (out[j] - total_[j] * F[j]);
        return out;
    }

    /// Draws k' with density R(k, k') / R(k) (exact two-component mixture).
    template <typename Rng>
    double sample_outgoing(double k, Rng& rng) const {
        return sample_outgoing_mode(k, rng);
    }

    template <typename Rng>
    static double sample_outgoing_mode(double k, Rng& rng) {
        const double s = sn(k), c = cs(k);
        const double w1 = 2.0 * s * s * s * s;
        const double w2 = 6.0 * s * s * c * c;
        const double tot = w1 + w2;
        if (!(tot >= 1e-12)) throw std::domain_error("sample_outgoing: total scattering rate vanishes at k");
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double pick = uni(rng) * tot;
        const double u = uni(rng);
        return pick < w1 ? invert_cdf(u, &cdf_s2c2, &pdf_s2c2) : invert_cdf(u, &cdf_s4, &pdf_s4);
    }

    // Normalised component densities on [-1/2, 1/2] and their CDFs.
    static double pdf_s2c2(double x) {
        const double v = std::sin(kTwoPi * x);
        return 2.0 * v * v;
    }
    static double cdf_s2c2(double x) { return (x + 0.5) - std::sin(2.0 * kTwoPi * x) / (2.0 * kTwoPi); }
    static double pdf_s4(double x) {
        const double v = sn(x);
        return 8.0 / 3.0 * v * v * v * v;
    }
    static double cdf_s4(double x) {
        return (x + 0.5) - 2.0 / (3.0 * kPi) * std::sin(kTwoPi * x) + std::sin(2.0 * kTwoPi * x) / (12.0 * kPi);
    }

private:
    std::pair<double, double> moments(std::span<const double> F) const {
        if (F.size() != size()) throw std::invalid_argument("scattering: grid size mismatch");
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t l = 0; l < size(); ++l) {
            m1 += f1_[l] * F[l];
            m2 += f2_[l] * F[l];
        }
        const double dk = grid_.step();
        return {m1 * dk, m2 * dk};
    }

    static double invert_cdf(double u, double (*cdf)(double), double (*pdf)(double)) {
        double lo = -0.5, hi = 0.5, x = u - 0.5;
        for (int it = 0; it < 100; ++it) {
            const double f = cdf(x) - u;
            if (f > 0.0)
                hi = x;
            else
                lo = x;
            if (std::abs(f) < 1e-15 || hi - lo < 1e-15) break;
            const double d = pdf(x);
            double nx = d > 1e-300 ? x - f / d : 0.5 * (lo + hi);
            if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
            x = nx;
        }
        return x;
    }

    double gamma0_;
    TorusGrid grid_;
    std::vector<double> total_;
    std::vector<double> f1_;  // s^2 c^2 on the grid
    std::vector<double> f2_;  // s^4 on the grid
};

}  // namespace kinchain
