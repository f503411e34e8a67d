// Lattice coupling and dispersion relation of the harmonic chain.
#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kinchain/numerics.hpp"

namespace kinchain {

/// Finitely supported, even coupling sequence alpha_x and its symbol.
class LatticeCoupling {
public:
    LatticeCoupling() = default;

    /// Builds a coupling from (offset, value) pairs. Only evenness is
    /// checked here; see check_assumptions() for positivity.
    static LatticeCoupling from_coefficients(const std::map<int, double>& coeffs) {
        for (const auto& [x, a] : coeffs) {
            auto it = coeffs.find(-x);
            const double mirror = it == coeffs.end() ? 0.0 : it->second;
            if (std::abs(mirror - a) > 1e-14 * std::max(1.0, std::abs(a))) {
                std::ostringstream os;
                os << "coupling is not even: alpha_" << x << " = " << a << " but alpha_" << -x << " = " << mirror;
                throw std::invalid_argument(os.str());
            }
        }
        LatticeCoupling c;
        c.coeffs_ = coeffs;
        return c;
    }

    const std::map<int, double>& coefficients() const { return coeffs_; }

    int range() const {
        int r = 0;
        for (const auto& [x, a] : coeffs_)
            if (a != 0.0) r = std::max(r, std::abs(x));
        return r;
    }

    /// alpha_hat(k) = sum_x alpha_x exp(-2 pi i x k), real by evenness.
    double symbol(double k) const {
        double s = 0.0;
        for (const auto& [x, a] : coeffs_) s += a * std::cos(kTwoPi * x * k);
        return s;
    }

    double symbol_second_derivative_at_zero() const {
        double s = 0.0;
        for (const auto& [x, a] : coeffs_) s -= a * (kTwoPi * x) * (kTwoPi * x);
        return s;
    }

    double coefficient(int x) const {
        auto it = coeffs_.find(x);
        return it == coeffs_.end() ? 0.0 : it->second;
    }

    /// Empty string when the symbol is positive away from 0 (and has
    /// positive curvature at 0 if it vanishes there), otherwise a
    /// diagnostic naming the first failing k.
    std::string check_assumptions(std::size_t grid = 4096) const {
        const double a0 = symbol(0.0);
        if (a0 < -1e-12) return "symbol negative at k=0: " + std::to_string(a0);
        if (std::abs(a0) <= 1e-12 && symbol_second_derivative_at_zero() <= 0.0)
            return "symbol vanishes at k=0 without positive curvature";
        for (std::size_t j = 1; j <= grid / 2; ++j) {
            const double k = static_cast<double>(j) / static_cast<double>(grid);
            const double v = symbol(k);
            if (!(v > 0.0)) {
                std::ostringstream os;
                os << "symbol not positive at k=" << k << " (alpha_hat=" << v << ")";
                return os.str();
            }
        }
        return {};
    }

private:
    std::map<int, double> coeffs_;
};

enum class PresetKind { NnUnpinned, NnPinned, Custom };

struct CouplingSpec {
    PresetKind kind = PresetKind::NnUnpinned;
    double omega0 = 0.0;            // pinning frequency, NnPinned only
    std::map<int, double> custom;   // Custom only

    static CouplingSpec nn_unpinned() { return {}; }
    static CouplingSpec nn_pinned(double w0) { return {PresetKind::NnPinned, w0, {}}; }
    static CouplingSpec custom_coefficients(std::map<int, double> c) { return {PresetKind::Custom, 0.0, std::move(c)}; }
};

inline LatticeCoupling coupling_for(const CouplingSpec& spec) {
    switch (spec.kind) {
        case PresetKind::NnUnpinned:
            return LatticeCoupling::from_coefficients({{-1, -1.0}, {0, 2.0}, {1, -1.0}});
        case PresetKind::NnPinned:
            return LatticeCoupling::from_coefficients(
                {{-1, -1.0}, {0, 2.0 + spec.omega0 * spec.omega0}, {1, -1.0}});
        case PresetKind::Custom:
            return LatticeCoupling::from_coefficients(spec.custom);
    }
    throw std::logic_error("unknown preset");
}

/// Coupling for a preset, rejected unless it satisfies the standing
/// positivity assumptions.
inline LatticeCoupling build_coupling(const CouplingSpec& spec) {
    if (spec.kind == PresetKind::NnPinned && !(spec.omega0 > 0.0))
        throw std::invalid_argument("nn_pinned requires omega0 > 0");
    LatticeCoupling c = coupling_for(spec);
    if (auto msg = c.check_assumptions(); !msg.empty()) throw std::invalid_argument("coupling rejected: " + msg);
    return c;
}

struct UnimodalReport {
    bool ok = true;
    std::vector<std::pair<double, double>> decreasing;  // grid intervals in (0, 1/2)
};

/// omega(k) = sqrt(alpha_hat(k)), with derivative and inverse branches.
/// Presets use closed forms; custom couplings use numerical fallbacks.
class Dispersion {
public:
    explicit Dispersion(const CouplingSpec& spec, bool validate = true)
        : spec_(spec), coupling_(validate ? build_coupling(spec) : coupling_for(spec)) {
        omega_min_ = omega(0.0);
        omega_max_ = omega(0.5);
    }

    static Dispersion nn_unpinned() { return Dispersion(CouplingSpec::nn_unpinned()); }
    static Dispersion nn_pinned(double w0) { return Dispersion(CouplingSpec::nn_pinned(w0)); }

    const CouplingSpec& spec() const { return spec_; }
    const LatticeCoupling& coupling() const { return coupling_; }
    double omega_min() const { return omega_min_; }
    double omega_max() const { return omega_max_; }

    double omega(double k) const {
        const double a = std::abs(wrap_torus(k));
        switch (spec_.kind) {
            case PresetKind::NnUnpinned:
                return 2.0 * std::sin(kPi * a);
            case PresetKind::NnPinned: {
                const double s = std::sin(kPi * a);
                return std::sqrt(spec_.omega0 * spec_.omega0 + 4.0 * s * s);
            }
            case PresetKind::Custom:
                return std::sqrt(std::max(0.0, coupling_.symbol(a)));
        }
        return 0.0;
    }

    /// d omega / dk. One-sided (k -> 0+) value at k = 0 for the acoustic chain.
    double omega_prime(double k) const {
        k = wrap_torus(k);
        switch (spec_.kind) {
            case PresetKind::NnUnpinned:
                return 2.0 * kPi * std::cos(kPi * k) * (k < 0.0 ? -1.0 : 1.0);
            case PresetKind::NnPinned:
                return kPi * 2.0 * std::sin(kTwoPi * k) / omega(k);
            case PresetKind::Custom: {
                constexpr double h = 1e-6;
                return (omega(k + h) - omega(k - h)) / (2.0 * h);
            }
        }
        return 0.0;
    }

    /// Group velocity in macroscopic units, omega'(k) / (2 pi).
    double group_velocity(double k) const { return omega_prime(k) / kTwoPi; }

    /// k on the branch of the given sign with omega(k) = u.
    double inverse_branch(double u, int sign) const {
        const double tol = 1e-12 * std::max(1.0, omega_max_);
        if (u < omega_min_ - tol || u > omega_max_ + tol) {
            std::ostringstream os;
            os << "inverse_branch: frequency " << u << " outside band [" << omega_min_ << ", " << omega_max_ << "]";
            throw std::domain_error(os.str());
        }
        u = std::clamp(u, omega_min_, omega_max_);
        double k = 0.0;
        switch (spec_.kind) {
            case PresetKind::NnUnpinned:
                k = std::asin(std::min(1.0, u / 2.0)) / kPi;
                break;
            case PresetKind::NnPinned: {
                const double s2 = (u * u - spec_.omega0 * spec_.omega0) / 4.0;
                k = std::asin(std::sqrt(std::clamp(s2, 0.0, 1.0))) / kPi;
                break;
            }
            case PresetKind::Custom:
                k = invert_numerically(u);
                break;
        }
        return sign < 0 ? -k : k;
    }

    UnimodalReport validate_unimodal(std::size_t grid = 4096) const {
        UnimodalReport rep;
        double prev = omega(0.0);
        for (std::size_t j = 1; j <= grid / 2; ++j) {
            const double k0 = static_cast<double>(j - 1) / static_cast<double>(grid);
            const double k1 = static_cast<double>(j) / static_cast<double>(grid);
            const double cur = omega(k1);
            if (cur < prev) {
                rep.ok = false;
                if (!rep.decreasing.empty() && rep.decreasing.back().second == k0)
                    rep.decreasing.back().second = k1;
                else
                    rep.decreasing.emplace_back(k0, k1);
            }
            prev = cur;
        }
        return rep;
    }

private:
    // Newton on [0, 1/2] with bisection fallback; omega' vanishes at the
    // band edges so plain Newton can stall there.
    double invert_numerically(double u) const {
        double lo = 0.0, hi = 0.5;
        double k = 0.25;
        for (int it = 0; it < 200; ++it) {
            const double f = omega(k) - u;
            if (std::abs(f) < 1e-14) break;
            if (f > 0.0)
                hi = k;
            else
                lo = k;
            const double d = omega_prime(k);
            double next = (d != 0.0) ? k - f / d : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (hi - lo < 1e-16) break;
            k = next;
        }
        return k;
    }

    CouplingSpec spec_;
    LatticeCoupling coupling_;
    double omega_min_ = 0.0;
    double omega_max_ = 0.0;
};

}  // namespace kinchain
