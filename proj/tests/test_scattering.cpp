#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "kinchain/scattering.hpp"

using namespace kinchain;

namespace {

double quad(const std::function<double(double)>& f) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -0.5, 0.5, 15, 1e-14);
}

std::vector<double> random_field(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    std::vector<double> f(n);
    for (auto& x : f) x = N01(rng);
    return f;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST(Kernel, RExamples) {
    EXPECT_NEAR(r_kernel(0.5, 0.25), 2.0, 1e-14);
    EXPECT_NEAR(r_kernel(0.25, 0.5), 0.0, 1e-14);
    for (double kp : {-0.3, 0.1, 0.45}) EXPECT_EQ(r_kernel(0.0, kp), 0.0);
}

TEST(Kernel, PairExamplesAndSymmetry) {
    EXPECT_NEAR(R_pair(0.25, 0.25), 2.0, 1e-14);
    EXPECT_NEAR(R_pair(0.0, 0.3), 0.0, 1e-14);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    for (int i = 0; i < 1000; ++i) {
        const double k = U(rng), kp = U(rng);
        EXPECT_NEAR(R_pair(k, kp), R_pair(kp, k), 1e-13);
        EXPECT_NEAR(R_pair(k, kp), R_pair_expanded(k, kp), 1e-13);
        EXPECT_NEAR(R_pair(k, kp), R_pair(-k, kp), 1e-13);
    }
}

TEST(Kernel, TotalRate) {
    EXPECT_NEAR(R_total(0.25), 2.0, 1e-14);
    EXPECT_NEAR(R_total(0.5), 2.0, 1e-14);
    EXPECT_NEAR(R_total(1e-3) / 1e-6, 6.0 * kPi * kPi, 0.01 * 6.0 * kPi * kPi);
    EXPECT_EQ(R_total(0.0), 0.0);
    for (double k : {-0.4, -0.1, 0.2, 0.33}) {
        EXPECT_NEAR(R_total(k), theta_hat(k) / 4.0, 1e-14);
        EXPECT_NEAR(quad([k](double kp) { return R_pair(k, kp); }), R_total(k), 1e-10);
        EXPECT_NEAR(quad([k](double kp) { return r_kernel(k, kp) * r_kernel(k, kp); }), R_total(k), 1e-10);
    }
}

TEST(Operators, LAnnihilatesConstants) {
    const ScatteringKernel K(0.5, 256);
    const auto LF = K.apply_L(std::vector<double>(256, 3.7));
    for (double v : LF) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Operators, LMassFreeSelfAdjointNegative) {
    const ScatteringKernel K(0.5, 128);
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const auto F = random_field(128, s), G = random_field(128, 100 + s);
        const auto LF = K.apply_L(F), LG = K.apply_L(G);
        double mass = 0.0;
        for (double v : LF) mass += v * K.grid().step();
        EXPECT_NEAR(mass, 0.0, 1e-10);
        EXPECT_NEAR(dot(LF, G), dot(F, LG), 1e-10 * std::max(1.0, std::abs(dot(LF, G))));
        EXPECT_LE(dot(LF, F), 1e-12);
    }
}

TEST(Operators, GainOfOneIsTotalRate) {
    const ScatteringKernel K(0.5, 256);
    const auto g = K.apply_Rcal(std::vector<double>(256, 1.0));
    for (std::size_t j = 0; j < 256; ++j) EXPECT_NEAR(g[j], R_total(K.grid()[j]), 1e-10);
    EXPECT_NEAR(2.0 * K.Rcal_at(0.25, std::vector<double>(256, 1.0)), 4.0, 1e-10);
}

TEST(Operators, GainMatchesDenseSum) {
    const ScatteringKernel K(0.5, 64);
    const auto F = random_field(64, 11);
    const auto a = K.apply_Rcal(F), b = K.apply_Rcal_dense(F);
    for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
}

TEST(Operators, GainCommutesWithReflection) {
    const std::size_t n = 128;
    const ScatteringKernel K(0.5, n);
    const auto F = random_field(n, 5);
    std::vector<double> Fr(n);
    for (std::size_t j = 0; j < n; ++j) Fr[j] = F[n - 1 - j];  // midpoint grid is symmetric
    const auto a = K.apply_Rcal(Fr), b = K.apply_Rcal(F);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(a[j], b[n - 1 - j], 1e-12);
}

TEST(Operators, GainOfConcentratedColumn) {
    // A unit-mass bump at k' = 1/4 tends to the column R(., 1/4) as it narrows.
    double prev = 1e9;
    for (std::size_t n : {256, 1024, 4096}) {
        const ScatteringKernel K(0.5, n);
        const double w = 4.0 / static_cast<double>(n) * 8.0;
        std::vector<double> F(n);
        double mass = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double u = (K.grid()[j] - 0.25) / w;
            F[j] = std::abs(u) < 1.0 ? std::pow(std::cos(0.5 * kPi * u), 2) : 0.0;
            mass += F[j] * K.grid().step();
        }
        for (auto& f : F) f /= mass;
        double err = 0.0;
        for (double k : {-0.4, -0.1, 0.15, 0.3}) err = std::max(err, std::abs(K.Rcal_at(k, F) - R_pair(k, 0.25)));
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(Operators, MidpointExactOnCoarseGrid) {
    const ScatteringKernel K(0.5, 8);
    const auto g = K.apply_Rcal(std::vector<double>(8, 1.0));
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(g[j], R_total(K.grid()[j]), 1e-13);
}

TEST(Sampler, MeanOfSineSquared) {
    const double k = 0.25;
    const double target =
        quad([k](double kp) { return std::pow(std::sin(kPi * kp), 2) * R_pair(k, kp); }) / R_total(k);
    std::mt19937_64 rng(2024);
    const std::size_t n = 1000000;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double kp = ScatteringKernel::sample_outgoing_mode(k, rng);
        const double v = std::pow(std::sin(kPi * kp), 2);
        s1 += v;
        s2 += v * v;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - target), 3.0 * se);
}

TEST(Sampler, ChiSquaredAgainstRow) {
    const double k = 0.13;
    const std::size_t bins = 50, n = 200000;
    std::vector<double> expect(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const double a = -0.5 + static_cast<double>(b) / bins, c = a + 1.0 / bins;
        expect[b] = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                        [k](double kp) { return R_pair(k, kp); }, a, c, 10, 1e-14) /
                    R_total(k) * n;
    }
    std::vector<double> count(bins, 0.0);
    std::mt19937_64 rng(99);
    const ScatteringKernel K(0.5, 64);
    for (std::size_t i = 0; i < n; ++i) {
        const double kp = K.sample_outgoing(k, rng);
        const auto b = std::min(bins - 1, static_cast<std::size_t>((kp + 0.5) * bins));
        count[b] += 1.0;
    }
    double chi2 = 0.0;
    for (std::size_t b = 0; b < bins; ++b) chi2 += std::pow(count[b] - expect[b], 2) / expect[b];
    const double crit = boost::math::quantile(boost::math::chi_squared(bins - 1.0), 0.99);
    EXPECT_LT(chi2, crit);
}

TEST(Sampler, RejectsZeroRate) {
    std::mt19937_64 rng(1);
    EXPECT_THROW(ScatteringKernel::sample_outgoing_mode(0.0, rng), std::domain_error);
}

TEST(Sampler, NegativeGammaRejected) { EXPECT_THROW(ScatteringKernel(-1.0, 16), std::invalid_argument); }
