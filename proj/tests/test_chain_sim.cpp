#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kinchain/chain_sim.hpp"
#include "kinchain/mild_dynamics.hpp"

using namespace kinchain;

namespace {

ChainParams params(std::size_t N, double eps, double g0, double g1, double T, CouplingSpec c = CouplingSpec::nn_unpinned()) {
    return ChainParams{c, N, eps, g0, g1, T};
}

void randomize(ChainState& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (auto& v : s.q) v = nd(rng);
    for (auto& v : s.p) v = nd(rng);
}

// Naive DFT, q_hat(k_j) = sum_x q_x exp(-2 pi i x j / N).
std::vector<cplx> dft(const std::vector<double>& v) {
    const std::size_t N = v.size();
    std::vector<cplx> out(N);
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t x = 0; x < N; ++x) out[j] += v[x] * std::polar(1.0, -kTwoPi * double(x * j % N) / double(N));
    return out;
}

using Mat = std::vector<double>;

Mat mul(const Mat& A, const Mat& B, std::size_t D) {
    Mat C(D * D, 0.0);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t l = 0; l < D; ++l) {
            const double a = A[i * D + l];
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < D; ++j) C[i * D + j] += a * B[l * D + j];
        }
    return C;
}

Mat transpose(const Mat& A, std::size_t D) {
    Mat C(D * D);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) C[j * D + i] = A[i * D + j];
    return C;
}

// Second moments of the splitting scheme itself, propagated exactly:
// harmonic flows through the model's own matrix, rotations and the OU step
// through their exact moment maps.
Mat scheme_moments(const ChainModel& model, const Mat& M0, double t, double dt) {
    const auto& P = model.params();
    const std::size_t N = P.N, D = 2 * N;
    Mat H(D * D);
    for (std::size_t j = 0; j < D; ++j) {
        ChainState s = model.zero_state();
        (j < N ? s.q[j] : s.p[j - N]) = 1.0;
        model.harmonic_flow(s, dt / 2);
        for (std::size_t i = 0; i < N; ++i) {
            H[i * D + j] = s.q[i];
            H[(N + i) * D + j] = s.p[i];
        }
    }
    const Mat Ht = transpose(H, D);
    // Rotation by phi = sqrt(3 eps gamma0 dt) Z about (1,1,1): R = C0 + cos C1 + sin C2.
    const double s2 = 3.0 * P.eps * P.gamma0 * dt;
    const double Ec = std::exp(-s2 / 2), Ec2 = (1 + std::exp(-2 * s2)) / 2, Es2 = (1 - std::exp(-2 * s2)) / 2;
    const double w[3][3] = {{1, Ec, 0}, {Ec, Ec2, 0}, {0, 0, Es2}};
    std::vector<std::array<Mat, 3>> C(N);
    for (std::size_t x = 0; x < N; ++x) {
        const std::size_t id[3] = {N + (x + N - 1) % N, N + x, N + (x + 1) % N};
        Mat C0(D * D, 0.0), C1(D * D, 0.0), C2(D * D, 0.0);
        for (std::size_t i = 0; i < D; ++i) C0[i * D + i] = 1.0;
        const double K[3][3] = {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                C0[id[a] * D + id[b]] = 1.0 / 3.0;
                C1[id[a] * D + id[b]] = (a == b ? 1.0 : 0.0) - 1.0 / 3.0;
                C2[id[a] * D + id[b]] = K[a][b] / std::sqrt(3.0);
            }
        C[x] = {C0, C1, C2};
    }
    const double e = std::exp(-P.gamma1 * dt), sv = P.T * (1 - e * e);
    Mat M = M0;
    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    for (std::size_t n = 0; n < steps; ++n) {
        M = mul(mul(H, M, D), Ht, D);
        for (std::size_t x = 0; x < N; ++x) {
            Mat out(D * D, 0.0);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    if (w[a][b] == 0.0) continue;
                    const Mat T = mul(mul(C[x][a], M, D), transpose(C[x][b], D), D);
                    for (std::size_t i = 0; i < D * D; ++i) out[i] += w[a][b] * T[i];
                }
            M = out;
        }
        for (std::size_t i = 0; i < D; ++i) {
            M[N * D + i] *= e;
            M[i * D + N] *= e;
        }
        M[N * D + N] += sv;
        M = mul(mul(H, M, D), Ht, D);
    }
    return M;
}

}  // namespace

TEST(Init, ZeroAmplitudeGivesZeroState) {
    const ChainModel m(params(64, 1.0 / 8, 1.0, 1.0, 0.0));
    const ChainState s = m.init_state(PacketSpec{0.0, 0.5, 0.0, 0.25, 0.1}, 1, 0, 1);
    EXPECT_EQ(m.energy(s).total, 0.0);
}

TEST(Init, WrappingPacketRejected) {
    const ChainModel m(params(64, 1.0 / 8, 1.0, 1.0, 0.0));  // L = 8
    EXPECT_THROW(m.init_state(PacketSpec{1.0, 0.5, 0.5, 0.25, 0.1}, 1, 0, 1), std::invalid_argument);
}

TEST(Init, ScaledEnergyIndependentOfEps) {
    const PacketSpec pk{1.0, 0.5, -0.5, 0.25, 0.1};
    double ref = 0.0;
    for (double eps : {1.0 / 32, 1.0 / 64, 1.0 / 128}) {
        const ChainModel m(params(static_cast<std::size_t>(16.0 / eps), eps, 1.0, 1.0, 0.0));
        const double e = eps * m.energy(m.init_state(pk, 3, 0, 1)).total;
        // Riemann sum of (A^2/2) int phi^2 dy with phi Gaussian
        EXPECT_NEAR(e, 0.5 * pk.sigma * std::sqrt(kPi), 0.01 * e);
        if (ref == 0.0) ref = e;
        EXPECT_NEAR(e, ref, 0.01 * ref);
    }
}

TEST(Init, Deterministic) {
    const ChainModel m(params(64, 1.0 / 8, 1.0, 1.0, 0.5));
    const PacketSpec pk{1.0, 0.5, 0.0, 0.25, 0.1};
    ChainState a = m.init_state(pk, 9, 4, 10), b = m.init_state(pk, 9, 4, 10);
    m.advance(a, 0.05, 100);
    m.advance(b, 0.05, 100);
    EXPECT_EQ(a.q, b.q);
    EXPECT_EQ(a.p, b.p);
}

TEST(Step, FreeHarmonicConservesEnergy) {
    const ChainModel m(params(128, 1.0, 0.0, 0.0, 0.0, CouplingSpec::nn_pinned(0.5)));
    ChainState s = m.zero_state();
    randomize(s, 1);
    const double e0 = m.energy(s).total;
    m.advance(s, m.default_dt(), 10000);
    EXPECT_LT(std::abs(m.energy(s).total - e0) / e0, 1e-12);
}

TEST(Step, TripleRotationInvariants) {
    for (double th : {-2.0, -0.3, 0.01, 0.05, 0.7, 3.1}) {
        double a = 1.0, b = 0.0, c = -1.0;
        ChainModel::rotate_triple(a, b, c, th);
        EXPECT_NEAR(a + b + c, 0.0, 1e-15);
        EXPECT_NEAR(a * a + b * b + c * c, 2.0, 1e-14);
    }
}

TEST(Step, TripleRotationIsFlowOfExchangeField) {
    // exp(theta B) with B p = p x (1,1,1), by scaled Taylor series.
    const double B[3][3] = {{0, 1, -1}, {-1, 0, 1}, {1, -1, 0}};
    for (double th : {-0.8, -0.04, 0.02, 0.3, 1.7}) {
        double E[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, T[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        const int sq = 6;
        const double h = th / (1 << sq);
        for (int n = 1; n <= 14; ++n) {
            double U[3][3] = {};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int l = 0; l < 3; ++l) U[i][j] += T[i][l] * B[l][j] * h / n;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    T[i][j] = U[i][j];
                    E[i][j] += U[i][j];
                }
        }
        for (int r = 0; r < sq; ++r) {
            double U[3][3] = {};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int l = 0; l < 3; ++l) U[i][j] += E[i][l] * E[l][j];
            std::copy(&U[0][0], &U[0][0] + 9, &E[0][0]);
        }
        const double v[3] = {0.3, -1.2, 0.5};
        double a = v[0], b = v[1], c = v[2];
        ChainModel::rotate_triple(a, b, c, th);
        const double got[3] = {a, b, c};
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], E[i][0] * v[0] + E[i][1] * v[1] + E[i][2] * v[2], 1e-13);
    }
}

TEST(Step, BondNoiseConservesMomentumAndKineticEnergy) {
    const ChainModel m(params(32, 1.0, 2.0, 0.0, 0.0));
    ChainState s = m.zero_state(5);
    randomize(s, 2);
    double sp = 0.0, sp2 = 0.0;
    for (double v : s.p) sp += v, sp2 += v * v;
    m.bond_rotations(s, 0.1);
    double tp = 0.0, tp2 = 0.0;
    for (double v : s.p) tp += v, tp2 += v * v;
    EXPECT_NEAR(tp, sp, 1e-12);
    EXPECT_NEAR(tp2, sp2, 1e-12);
}

TEST(Step, ThermostatStationaryVariance) {
    const ChainModel m(params(8, 1.0, 0.0, 2.0, 0.7));
    ChainState s = m.zero_state(3);
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        m.thermostat(s, 0.3);
        acc += s.p[0] * s.p[0];
    }
    EXPECT_NEAR(acc / n, 0.7, 0.02);
}

TEST(Step, DivergenceNamesStep) {
    const ChainModel m(params(16, 1.0, 0.0, 0.0, 0.0));
    ChainState s = m.zero_state();
    s.q[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        m.advance(s, 0.01, 5);
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
    }
}

TEST(Step, ZeroTemperatureEnsembleEnergyNonincreasing) {
    const ChainModel m(params(64, 1.0 / 8, 1.0, 1.0, 0.0));
    const PacketSpec pk{1.0, 0.25, -1.0, 0.25, 0.1};
    const std::size_t M = 1000, outs = 10;
    std::vector<std::vector<double>> E(outs + 1, std::vector<double>(M));
    for (std::size_t i = 0; i < M; ++i) {
        ChainState s = m.init_state(pk, 11, i, M);
        E[0][i] = m.energy(s).total;
        for (std::size_t o = 1; o <= outs; ++o) {
            m.advance(s, m.default_dt(), 20);
            E[o][i] = m.energy(s).total;
        }
    }
    for (std::size_t o = 1; o <= outs; ++o) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < M; ++i) mean += E[o][i] - E[o - 1][i];
        mean /= M;
        for (std::size_t i = 0; i < M; ++i) var += std::pow(E[o][i] - E[o - 1][i] - mean, 2);
        const double se = std::sqrt(var / (M - 1) / M);
        EXPECT_LE(mean, 2.0 * se);
    }
}

TEST(Energy, SitesSumToTotalAndMatchWave) {
    const ChainModel m(params(64, 1.0, 0.0, 0.0, 0.0, CouplingSpec::nn_pinned(1.0)));
    ChainState s = m.zero_state();
    randomize(s, 4);
    const auto r = m.energy(s);
    double sum = 0.0;
    for (double v : r.per_site) sum += v;
    EXPECT_NEAR(sum, r.total, 1e-10);
    EXPECT_NEAR(wave_energy(m.wave_function(s)), r.total, 1e-10);
}

TEST(Energy, LocalisedMomentum) {
    const ChainModel m(params(32, 1.0, 0.0, 0.0, 0.0));
    ChainState s = m.zero_state();
    s.p[5] = 1.0;
    EXPECT_NEAR(m.energy(s).total, 0.5, 1e-15);
}

TEST(Energy, SingleMode) {
    const std::size_t N = 32;
    const ChainModel m(params(N, 1.0, 0.0, 0.0, 0.0, CouplingSpec::nn_pinned(1.0)));
    std::vector<cplx> psi(N);
    const cplx c(1.5, -0.5);
    psi[5] = c;
    ChainState s = m.zero_state();
    m.set_from_wave_function(s, psi);
    EXPECT_NEAR(m.energy(s).total, std::norm(c) / (2.0 * N), 1e-14);
}

TEST(Wave, MatchesNaiveTransform) {
    const std::size_t N = 24;
    const ChainModel m(params(N, 1.0, 0.0, 0.0, 0.0, CouplingSpec::nn_pinned(0.3)));
    ChainState s = m.zero_state();
    randomize(s, 6);
    const auto qh = dft(s.q), ph = dft(s.p);
    const auto psi = m.wave_function(s);
    for (std::size_t j = 0; j < N; ++j)
        EXPECT_NEAR(std::abs(psi[j] - (m.dispersion().omega(mode_k(j, N)) * qh[j] + cplx(0.0, 1.0) * ph[j])), 0.0, 1e-12);
    std::fill(s.p.begin(), s.p.end(), 0.0);
    const auto psi0 = m.wave_function(s);
    const auto qh0 = dft(s.q);
    for (std::size_t j = 1; j < N; ++j) EXPECT_NEAR(std::abs(psi0[j] - m.dispersion().omega(mode_k(j, N)) * qh0[j]), 0.0, 1e-12);
}

TEST(Wave, RoundTrip) {
    const std::size_t N = 64;
    const ChainModel m(params(N, 1.0, 0.0, 0.0, 0.0, CouplingSpec::nn_pinned(1.0)));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    std::vector<cplx> psi(N);
    for (auto& z : psi) z = cplx(nd(rng), nd(rng));
    ChainState s = m.zero_state();
    m.set_from_wave_function(s, psi);
    const auto back = m.wave_function(s);
    for (std::size_t j = 0; j < N; ++j) EXPECT_NEAR(std::abs(back[j] - psi[j]), 0.0, 1e-12);
}

TEST(Covariance, ConservedWithoutNoise) {
    const auto P = params(8, 1.0, 0.0, 0.0, 0.0);
    Mat M0(256, 0.0);
    for (std::size_t i = 0; i < 16; ++i) M0[i * 16 + i] = 1.0 + 0.1 * i;
    const double e0 = covariance_energy(P, M0);
    EXPECT_NEAR(covariance_energy(P, evolve_covariance_exact(P, M0, 5.0)), e0, 1e-8);
}

TEST(Covariance, NonincreasingAtZeroTemperature) {
    const auto P = params(8, 1.0, 1.0, 1.0, 0.0);
    Mat M0(256, 0.0);
    for (std::size_t i = 0; i < 16; ++i) M0[i * 16 + i] = 1.0;
    double prev = covariance_energy(P, M0);
    Mat M = M0;
    for (int n = 0; n < 10; ++n) {
        M = evolve_covariance_exact(P, M, 0.5);
        const double e = covariance_energy(P, M);
        EXPECT_LE(e, prev + 1e-12);
        prev = e;
    }
}

TEST(Covariance, DimensionGuard) {
    EXPECT_THROW(evolve_covariance_exact(params(64, 1.0, 0, 0, 0), Mat(128 * 128), 1.0), std::invalid_argument);
    EXPECT_THROW(evolve_covariance_exact(params(8, 1.0, 0, 0, 0), Mat(10), 1.0), std::invalid_argument);
}

TEST(Covariance, SplittingIsWeakOrderOne) {
    const auto P = params(8, 1.0, 1.0, 1.0, 0.5);
    const ChainModel model(P);
    const std::size_t N = 8, D = 16;
    std::vector<double> X0(D);
    for (std::size_t i = 0; i < N; ++i) {
        X0[i] = 0.3 * std::cos(1.0 + i);
        X0[N + i] = (i == 2 ? 1.0 : 0.0) + 0.2 * std::sin(0.5 * i);
    }
    Mat M0(D * D);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) M0[i * D + j] = X0[i] * X0[j];
    const Mat ex = evolve_covariance_exact(P, M0, 5.0);
    std::vector<double> lx, ly;
    for (double dt : {0.05, 0.025, 0.0125, 0.00625}) {
        const Mat M = scheme_moments(model, M0, 5.0, dt);
        double err = 0.0;
        for (std::size_t i = 0; i < D * D; ++i) err = std::max(err, std::abs(M[i] - ex[i]));
        lx.push_back(std::log(dt));
        ly.push_back(std::log(err));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / lx.size(), my += ly[i] / ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += std::pow(lx[i] - mx, 2);
    const double slope = sxy / sxx;
    EXPECT_GE(slope, 0.8);
    EXPECT_LE(slope, 1.2);
}
