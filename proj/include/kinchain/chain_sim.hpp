// Finite periodic harmonic chain with momentum-exchange noise and a
// Langevin thermostat at site 0, integrated by a splitting of exact flows.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include <boost/random/normal_distribution.hpp>

#include "kinchain/dispersion.hpp"
#include "kinchain/mild_dynamics.hpp"
#include "kinchain/numerics.hpp"

namespace kinchain {

struct ChainParams {
    CouplingSpec coupling;
    std::size_t N = 64;  // even site count; site x >= N/2 stands for x - N
    double eps = 1.0;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    double T = 0.0;
};

/// Random-phase wave packet psi_x = A phi((eps x - y0)/sigma) exp(2 pi i k0 x + i U)
/// with Gaussian phi(u) = exp(-u^2/2) and k0 drawn from the bump density
/// rho(k) ~ exp(1 - 1/(1 - u^2)), u = (k - k_center)/k_width.
struct PacketSpec {
    double amplitude = 1.0;
    double sigma = 0.25;
    double y0 = 0.0;
    double k_center = 0.25;
    double k_width = 0.1;
};

/// Normalised bump density on [c - w, c + w] with tabulated inverse CDF.
class BumpDensity {
public:
    BumpDensity(double center, double width) : c_(center), w_(width) {
        if (!(width > 0.0)) throw std::invalid_argument("BumpDensity: width must be positive");
        const double lo = std::abs(center) - width;
        const double hi = std::abs(center) + width;
        if (lo <= 0.0 || hi >= 0.5)
            throw std::invalid_argument("BumpDensity: support must avoid k = 0 and |k| = 1/2");
        cdf_.assign(kTable + 1, 0.0);
        std::vector<double> cells(kTable);
        for (std::size_t i = 0; i < kTable; ++i) {
            const double a = -1.0 + 2.0 * static_cast<double>(i) / kTable;
            const double b = a + 2.0 / kTable;
            cells[i] = integrate_adaptive([](double u) { return shape(u); }, a, b);
        }
        for (std::size_t i = 0; i < kTable; ++i) cdf_[i + 1] = cdf_[i] + cells[i];
        norm_ = cdf_.back() * w_;
        for (double& v : cdf_) v /= cdf_.back();
    }

    double operator()(double k) const { return shape((k - c_) / w_) / norm_; }
    double center() const { return c_; }
    double width() const { return w_; }

    /// k with CDF(k) = u.
    double quantile(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = std::min<std::size_t>(kTable - 1, static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - cdf_.begin() - 1)));
        const double a = -1.0 + 2.0 * static_cast<double>(i) / kTable;
        double lo = a, hi = a + 2.0 / kTable;
        // Bisection on the exact CDF inside the bracketing cell.
        const double base = cdf_[i];
        const double total = norm_ / w_;
        for (int it2 = 0; it2 < 60; ++it2) {
            const double mid = 0.5 * (lo + hi);
            const double val = base + integrate_adaptive([](double v) { return shape(v); }, a, mid) / total;
            (val < u ? lo : hi) = mid;
        }
        return c_ + w_ * 0.5 * (lo + hi);
    }

    static double shape(double u) {
        if (std::abs(u) >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - u * u));
    }

private:
    static constexpr std::size_t kTable = 256;
    double c_, w_, norm_ = 1.0;
    std::vector<double> cdf_;
};

struct ChainState {
    std::size_t N = 0;
    double eps = 1.0;
    double t = 0.0;             // microscopic time
    std::vector<double> q, p;   // site order 0, 1, ..., N-1 (x >= N/2 means x - N)
    std::mt19937_64 bond_rng;   // bond noises w_x
    std::mt19937_64 thermo_rng; // thermostat noise w
};

struct EnergyReport {
    double total = 0.0;
    std::vector<double> per_site;
};

/// Deterministic stream seeding: trajectory i of a run with base seed s.
inline std::pair<std::mt19937_64, std::mt19937_64> trajectory_streams(std::uint64_t base, std::uint64_t i) {
    std::seed_seq a{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), 0u};
    std::seed_seq b{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), 1u};
    return {std::mt19937_64(a), std::mt19937_64(b)};
}

class ChainModel {
public:
    explicit ChainModel(ChainParams params) : params_(std::move(params)), disp_(params_.coupling) {
        const std::size_t N = params_.N;
        if (N < 4 || N % 2 != 0) throw std::invalid_argument("ChainModel: N must be even and >= 4");
        if (params_.eps <= 0.0 || params_.gamma0 < 0.0 || params_.gamma1 < 0.0 || params_.T < 0.0)
            throw std::invalid_argument("ChainModel: need eps > 0 and gamma0, gamma1, T >= 0");
        coupling_ = coupling_for(params_.coupling);
        omega_.resize(N / 2 + 1);
        for (std::size_t j = 0; j <= N / 2; ++j) omega_[j] = disp_.omega(static_cast<double>(j) / N);
        std::lock_guard<std::mutex> lock(planner_mutex());
        std::vector<double> r(N);
        std::vector<cplx> c(N / 2 + 1);
        auto* cp = reinterpret_cast<fftw_complex*>(c.data());
        fwd_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(N), r.data(), cp, FFTW_ESTIMATE | FFTW_UNALIGNED));
        inv_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(N), cp, r.data(), FFTW_ESTIMATE | FFTW_UNALIGNED));
    }

    const ChainParams& params() const { return params_; }
    const Dispersion& dispersion() const { return disp_; }
    std::size_t size() const { return params_.N; }

    /// Default micro step min(0.1/omega_max, 0.1/gamma1).
    double default_dt() const {
        double dt = 0.1 / disp_.omega_max();
        if (params_.gamma1 > 0.0) dt = std::min(dt, 0.1 / params_.gamma1);
        return dt;
    }

    ChainState zero_state(std::uint64_t seed = 0, std::uint64_t index = 0) const {
        ChainState s;
        s.N = params_.N;
        s.eps = params_.eps;
        s.q.assign(s.N, 0.0);
        s.p.assign(s.N, 0.0);
        std::tie(s.bond_rng, s.thermo_rng) = trajectory_streams(seed, index);
        return s;
    }

    /// Packet initial state for trajectory `index` of an ensemble of size
    /// `ensemble`; k0 is stratified over the ensemble.
    ChainState init_state(const PacketSpec& spec, std::uint64_t seed, std::uint64_t index, std::uint64_t ensemble) const {
        ChainState s = zero_state(seed, index);
        if (spec.amplitude == 0.0) return s;
        const double L = params_.eps * static_cast<double>(params_.N);
        if (!(spec.sigma > 0.0)) throw std::invalid_argument("packet sigma must be positive");
        if (std::abs(spec.y0) + 8.0 * spec.sigma > 0.5 * L) {
            std::ostringstream os;
            os << "packet would wrap the periodic chain: |y0| + 8 sigma = " << std::abs(spec.y0) + 8.0 * spec.sigma
               << " exceeds L/2 = " << 0.5 * L;
            throw std::invalid_argument(os.str());
        }
        const BumpDensity rho(spec.k_center, spec.k_width);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        // A separate stream for the initial draw keeps the dynamics streams untouched.
        std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 2u};
        std::mt19937_64 init_rng(ss);
        const double v = uni(init_rng);
        const double U = kTwoPi * uni(init_rng);
        const double k0 = rho.quantile((static_cast<double>(index % std::max<std::uint64_t>(1, ensemble)) + v) /
                                       static_cast<double>(std::max<std::uint64_t>(1, ensemble)));
        std::vector<cplx> psi(params_.N);
        for (std::size_t i = 0; i < params_.N; ++i) {
            const double x = site_coordinate(i);
            const double u = (params_.eps * x - spec.y0) / spec.sigma;
            psi[i] = spec.amplitude * std::exp(-0.5 * u * u) * std::polar(1.0, kTwoPi * k0 * x + U);
        }
        set_from_site_wave(s, psi);
        return s;
    }

    double site_coordinate(std::size_t i) const {
        const auto n = static_cast<std::ptrdiff_t>(params_.N);
        auto x = static_cast<std::ptrdiff_t>(i);
        if (x >= n / 2) x -= n;
        return static_cast<double>(x);
    }

    /// Sets (q, p) from a site-space wave function psi = omega~ * q + i p.
    /// The omega = 0 mode of q is set to zero.
    void set_from_site_wave(ChainState& s, const std::vector<cplx>& psi) const {
        const std::size_t N = params_.N;
        std::vector<double> re(N);
        for (std::size_t i = 0; i < N; ++i) {
            re[i] = psi[i].real();
            s.p[i] = psi[i].imag();
        }
        std::vector<cplx> c(N / 2 + 1);
        fftw_execute_dft_r2c(fwd_.get(), re.data(), reinterpret_cast<fftw_complex*>(c.data()));
        for (std::size_t j = 0; j <= N / 2; ++j) c[j] = omega_[j] > 0.0 ? c[j] / omega_[j] : cplx(0.0);
        fftw_execute_dft_c2r(inv_.get(), reinterpret_cast<fftw_complex*>(c.data()), s.q.data());
        for (double& v : s.q) v /= static_cast<double>(N);
    }

    /// psi_hat(k_j) = omega(k_j) q_hat + i p_hat, k_j = j / N, j = 0..N-1.
    std::vector<cplx> wave_function(const ChainState& s) const {
        const std::size_t N = params_.N;
        std::vector<cplx> qh(N / 2 + 1), ph(N / 2 + 1);
        std::vector<double> qc = s.q, pc = s.p;
        fftw_execute_dft_r2c(fwd_.get(), qc.data(), reinterpret_cast<fftw_complex*>(qh.data()));
        fftw_execute_dft_r2c(fwd_.get(), pc.data(), reinterpret_cast<fftw_complex*>(ph.data()));
        std::vector<cplx> psi(N);
        for (std::size_t j = 0; j < N; ++j) {
            const std::size_t m = j <= N / 2 ? j : N - j;
            const cplx q = j <= N / 2 ? qh[m] : std::conj(qh[m]);
            const cplx p = j <= N / 2 ? ph[m] : std::conj(ph[m]);
            psi[j] = omega_[m] * q + cplx(0.0, 1.0) * p;
        }
        return psi;
    }

    /// Inverse of wave_function (the omega = 0 component of q is dropped).
    void set_from_wave_function(ChainState& s, const std::vector<cplx>& psi) const {
        const std::size_t N = params_.N;
        if (psi.size() != N) throw std::invalid_argument("wave field size mismatch");
        std::vector<cplx> qh(N / 2 + 1), ph(N / 2 + 1);
        for (std::size_t j = 0; j <= N / 2; ++j) {
            const cplx a = psi[j];
            const cplx b = std::conj(psi[mode_neg(j, N)]);
            ph[j] = (a - b) / cplx(0.0, 2.0);
            qh[j] = omega_[j] > 0.0 ? (a + b) / (2.0 * omega_[j]) : cplx(0.0);
        }
        fftw_execute_dft_c2r(inv_.get(), reinterpret_cast<fftw_complex*>(qh.data()), s.q.data());
        fftw_execute_dft_c2r(inv_.get(), reinterpret_cast<fftw_complex*>(ph.data()), s.p.data());
        for (std::size_t i = 0; i < N; ++i) {
            s.q[i] /= static_cast<double>(N);
            s.p[i] /= static_cast<double>(N);
        }
    }

    EnergyReport energy(const ChainState& s) const {
        const std::size_t N = params_.N;
        const auto n = static_cast<std::ptrdiff_t>(N);
        EnergyReport r;
        r.per_site.assign(N, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            double aq = 0.0;
            for (const auto& [d, a] : coupling_.coefficients()) {
                const auto j = ((static_cast<std::ptrdiff_t>(i) - d) % n + n) % n;
                aq += a * s.q[static_cast<std::size_t>(j)];
            }
            r.per_site[i] = 0.5 * (s.p[i] * s.p[i] + s.q[i] * aq);
        }
        r.total = pairwise_sum(r.per_site);
        return r;
    }

    /// Advances `steps` micro steps of size dt. Each step is the Strang
    /// composition H(dt/2) B(dt) O(dt) H(dt/2); consecutive half harmonic
    /// flows are fused. Throws on a non-finite state, naming the step.
    void advance(ChainState& s, double dt, std::size_t steps) const {
        if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be positive");
        if (steps == 0) return;
        Workspace ws(params_.N);
        harmonic(s, 0.5 * dt, ws);
        for (std::size_t n = 0; n < steps; ++n) {
            bond_rotations(s, dt);
            thermostat(s, dt);
            harmonic(s, n + 1 == steps ? 0.5 * dt : dt, ws);
            s.t += dt;
            if (!finite_state(s)) {
                std::ostringstream os;
                os << "chain trajectory diverged at step " << n << " (t=" << s.t << ")";
                throw std::runtime_error(os.str());
            }
        }
    }

    void step(ChainState& s, double dt) const { advance(s, dt, 1); }

    /// Exact flow of the harmonic part for time tau.
    void harmonic_flow(ChainState& s, double tau) const {
        Workspace ws(params_.N);
        harmonic(s, tau, ws);
    }

    /// Exact rotation of (p_{x-1}, p_x, p_{x+1}) generated by the
    /// momentum-exchange field for noise increment dw.
    static void rotate_triple(double& a, double& b, double& c, double theta) {
        // The field p -> p x (1,1,1) rotates about (1,1,1)/sqrt(3) at rate -sqrt(3).
        const double phi = -std::sqrt(3.0) * theta;
        double cs_, sn_;
        if (std::abs(phi) < 0.1) {
            // Taylor polynomials, truncation below 1e-16 on this range
            const double x2 = phi * phi;
            cs_ = 1.0 - x2 / 2.0 * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0 * (1.0 - x2 / 56.0 * (1.0 - x2 / 90.0))));
            sn_ = phi * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0))));
        } else {
            cs_ = std::cos(phi);
            sn_ = std::sin(phi);
        }
        const double m = (a + b + c) / 3.0;
        const double inv = 1.0 / std::sqrt(3.0);
        // u x v with u = (1,1,1)/sqrt(3)
        const double cx = (b - c) * -inv;
        const double cy = (c - a) * -inv;
        const double cz = (a - b) * -inv;
        const double da = a - m, db = b - m, dc = c - m;
        a = m + da * cs_ + cx * sn_;
        b = m + db * cs_ + cy * sn_;
        c = m + dc * cs_ + cz * sn_;
    }

    void bond_rotations(ChainState& s, double dt) const {
        if (params_.gamma0 == 0.0) return;
        const std::size_t N = params_.N;
        const double amp = std::sqrt(params_.eps * params_.gamma0 * dt);
        boost::random::normal_distribution<double> nd(0.0, 1.0);
        double* p = s.p.data();
        rotate_triple(p[N - 1], p[0], p[1], amp * nd(s.bond_rng));
        for (std::size_t x = 1; x + 1 < N; ++x) rotate_triple(p[x - 1], p[x], p[x + 1], amp * nd(s.bond_rng));
        rotate_triple(p[N - 2], p[N - 1], p[0], amp * nd(s.bond_rng));
    }

    void thermostat(ChainState& s, double dt) const {
        if (params_.gamma1 == 0.0) return;
        const double e = std::exp(-params_.gamma1 * dt);
        boost::random::normal_distribution<double> nd(0.0, 1.0);
        const double xi = nd(s.thermo_rng);
        s.p[0] = s.p[0] * e + std::sqrt(params_.T * (1.0 - e * e)) * xi;
    }

private:
    struct PlanDeleter {
        void operator()(fftw_plan_s* p) const {
            std::lock_guard<std::mutex> lock(planner_mutex());
            fftw_destroy_plan(p);
        }
    };
    struct Workspace {
        explicit Workspace(std::size_t N) : qh(N / 2 + 1), ph(N / 2 + 1) {}
        std::vector<cplx> qh, ph;
        // cos(w tau), sin(w tau) per mode for the last two step lengths used
        std::array<double, 2> tau{-1.0, -1.0};
        std::array<std::vector<double>, 2> c, s;
        std::size_t next = 0;
    };

    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    static bool finite_state(const ChainState& s) {
        for (std::size_t i = 0; i < s.N; ++i)
            if (!std::isfinite(s.q[i]) || !std::isfinite(s.p[i])) return false;
        return true;
    }

    void harmonic(ChainState& s, double tau, Workspace& ws) const {
        const std::size_t N = params_.N;
        fftw_execute_dft_r2c(fwd_.get(), s.q.data(), reinterpret_cast<fftw_complex*>(ws.qh.data()));
        fftw_execute_dft_r2c(fwd_.get(), s.p.data(), reinterpret_cast<fftw_complex*>(ws.ph.data()));
        std::size_t slot = 0;
        if (ws.tau[0] == tau) {
            slot = 0;
        } else if (ws.tau[1] == tau) {
            slot = 1;
        } else {
            slot = ws.next;
            ws.next ^= 1u;
            ws.tau[slot] = tau;
            ws.c[slot].resize(N / 2 + 1);
            ws.s[slot].resize(N / 2 + 1);
            for (std::size_t j = 0; j <= N / 2; ++j) {
                ws.c[slot][j] = std::cos(omega_[j] * tau);
                ws.s[slot][j] = std::sin(omega_[j] * tau);
            }
        }
        const double* ct = ws.c[slot].data();
        const double* st = ws.s[slot].data();
        for (std::size_t j = 0; j <= N / 2; ++j) {
            const double w = omega_[j];
            const cplx q = ws.qh[j], p = ws.ph[j];
            if (w > 0.0) {
                const double c = ct[j], sn_ = st[j];
                ws.qh[j] = q * c + p * (sn_ / w);
                ws.ph[j] = -q * (w * sn_) + p * c;
            } else {
                ws.qh[j] = q + p * tau;
            }
        }
        fftw_execute_dft_c2r(inv_.get(), reinterpret_cast<fftw_complex*>(ws.qh.data()), s.q.data());
        fftw_execute_dft_c2r(inv_.get(), reinterpret_cast<fftw_complex*>(ws.ph.data()), s.p.data());
        const double inv = 1.0 / static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i) {
            s.q[i] *= inv;
            s.p[i] *= inv;
        }
    }

    ChainParams params_;
    Dispersion disp_;
    LatticeCoupling coupling_;
    std::vector<double> omega_;  // omega(j/N), j = 0..N/2
    std::unique_ptr<fftw_plan_s, PlanDeleter> fwd_, inv_;
};

/// Exact second moments M = E[X X^T] of X = (q_0..q_{N-1}, p_0..p_{N-1})
/// under the linear SDE, integrated with RK4 from M0 up to micro time t:
///   dM/dt = A M + M A^T + eps gamma0 sum_x B_x M B_x^T + 2 gamma1 T e e^T,
/// where e is the unit vector of p_0.
inline std::vector<double> evolve_covariance_exact(const ChainParams& params, const std::vector<double>& M0, double t,
                                                   double dt = 1e-3) {
    const std::size_t N = params.N;
    if (N > 32 || N < 3) throw std::invalid_argument("evolve_covariance_exact: need 3 <= N <= 32");
    const std::size_t D = 2 * N;
    if (M0.size() != D * D) throw std::invalid_argument("evolve_covariance_exact: M0 must be 2N x 2N");
    const LatticeCoupling alpha = coupling_for(params.coupling);
    const double eg = params.eps * params.gamma0;
    // Drift matrix.
    std::vector<double> A(D * D, 0.0);
    const std::array<std::pair<int, double>, 5> theta{{{-2, -1.0}, {-1, -2.0}, {0, 6.0}, {1, -2.0}, {2, -1.0}}};
    const auto n = static_cast<std::ptrdiff_t>(N);
    auto wrap = [n](std::ptrdiff_t i) { return static_cast<std::size_t>(((i % n) + n) % n); };
    for (std::size_t x = 0; x < N; ++x) {
        A[x * D + N + x] = 1.0;
        for (const auto& [d, a] : alpha.coefficients()) A[(N + x) * D + wrap(static_cast<std::ptrdiff_t>(x) - d)] -= a;
        for (const auto& [d, th] : theta) A[(N + x) * D + N + wrap(static_cast<std::ptrdiff_t>(x) - d)] -= 0.5 * eg * th;
    }
    A[N * D + N] -= params.gamma1;
    // B_x p = p x (1,1,1) on the triple (x-1, x, x+1).
    const double b[3][3] = {{0, 1, -1}, {-1, 0, 1}, {1, -1, 0}};

    auto rhs = [&](const std::vector<double>& M) {
        std::vector<double> out(D * D, 0.0);
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t l = 0; l < D; ++l) {
                const double a = A[i * D + l];
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < D; ++j) out[i * D + j] += a * M[l * D + j];
            }
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const double s = out[i * D + j] + out[j * D + i];
                out[i * D + j] = out[j * D + i] = s;
            }
        for (std::size_t i = 0; i < D; ++i) out[i * D + i] *= 2.0;
        if (eg > 0.0) {
            for (std::size_t x = 0; x < N; ++x) {
                const std::size_t idx[3] = {N + wrap(static_cast<std::ptrdiff_t>(x) - 1), N + x,
                                            N + wrap(static_cast<std::ptrdiff_t>(x) + 1)};
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        double acc = 0.0;
                        for (int u = 0; u < 3; ++u)
                            for (int v = 0; v < 3; ++v) acc += b[r][u] * M[idx[u] * D + idx[v]] * b[c][v];
                        out[idx[r] * D + idx[c]] += eg * acc;
                    }
            }
        }
        out[N * D + N] += 2.0 * params.gamma1 * params.T;
        return out;
    };

    std::vector<double> M = M0;
    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / dt - 1e-9)));
    const double h = t / static_cast<double>(steps);
    std::vector<double> tmp(D * D);
    for (std::size_t s = 0; s < steps; ++s) {
        const auto k1 = rhs(M);
        for (std::size_t i = 0; i < D * D; ++i) tmp[i] = M[i] + 0.5 * h * k1[i];
        const auto k2 = rhs(tmp);
        for (std::size_t i = 0; i < D * D; ++i) tmp[i] = M[i] + 0.5 * h * k2[i];
        const auto k3 = rhs(tmp);
        for (std::size_t i = 0; i < D * D; ++i) tmp[i] = M[i] + h * k3[i];
        const auto k4 = rhs(tmp);
        for (std::size_t i = 0; i < D * D; ++i) M[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return M;
}

/// Energy of a second-moment matrix: (1/2) tr(M_pp) + (1/2) sum alpha_{x-x'} M_{q_x q_x'}.
inline double covariance_energy(const ChainParams& params, const std::vector<double>& M) {
    const std::size_t N = params.N, D = 2 * N;
    const LatticeCoupling alpha = coupling_for(params.coupling);
    const auto n = static_cast<std::ptrdiff_t>(N);
    double e = 0.0;
    for (std::size_t x = 0; x < N; ++x) {
        e += 0.5 * M[(N + x) * D + N + x];
        for (const auto& [d, a] : alpha.coefficients()) {
            const auto y = static_cast<std::size_t>(((static_cast<std::ptrdiff_t>(x) - d) % n + n) % n);
            e += 0.5 * a * M[x * D + y];
        }
    }
    return e;
}

}  // namespace kinchain
