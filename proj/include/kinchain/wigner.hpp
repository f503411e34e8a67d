// Fourier-Wigner estimates from ensembles of chain wave fields, and their
// pairing with closed-form test functions.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinchain/numerics.hpp"

namespace kinchain {

/// Product test function G(y, k) = g(y) c(k) with a Gaussian profile
/// g(y) = height exp(-(y - yc)^2 / (2 w^2)). Its transform in y,
///   G^(eta, k) = integral e^{-2 pi i eta y} G(y, k) dy,
/// is evaluated in closed form and cut off at |eta| > eta_max (the
/// discarded tail is below height w sqrt(2 pi) exp(-2 pi^2 w^2 eta_max^2)).
struct TestFunction {
    double yc = 0.0;
    double width = 0.2;
    double height = 1.0;
    double eta_max = 16.0;
    std::function<double(double)> k_factor = [](double) { return 1.0; };
    std::string label;

    double g(double y) const {
        const double u = (y - yc) / width;
        return height * std::exp(-0.5 * u * u);
    }
    double operator()(double y, double k) const { return g(y) * k_factor(k); }

    cplx g_hat(double eta) const {
        if (std::abs(eta) > eta_max) return 0.0;
        const double a = kTwoPi * kPi * width * width * eta * eta;  // 2 pi^2 w^2 eta^2
        return height * width * std::sqrt(kTwoPi) * std::exp(-a) * std::polar(1.0, -kTwoPi * eta * yc);
    }
    cplx hat(double eta, double k) const { return g_hat(eta) * k_factor(k); }

    /// Bound on |G| used to normalise distances.
    double sup_norm(std::size_t nk = 1024) const {
        double m = 0.0;
        for (std::size_t j = 0; j < nk; ++j) m = std::max(m, std::abs(k_factor(-0.5 + (j + 0.5) / nk)));
        return std::abs(height) * m;
    }
};

/// Trig-polynomial k factor a0 + sum_n [a_n cos(2 pi n k) + b_n sin(2 pi n k)].
inline std::function<double(double)> trig_factor(double a0, std::vector<double> a, std::vector<double> b = {}) {
    return [a0, a = std::move(a), b = std::move(b)](double k) {
        double s = a0;
        for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * std::cos(kTwoPi * static_cast<double>(n + 1) * k);
        for (std::size_t n = 0; n < b.size(); ++n) s += b[n] * std::sin(kTwoPi * static_cast<double>(n + 1) * k);
        return s;
    };
}

/// Averaged Fourier-Wigner pair on eta_m = 2m/L (|m| <= m_max), k_j = j/N.
/// Arrays are indexed [(m + m_max) * N + j].
struct WignerEstimate {
    std::size_t N = 0;
    double eps = 1.0;
    double eta_max = 16.0;
    std::int64_t m_max = 0;
    std::uint64_t members = 0;
    std::vector<cplx> W, Y;
    std::vector<double> W_se, Y_se;

    double L() const { return eps * static_cast<double>(N); }
    double d_eta() const { return 2.0 / L(); }
    double d_k() const { return 1.0 / static_cast<double>(N); }
    double eta(std::int64_t m) const { return d_eta() * static_cast<double>(m); }
    double k(std::size_t j) const { return wrap_torus(static_cast<double>(j) / static_cast<double>(N)); }
    std::size_t rows() const { return static_cast<std::size_t>(2 * m_max + 1); }
    std::size_t index(std::int64_t m, std::size_t j) const {
        return static_cast<std::size_t>(m + m_max) * N + j;
    }
};

inline std::int64_t eta_cutoff_index(std::size_t N, double eps, double eta_max) {
    const double L = eps * static_cast<double>(N);
    auto m = static_cast<std::int64_t>(std::floor(eta_max * L / 2.0 + 1e-9));
    return std::min<std::int64_t>(m, static_cast<std::int64_t>(N / 2) - 1);
}

/// Single-member Fourier-Wigner values
///   W(eta_m, k_j) = (eps/2) conj(psi(k_j - m/N)) psi(k_j + m/N),
///   Y(eta_m, k_j) = (eps/2) psi(-k_j + m/N) psi(k_j + m/N).
/// Hermitian symmetry W(-eta, k) = conj W(eta, k) holds exactly.
inline void wigner_member(std::span<const cplx> psi, double eps, std::int64_t m_max, std::vector<cplx>& W,
                          std::vector<cplx>& Y) {
    const auto N = static_cast<std::int64_t>(psi.size());
    const std::size_t rows = static_cast<std::size_t>(2 * m_max + 1);
    W.resize(rows * psi.size());
    Y.resize(rows * psi.size());
    auto at = [&](std::int64_t i) { return psi[static_cast<std::size_t>(((i % N) + N) % N)]; };
    for (std::int64_t m = -m_max; m <= m_max; ++m)
        for (std::int64_t j = 0; j < N; ++j) {
            const std::size_t idx = static_cast<std::size_t>(m + m_max) * psi.size() + static_cast<std::size_t>(j);
            W[idx] = 0.5 * eps * std::conj(at(j - m)) * at(j + m);
            Y[idx] = 0.5 * eps * at(-j + m) * at(j + m);
        }
}

/// Streaming ensemble accumulator. Members must be added in a fixed order
/// for bit-identical results.
class WignerAccumulator {
public:
    WignerAccumulator(std::size_t N, double eps, double eta_max = 16.0) : N_(N), eps_(eps), eta_max_(eta_max) {
        if (N < 4 || N % 2 != 0) throw std::invalid_argument("WignerAccumulator: N must be even and >= 4");
        m_max_ = eta_cutoff_index(N, eps, eta_max);
        const std::size_t sz = static_cast<std::size_t>(2 * m_max_ + 1) * N;
        sw_.assign(sz, 0.0);
        sy_.assign(sz, 0.0);
        sw2_.assign(sz, 0.0);
        sy2_.assign(sz, 0.0);
    }

    void add(std::span<const cplx> psi) {
        if (psi.size() != N_) throw std::invalid_argument("WignerAccumulator: grid mismatch");
        wigner_member(psi, eps_, m_max_, w_, y_);
        for (std::size_t i = 0; i < sw_.size(); ++i) {
            sw_[i] += w_[i];
            sy_[i] += y_[i];
            sw2_[i] += std::norm(w_[i]);
            sy2_[i] += std::norm(y_[i]);
        }
        ++count_;
    }

    void merge(const WignerAccumulator& o) {
        if (o.N_ != N_ || o.m_max_ != m_max_) throw std::invalid_argument("WignerAccumulator: grid mismatch");
        for (std::size_t i = 0; i < sw_.size(); ++i) {
            sw_[i] += o.sw_[i];
            sy_[i] += o.sy_[i];
            sw2_[i] += o.sw2_[i];
            sy2_[i] += o.sy2_[i];
        }
        count_ += o.count_;
    }

    WignerEstimate finish() const {
        WignerEstimate e;
        e.N = N_;
        e.eps = eps_;
        e.eta_max = eta_max_;
        e.m_max = m_max_;
        e.members = count_;
        const std::size_t sz = sw_.size();
        e.W.resize(sz);
        e.Y.resize(sz);
        e.W_se.assign(sz, 0.0);
        e.Y_se.assign(sz, 0.0);
        if (count_ == 0) return e;
        const auto M = static_cast<double>(count_);
        for (std::size_t i = 0; i < sz; ++i) {
            e.W[i] = sw_[i] / M;
            e.Y[i] = sy_[i] / M;
            if (count_ > 1) {
                e.W_se[i] = std::sqrt(std::max(0.0, sw2_[i] / M - std::norm(e.W[i])) / (M - 1.0));
                e.Y_se[i] = std::sqrt(std::max(0.0, sy2_[i] / M - std::norm(e.Y[i])) / (M - 1.0));
            }
        }
        return e;
    }

private:
    std::size_t N_;
    double eps_, eta_max_;
    std::int64_t m_max_ = 0;
    std::uint64_t count_ = 0;
    std::vector<cplx> sw_, sy_, w_, y_;
    std::vector<double> sw2_, sy2_;
};

inline WignerEstimate estimate_wigner(const std::vector<std::vector<cplx>>& ensemble, double eps, double eta_max = 16.0) {
    if (ensemble.empty()) throw std::invalid_argument("estimate_wigner: empty ensemble");
    WignerAccumulator acc(ensemble.front().size(), eps, eta_max);
    for (const auto& psi : ensemble) acc.add(psi);
    return acc.finish();
}

struct Paired {
    cplx value;
    double std_error = 0.0;
};

/// <W, G> = sum_m sum_j conj(W(eta_m, k_j)) G^(eta_m, k_j) d_eta d_k, with
/// the standard error propagated as if cells were independent.
inline Paired pair(const WignerEstimate& est, const TestFunction& G) {
    if (G.eta_max > est.eta_max + 1e-12)
        throw std::invalid_argument("pair: test function bandwidth exceeds the estimate's eta range");
    std::vector<cplx> terms;
    std::vector<double> var;
    terms.reserve(est.W.size());
    var.reserve(est.W.size());
    const double w = est.d_eta() * est.d_k();
    for (std::int64_t m = -est.m_max; m <= est.m_max; ++m) {
        const double eta = est.eta(m);
        const cplx gh = G.g_hat(eta);
        if (gh == cplx(0.0)) continue;
        for (std::size_t j = 0; j < est.N; ++j) {
            const cplx gk = gh * G.k_factor(est.k(j));
            const std::size_t i = est.index(m, j);
            terms.push_back(std::conj(est.W[i]) * gk * w);
            var.push_back(std::norm(gk * w) * est.W_se[i] * est.W_se[i]);
        }
    }
    return {pairwise_sum(terms), std::sqrt(pairwise_sum(var))};
}

/// Pairing of a single wave field with G (no averaging).
inline cplx pair_member(std::span<const cplx> psi, double eps, const TestFunction& G) {
    const auto N = static_cast<std::int64_t>(psi.size());
    const std::int64_t m_max = eta_cutoff_index(psi.size(), eps, G.eta_max);
    const double L = eps * static_cast<double>(N);
    const double w = (2.0 / L) / static_cast<double>(N);
    auto at = [&](std::int64_t i) { return psi[static_cast<std::size_t>(((i % N) + N) % N)]; };
    std::vector<cplx> kf(static_cast<std::size_t>(N));
    for (std::int64_t j = 0; j < N; ++j)
        kf[static_cast<std::size_t>(j)] = G.k_factor(wrap_torus(static_cast<double>(j) / static_cast<double>(N)));
    std::vector<cplx> rows;
    rows.reserve(static_cast<std::size_t>(2 * m_max + 1));
    std::vector<cplx> terms(static_cast<std::size_t>(N));
    for (std::int64_t m = -m_max; m <= m_max; ++m) {
        const cplx gh = G.g_hat(2.0 * static_cast<double>(m) / L);
        if (gh == cplx(0.0)) continue;
        for (std::int64_t j = 0; j < N; ++j) {
            const cplx Wv = 0.5 * eps * std::conj(at(j - m)) * at(j + m);
            terms[static_cast<std::size_t>(j)] = std::conj(Wv) * kf[static_cast<std::size_t>(j)];
        }
        rows.push_back(pairwise_sum(terms) * gh * w);
    }
    return pairwise_sum(rows);
}

struct BoundReport {
    bool pass = true;
    double max_ratio = 0.0;
    double worst_eta = 0.0;
    double worst_k = 0.0;
};

/// Checks |W(eta, k)| + |Y(eta, k)| <= C (1 + eta^2)^{-3/2 - kappa} on the grid.
/// A cell counts against the bound only by the amount its estimate exceeds
/// z standard errors; z = 0 checks the raw estimates.
inline BoundReport check_initial_bound(const WignerEstimate& est, double C, double kappa, double z = 3.0) {
    BoundReport r;
    for (std::int64_t m = -est.m_max; m <= est.m_max; ++m) {
        const double eta = est.eta(m);
        const double bound = C * std::pow(1.0 + eta * eta, -1.5 - kappa);
        for (std::size_t j = 0; j < est.N; ++j) {
            const std::size_t i = est.index(m, j);
            const double excess = std::abs(est.W[i]) + std::abs(est.Y[i]) - z * (est.W_se[i] + est.Y_se[i]);
            const double ratio = std::max(0.0, excess) / bound;
            if (ratio > r.max_ratio) {
                r.max_ratio = ratio;
                r.worst_eta = eta;
                r.worst_k = est.k(j);
            }
        }
    }
    r.pass = r.max_ratio <= 1.0;
    return r;
}

/// Flat binary layout (little-endian host order):
///   char[8] "KCWIGNR1"; u64 N; f64 eps; f64 eta_max; i64 m_max; u64 members;
///   then rows*N records of {f64 ReW, f64 ImW, f64 ReY, f64 ImY, f64 seW, f64 seY},
///   row-major in (m, j) with m ascending from -m_max.
inline void write_wigner_binary(const WignerEstimate& e, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.write("KCWIGNR1", 8);
    const std::uint64_t n = e.N, mem = e.members;
    const std::int64_t mm = e.m_max;
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&e.eps), 8);
    os.write(reinterpret_cast<const char*>(&e.eta_max), 8);
    os.write(reinterpret_cast<const char*>(&mm), 8);
    os.write(reinterpret_cast<const char*>(&mem), 8);
    for (std::size_t i = 0; i < e.W.size(); ++i) {
        const double rec[6] = {e.W[i].real(), e.W[i].imag(), e.Y[i].real(), e.Y[i].imag(), e.W_se[i], e.Y_se[i]};
        os.write(reinterpret_cast<const char*>(rec), sizeof rec);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline WignerEstimate read_wigner_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "KCWIGNR1") throw std::runtime_error("not a Wigner estimate file: " + path);
    WignerEstimate e;
    std::uint64_t n = 0, mem = 0;
    std::int64_t mm = 0;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&e.eps), 8);
    is.read(reinterpret_cast<char*>(&e.eta_max), 8);
    is.read(reinterpret_cast<char*>(&mm), 8);
    is.read(reinterpret_cast<char*>(&mem), 8);
    e.N = n;
    e.m_max = mm;
    e.members = mem;
    const std::size_t sz = e.rows() * e.N;
    e.W.resize(sz);
    e.Y.resize(sz);
    e.W_se.resize(sz);
    e.Y_se.resize(sz);
    for (std::size_t i = 0; i < sz; ++i) {
        double rec[6];
        is.read(reinterpret_cast<char*>(rec), sizeof rec);
        e.W[i] = {rec[0], rec[1]};
        e.Y[i] = {rec[2], rec[3]};
        e.W_se[i] = rec[4];
        e.Y_se[i] = rec[5];
    }
    if (!is) throw std::runtime_error("truncated Wigner estimate file: " + path);
    return e;
}

/// CSV with columns eta,k,re_W,im_W,se_W,re_Y,im_Y,se_Y.
inline void write_wigner_csv(const WignerEstimate& e, std::ostream& os) {
    os << "eta,k,re_W,im_W,se_W,re_Y,im_Y,se_Y\n";
    os.precision(17);
    for (std::int64_t m = -e.m_max; m <= e.m_max; ++m)
        for (std::size_t j = 0; j < e.N; ++j) {
            const std::size_t i = e.index(m, j);
            os << e.eta(m) << ',' << e.k(j) << ',' << e.W[i].real() << ',' << e.W[i].imag() << ',' << e.W_se[i] << ','
               << e.Y[i].real() << ',' << e.Y[i].imag() << ',' << e.Y_se[i] << '\n';
        }
}

}  // namespace kinchain
