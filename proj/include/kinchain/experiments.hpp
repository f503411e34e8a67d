// Experiment configuration, runners and artifact output.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kinchain/chain_sim.hpp"
#include "kinchain/kinetic_solver.hpp"
#include "kinchain/phonon_mc.hpp"
#include "kinchain/thermostat_coeffs.hpp"
#include "kinchain/wigner.hpp"

namespace kinchain {

inline constexpr const char* kVersion = "kinchain 0.1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProbeSpec {
    double yc = 0.0;
    double width = 0.2;
    double height = 1.0;
    std::vector<double> k_cos;  // k factor 1 + sum_n a_n cos(2 pi n k); empty means 1
};

struct ExperimentConfig {
    std::string preset = "nn_unpinned";
    double omega0 = 1.0;
    std::map<int, double> coefficients;
    double gamma0 = 0.5;
    double gamma1 = 1.0;
    double T = 0.0;
    double t = 0.5;                  // macroscopic time
    std::vector<double> eps{1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0};
    std::size_t M = 2000;
    std::size_t ny = 512;
    std::size_t nk = 256;
    double L = 8.0;                  // kinetic window and chain length N eps
    double eta_max = 16.0;
    double slab = 0.1;
    PacketSpec packet{1.0, 0.25, -0.4, 0.25, 0.1};
    std::vector<ProbeSpec> probes{{-1.0, 0.2, 1.0, {}}, {-0.5, 0.2, 1.0, {}}, {0.0, 0.2, 1.0, {}},
                                  {0.5, 0.2, 1.0, {}}, {1.0, 0.2, 1.0, {}}};
    std::uint64_t seed = 1;
    std::size_t n_particles = 100000;
    double chain_dt = 0.0;           // 0: default micro step
    std::string output = "out";

    CouplingSpec coupling() const {
        if (preset == "nn_unpinned") return CouplingSpec::nn_unpinned();
        if (preset == "nn_pinned") return CouplingSpec::nn_pinned(omega0);
        return CouplingSpec::custom_coefficients(coefficients);
    }

    KineticParams kinetic_params() const {
        KineticParams p;
        p.coupling = coupling();
        p.gamma0 = gamma0;
        p.gamma1 = gamma1;
        p.T = T;
        p.ny = ny;
        p.nk = nk;
        p.L = L;
        p.slab = slab;
        return p;
    }

    std::vector<TestFunction> test_functions() const {
        std::vector<TestFunction> out;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            TestFunction G;
            G.yc = probes[i].yc;
            G.width = probes[i].width;
            G.height = probes[i].height;
            G.eta_max = eta_max;
            if (!probes[i].k_cos.empty()) G.k_factor = trig_factor(1.0, probes[i].k_cos);
            G.label = "G" + std::to_string(i);
            out.push_back(G);
        }
        return out;
    }

    /// Chain site count for a given eps: N = L / eps rounded to an even integer.
    std::size_t chain_sites(double e) const {
        const auto n = static_cast<std::size_t>(std::llround(L / e));
        return n + (n % 2);
    }
};

namespace detail {

template <typename T>
T get_number(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError("config: '" + key + "' must be a number");
    return j.get<T>();
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::get_number;
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    detail::reject_unknown(j,
                           {"preset", "omega0", "coefficients", "gamma0", "gamma1", "T", "t", "eps", "M", "grid",
                            "packet", "probes", "seed", "n_particles", "chain_dt", "output"},
                           "top level");
    ExperimentConfig c;
    if (j.contains("preset")) {
        if (!j["preset"].is_string()) throw ConfigError("config: 'preset' must be a string");
        c.preset = j["preset"].get<std::string>();
        if (c.preset != "nn_unpinned" && c.preset != "nn_pinned" && c.preset != "custom")
            throw ConfigError("config: preset must be nn_unpinned, nn_pinned or custom");
    }
    if (j.contains("omega0")) c.omega0 = get_number<double>(j["omega0"], "omega0");
    if (j.contains("coefficients")) {
        if (!j["coefficients"].is_object()) throw ConfigError("config: 'coefficients' must map offsets to numbers");
        for (auto it = j["coefficients"].begin(); it != j["coefficients"].end(); ++it) {
            int off = 0;
            try {
                std::size_t pos = 0;
                off = std::stoi(it.key(), &pos);
                if (pos != it.key().size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError("config: coefficient key '" + it.key() + "' is not an integer offset");
            }
            c.coefficients[off] = get_number<double>(it.value(), "coefficients");
        }
    }
    if (c.preset == "custom" && c.coefficients.empty()) throw ConfigError("config: custom preset needs 'coefficients'");
    for (auto [key, ptr] : std::initializer_list<std::pair<const char*, double*>>{
             {"gamma0", &c.gamma0}, {"gamma1", &c.gamma1}, {"T", &c.T}, {"t", &c.t}, {"chain_dt", &c.chain_dt}})
        if (j.contains(key)) *ptr = get_number<double>(j[key], key);
    if (c.gamma0 < 0.0 || c.gamma1 < 0.0 || c.T < 0.0) throw ConfigError("config: gamma0, gamma1, T must be >= 0");
    if (!(c.t >= 0.0)) throw ConfigError("config: t must be >= 0");
    if (c.chain_dt < 0.0) throw ConfigError("config: chain_dt must be >= 0");
    if (j.contains("eps")) {
        if (!j["eps"].is_array() || j["eps"].empty()) throw ConfigError("config: 'eps' must be a nonempty array");
        c.eps.clear();
        for (const auto& e : j["eps"]) {
            const double v = get_number<double>(e, "eps");
            if (!(v > 0.0 && v <= 1.0)) throw ConfigError("config: eps values must lie in (0, 1]");
            c.eps.push_back(v);
        }
    }
    if (j.contains("M")) {
        if (!j["M"].is_number_unsigned() || j["M"].get<std::size_t>() == 0)
            throw ConfigError("config: 'M' must be a positive integer");
        c.M = j["M"].get<std::size_t>();
    }
    if (j.contains("n_particles")) {
        if (!j["n_particles"].is_number_unsigned() || j["n_particles"].get<std::size_t>() == 0)
            throw ConfigError("config: 'n_particles' must be a positive integer");
        c.n_particles = j["n_particles"].get<std::size_t>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("config: 'seed' must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        if (!g.is_object()) throw ConfigError("config: 'grid' must be an object");
        detail::reject_unknown(g, {"ny", "nk", "L", "eta_max", "slab"}, "grid");
        if (g.contains("ny")) c.ny = get_number<std::size_t>(g["ny"], "grid.ny");
        if (g.contains("nk")) c.nk = get_number<std::size_t>(g["nk"], "grid.nk");
        if (g.contains("L")) c.L = get_number<double>(g["L"], "grid.L");
        if (g.contains("eta_max")) c.eta_max = get_number<double>(g["eta_max"], "grid.eta_max");
        if (g.contains("slab")) c.slab = get_number<double>(g["slab"], "grid.slab");
    }
    if (c.ny < 6 || c.ny % 2 || c.nk < 2 || c.nk % 2) throw ConfigError("config: grid.ny >= 6 and grid.nk >= 2 must be even");
    if (!(c.L > 0.0) || !(c.eta_max > 0.0) || !(c.slab > 0.0)) throw ConfigError("config: grid.L, eta_max, slab must be > 0");
    if (j.contains("packet")) {
        const auto& p = j["packet"];
        if (!p.is_object()) throw ConfigError("config: 'packet' must be an object");
        detail::reject_unknown(p, {"A", "sigma", "y0", "k_center", "k_width"}, "packet");
        if (p.contains("A")) c.packet.amplitude = get_number<double>(p["A"], "packet.A");
        if (p.contains("sigma")) c.packet.sigma = get_number<double>(p["sigma"], "packet.sigma");
        if (p.contains("y0")) c.packet.y0 = get_number<double>(p["y0"], "packet.y0");
        if (p.contains("k_center")) c.packet.k_center = get_number<double>(p["k_center"], "packet.k_center");
        if (p.contains("k_width")) c.packet.k_width = get_number<double>(p["k_width"], "packet.k_width");
    }
    if (!(c.packet.sigma > 0.0) || !(c.packet.k_width > 0.0)) throw ConfigError("config: packet sigma and k_width must be > 0");
    try {
        BumpDensity(c.packet.k_center, c.packet.k_width);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: packet density: ") + e.what());
    }
    if (j.contains("probes")) {
        if (!j["probes"].is_array()) throw ConfigError("config: 'probes' must be an array");
        c.probes.clear();
        for (const auto& p : j["probes"]) {
            if (!p.is_object()) throw ConfigError("config: each probe must be an object");
            detail::reject_unknown(p, {"yc", "width", "height", "k_cos"}, "probe");
            ProbeSpec s;
            if (p.contains("yc")) s.yc = get_number<double>(p["yc"], "probe.yc");
            if (p.contains("width")) s.width = get_number<double>(p["width"], "probe.width");
            if (p.contains("height")) s.height = get_number<double>(p["height"], "probe.height");
            if (p.contains("k_cos")) {
                if (!p["k_cos"].is_array()) throw ConfigError("config: probe.k_cos must be an array");
                for (const auto& a : p["k_cos"]) s.k_cos.push_back(get_number<double>(a, "probe.k_cos"));
            }
            if (!(s.width > 0.0)) throw ConfigError("config: probe width must be > 0");
            c.probes.push_back(s);
        }
    }
    if (j.contains("output")) {
        if (!j["output"].is_string()) throw ConfigError("config: 'output' must be a string");
        c.output = j["output"].get<std::string>();
    }
    try {
        Dispersion d(c.coupling());
        (void)d;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: dispersion: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["preset"] = c.preset;
    j["omega0"] = c.omega0;
    nlohmann::json co = nlohmann::json::object();
    for (const auto& [k, v] : c.coefficients) co[std::to_string(k)] = v;
    j["coefficients"] = co;
    j["gamma0"] = c.gamma0;
    j["gamma1"] = c.gamma1;
    j["T"] = c.T;
    j["t"] = c.t;
    j["eps"] = c.eps;
    j["M"] = c.M;
    j["grid"] = {{"ny", c.ny}, {"nk", c.nk}, {"L", c.L}, {"eta_max", c.eta_max}, {"slab", c.slab}};
    j["packet"] = {{"A", c.packet.amplitude},
                   {"sigma", c.packet.sigma},
                   {"y0", c.packet.y0},
                   {"k_center", c.packet.k_center},
                   {"k_width", c.packet.k_width}};
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& p : c.probes) pr.push_back({{"yc", p.yc}, {"width", p.width}, {"height", p.height}, {"k_cos", p.k_cos}});
    j["probes"] = pr;
    j["seed"] = c.seed;
    j["n_particles"] = c.n_particles;
    j["chain_dt"] = c.chain_dt;
    j["output"] = c.output;
    return j;
}

/// Records every artifact with its column description.
class Manifest {
public:
    Manifest(const ExperimentConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {}
    void add(const std::string& file, const std::string& columns) { files_[file] = columns; }
    void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
    void write(const std::filesystem::path& dir) const {
        nlohmann::json j;
        j["version"] = kVersion;
        j["command"] = command_;
        j["config"] = to_json(cfg_);
        j["files"] = files_;
        for (auto it = extra_.begin(); it != extra_.end(); ++it) j[it.key()] = it.value();
        std::ofstream(dir / "manifest.json") << j.dump(2) << '\n';
    }

private:
    ExperimentConfig cfg_;
    std::string command_;
    std::map<std::string, std::string> files_;
    nlohmann::json extra_ = nlohmann::json::object();
};

inline std::filesystem::path ensure_output_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (!std::filesystem::is_directory(p)) throw ConfigError("output directory '" + dir + "' cannot be created");
    return p;
}

// ---------------------------------------------------------------- coefficients

inline void write_coefficients_csv(const InterfaceCoefficients& c, std::ostream& os) {
    os << "k,valid,nu_re,nu_im,p_plus,p_minus,g,sum,nu_error\n";
    os.precision(17);
    for (std::size_t j = 0; j < c.size(); ++j)
        os << c.grid[j] << ',' << (c.valid[j] ? 1 : 0) << ',' << c.nu[j].real() << ',' << c.nu[j].imag() << ','
           << c.p_plus[j] << ',' << c.p_minus[j] << ',' << c.g[j] << ',' << c.p_plus[j] + c.p_minus[j] + c.g[j] << ','
           << c.nu_error[j] << '\n';
}

// ---------------------------------------------------------------- kinetic

/// Limit initial condition of the packet generator on top of the temperature T:
/// W0 = T + (A^2/2) exp(-(y - y0)^2 / sigma^2) rho(k).
inline KineticField packet_limit_field(const KineticGrid& g, const PacketSpec& p, double T) {
    const BumpDensity rho(p.k_center, p.k_width);
    return KineticField::from_function(g, [&](double y, double k) {
        const double u = (y - p.y0) / p.sigma;
        return T + 0.5 * p.amplitude * p.amplitude * std::exp(-u * u) * rho(k);
    });
}

/// Integral of the packet part of the limit initial condition.
inline double packet_energy(const PacketSpec& p) {
    return 0.5 * p.amplitude * p.amplitude * p.sigma * std::sqrt(kPi);
}

// ---------------------------------------------------------------- chain ensembles

struct ChainEnsembleResult {
    std::vector<double> times;             // micro times of the energy outputs
    std::vector<double> energy_mean, energy_se;
    std::vector<std::vector<cplx>> final_psi;  // wave functions at the end, if kept
    std::vector<std::vector<double>> probe_values;  // [member][probe]
};

struct ChainEnsembleSpec {
    ChainParams params;
    PacketSpec packet;
    double t_micro = 0.0;
    double dt = 0.0;          // 0: default
    std::size_t members = 1;
    std::uint64_t seed = 1;
    std::size_t outputs = 1;  // energy outputs after t = 0
    bool keep_psi = false;
    std::vector<TestFunction> probes;
};

/// Runs independent trajectories in parallel; every result is stored per
/// member and reduced in member order.
inline ChainEnsembleResult run_chain_ensemble(const ChainEnsembleSpec& spec) {
    const ChainModel model(spec.params);
    const double dt0 = spec.dt > 0.0 ? spec.dt : model.default_dt();
    const std::size_t n_out = std::max<std::size_t>(1, spec.outputs);
    const double chunk = spec.t_micro / static_cast<double>(n_out);
    const auto steps = static_cast<std::size_t>(std::ceil(chunk / dt0 - 1e-9));
    const double dt = steps > 0 ? chunk / static_cast<double>(steps) : 0.0;
    const std::size_t M = spec.members;

    ChainEnsembleResult r;
    r.times.resize(n_out + 1);
    for (std::size_t o = 0; o <= n_out; ++o) r.times[o] = chunk * static_cast<double>(o);
    std::vector<std::vector<double>> energy(M, std::vector<double>(n_out + 1));
    if (spec.keep_psi) r.final_psi.resize(M);
    r.probe_values.assign(M, std::vector<double>(spec.probes.size()));
    const auto members = static_cast<std::ptrdiff_t>(M);

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t mi = 0; mi < members; ++mi) {
        const auto m = static_cast<std::size_t>(mi);
        ChainState s = model.init_state(spec.packet, spec.seed, m, M);
        energy[m][0] = model.energy(s).total;
        for (std::size_t o = 1; o <= n_out; ++o) {
            if (steps > 0) model.advance(s, dt, steps);
            energy[m][o] = model.energy(s).total;
        }
        const std::vector<cplx> psi = model.wave_function(s);
        for (std::size_t q = 0; q < spec.probes.size(); ++q)
            r.probe_values[m][q] = pair_member(psi, spec.params.eps, spec.probes[q]).real();
        if (spec.keep_psi) r.final_psi[m] = psi;
    }

    r.energy_mean.resize(n_out + 1);
    r.energy_se.resize(n_out + 1);
    for (std::size_t o = 0; o <= n_out; ++o) {
        std::vector<double> col(M);
        for (std::size_t m = 0; m < M; ++m) col[m] = energy[m][o];
        const double mean = pairwise_sum(col) / static_cast<double>(M);
        for (auto& x : col) x = (x - mean) * (x - mean);
        const double var = M > 1 ? pairwise_sum(col) / static_cast<double>(M - 1) : 0.0;
        r.energy_mean[o] = mean;
        r.energy_se[o] = std::sqrt(var / static_cast<double>(M));
    }
    return r;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe probe_mean(const ChainEnsembleResult& r, std::size_t q) {
    const std::size_t M = r.probe_values.size();
    std::vector<double> col(M);
    for (std::size_t m = 0; m < M; ++m) col[m] = r.probe_values[m][q];
    const double mean = pairwise_sum(col) / static_cast<double>(M);
    for (auto& x : col) x = (x - mean) * (x - mean);
    const double var = M > 1 ? pairwise_sum(col) / static_cast<double>(M - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(M))};
}

// ---------------------------------------------------------------- convergence

struct ConvergeRow {
    double eps = 0.0;
    std::size_t N = 0;
    double d = 0.0;
    std::vector<MeanSe> chain;
};

struct ConvergeResult {
    std::vector<double> kinetic;  // <W(t), G> per probe
    std::vector<double> sup_G;
    double energy_scale = 0.0;
    std::vector<ConvergeRow> rows;
};

/// For each eps: chain ensemble to micro time t/eps, Wigner pairing with the
/// probes, and d(eps) = max_G |<W_eps, G> - <W, G>| against the kinetic solution.
inline ConvergeResult run_converge(const ExperimentConfig& cfg) {
    ConvergeResult res;
    const auto probes = cfg.test_functions();
    const KineticSolver solver(cfg.kinetic_params());
    const KineticField W0 = packet_limit_field(solver.grid(), cfg.packet, cfg.T);
    const KineticField Wt = solver.solve(W0, cfg.t);
    for (const auto& G : probes) {
        res.kinetic.push_back(solver.pair_field(Wt, G));
        res.sup_G.push_back(G.sup_norm());
    }
    res.energy_scale = packet_energy(cfg.packet);
    for (double e : cfg.eps) {
        ChainEnsembleSpec spec;
        spec.params = ChainParams{cfg.coupling(), cfg.chain_sites(e), e, cfg.gamma0, cfg.gamma1, cfg.T};
        spec.packet = cfg.packet;
        spec.t_micro = cfg.t / e;
        spec.dt = cfg.chain_dt;
        spec.members = cfg.M;
        spec.seed = cfg.seed;
        spec.probes = probes;
        const ChainEnsembleResult ens = run_chain_ensemble(spec);
        ConvergeRow row;
        row.eps = e;
        row.N = spec.params.N;
        for (std::size_t q = 0; q < probes.size(); ++q) {
            row.chain.push_back(probe_mean(ens, q));
            row.d = std::max(row.d, std::abs(row.chain.back().mean - res.kinetic[q]));
        }
        res.rows.push_back(row);
    }
    return res;
}

inline void write_converge_csv(const ConvergeResult& r, std::ostream& os) {
    os.precision(12);
    os << "eps,N,d";
    for (std::size_t q = 0; q < r.kinetic.size(); ++q) os << ",chain_G" << q << ",se_G" << q << ",kinetic_G" << q;
    os << '\n';
    for (const auto& row : r.rows) {
        os << row.eps << ',' << row.N << ',' << row.d;
        for (std::size_t q = 0; q < r.kinetic.size(); ++q)
            os << ',' << row.chain[q].mean << ',' << row.chain[q].se << ',' << r.kinetic[q];
        os << '\n';
    }
}

}  // namespace kinchain
