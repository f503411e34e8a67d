// Command-line driver: coeffs, kinetic, mc, chain, converge, validate.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kinchain/kinchain.hpp"

namespace {

using namespace kinchain;

int cmd_coeffs(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const auto c = interface_coefficients(TorusGrid(cfg.nk), cfg.gamma1, Dispersion(cfg.coupling()));
    std::ofstream f(out / "coeffs.csv");
    write_coefficients_csv(c, f);
    Manifest m(cfg, "coeffs");
    m.add("coeffs.csv", "k,valid,nu_re,nu_im,p_plus,p_minus,g,sum,nu_error (band-edge rows have valid=0 and NaN values)");
    m.write(out);
    return 0;
}

void write_probe_table(const std::filesystem::path& path, const std::vector<TestFunction>& G,
                       const std::vector<double>& values, const std::vector<double>* se) {
    std::ofstream f(path);
    f.precision(12);
    f << "label,yc,width,value" << (se ? ",std_error" : "") << '\n';
    for (std::size_t q = 0; q < G.size(); ++q) {
        f << G[q].label << ',' << G[q].yc << ',' << G[q].width << ',' << values[q];
        if (se) f << ',' << (*se)[q];
        f << '\n';
    }
}

int cmd_kinetic(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const KineticSolver s(cfg.kinetic_params());
    const KineticField W0 = packet_limit_field(s.grid(), cfg.packet, cfg.T);
    SolveReport rep;
    const KineticField W = s.solve(W0, cfg.t, &rep);
    {
        std::ofstream f(out / "kinetic.csv");
        write_field_csv(W, f);
    }
    const auto G = cfg.test_functions();
    std::vector<double> vals;
    for (const auto& g : G) vals.push_back(s.pair_field(W, g));
    write_probe_table(out / "probes_kinetic.csv", G, vals, nullptr);
    Manifest m(cfg, "kinetic");
    m.add("kinetic.csv", "y,k,W on the solver grid at time t");
    m.add("probes_kinetic.csv", "label,yc,width,value = int W G dy dk");
    m.note("diagnostics", {{"l2_norm", s.l2_norm(W)},
                           {"dissipation_rate", s.dissipation_rate(W)},
                           {"interface_residual", s.interface_residual(W)},
                           {"slabs", rep.slabs},
                           {"max_picard_iterations", rep.max_picard_iterations},
                           {"max_contraction", rep.max_contraction}});
    m.write(out);
    return 0;
}

int cmd_mc(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const KineticSolver s(cfg.kinetic_params());
    const KineticField W0 = packet_limit_field(s.grid(), cfg.packet, cfg.T);
    McParams mp;
    mp.n_particles = cfg.n_particles;
    mp.seed = cfg.seed;
    const auto G = cfg.test_functions();
    const McResult r = run_mc(W0, cfg.t, s, mp, G);
    {
        std::ofstream f(out / "mc.csv");
        write_field_csv(r.W, f);
        std::ofstream e(out / "mc_se.csv");
        write_field_csv(r.W_se, e);
    }
    std::vector<double> vals, se;
    for (const auto& p : r.probes) {
        vals.push_back(p.value);
        se.push_back(p.std_error);
    }
    write_probe_table(out / "probes_mc.csv", G, vals, &se);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    Manifest m(cfg, "mc");
    m.add("mc.csv", "y,k,W histogram density (same schema as kinetic.csv)");
    m.add("mc_se.csv", "y,k,W where W is the per-cell standard error");
    m.add("probes_mc.csv", "label,yc,width,value,std_error");
    m.note("particles", {{"initial", r.n_initial},
                         {"emitted", r.n_emitted},
                         {"initial_weight", r.initial_weight},
                         {"emitted_weight", r.emitted_weight},
                         {"alive_weight", r.alive_weight}});
    m.write(out);
    return 0;
}

int cmd_chain(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const double e = cfg.eps.front();
    ChainEnsembleSpec spec;
    spec.params = ChainParams{cfg.coupling(), cfg.chain_sites(e), e, cfg.gamma0, cfg.gamma1, cfg.T};
    spec.packet = cfg.packet;
    spec.t_micro = cfg.t / e;
    spec.dt = cfg.chain_dt;
    spec.members = cfg.M;
    spec.seed = cfg.seed;
    spec.outputs = 10;
    spec.keep_psi = true;
    spec.probes = cfg.test_functions();
    const ChainEnsembleResult r = run_chain_ensemble(spec);
    const WignerEstimate est = estimate_wigner(r.final_psi, e, cfg.eta_max);
    write_wigner_binary(est, (out / "wigner.bin").string());
    {
        std::ofstream f(out / "wigner.csv");
        write_wigner_csv(est, f);
        std::ofstream en(out / "energy.csv");
        en.precision(12);
        en << "t_micro,t_macro,energy_mean,energy_se\n";
        for (std::size_t o = 0; o < r.times.size(); ++o)
            en << r.times[o] << ',' << r.times[o] * e << ',' << r.energy_mean[o] << ',' << r.energy_se[o] << '\n';
    }
    std::vector<double> vals, se;
    for (std::size_t q = 0; q < spec.probes.size(); ++q) {
        const MeanSe ms = probe_mean(r, q);
        vals.push_back(ms.mean);
        se.push_back(ms.se);
    }
    write_probe_table(out / "probes_chain.csv", spec.probes, vals, &se);
    Manifest m(cfg, "chain");
    m.add("wigner.bin", "magic KCWIGNR1, header (N, eps, eta_max, m_max, members), records W re/im, Y re/im, W_se, Y_se");
    m.add("wigner.csv", "eta,k,re_W,im_W,se_W,re_Y,im_Y,se_Y");
    m.add("energy.csv", "t_micro,t_macro,energy_mean,energy_se");
    m.add("probes_chain.csv", "label,yc,width,value,std_error of the Wigner pairing");
    m.note("chain", {{"eps", e}, {"N", spec.params.N}, {"members", cfg.M}});
    m.write(out);
    return 0;
}

int cmd_converge(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const ConvergeResult r = run_converge(cfg);
    {
        std::ofstream f(out / "converge.csv");
        write_converge_csv(r, f);
    }
    for (const auto& row : r.rows) std::cout << "eps " << row.eps << "  N " << row.N << "  d " << row.d << '\n';
    Manifest m(cfg, "converge");
    m.add("converge.csv", "eps,N,d, then per probe q: chain_Gq,se_Gq,kinetic_Gq");
    m.note("energy_scale", r.energy_scale);
    m.write(out);
    return 0;
}

int cmd_validate(const ExperimentConfig& cfg, const std::filesystem::path& out, const std::vector<int>& only) {
    const auto results = run_validation(only, [](const CriterionResult& r) {
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name << " | " << r.detail << " ["
                  << r.seconds << " s]" << std::endl;
    });
    nlohmann::json j = nlohmann::json::array();
    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.pass;
        j.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
    }
    std::ofstream(out / "validation.json") << j.dump(2) << '\n';
    Manifest m(cfg, "validate");
    m.add("validation.json", "one record per criterion: id, name, pass, detail, seconds");
    m.write(out);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinchain: kinetic limit of a harmonic chain with a thermostatted site"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON experiment configuration");
    app.add_option("--seed", seed, "base RNG seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    std::vector<int> only;
    auto* coeffs = app.add_subcommand("coeffs", "interface coefficient table");
    auto* kinetic = app.add_subcommand("kinetic", "deterministic kinetic solve");
    auto* mc = app.add_subcommand("mc", "particle solve");
    auto* chain = app.add_subcommand("chain", "microscopic ensemble and Wigner estimate");
    auto* converge = app.add_subcommand("converge", "eps -> 0 convergence table");
    auto* validate = app.add_subcommand("validate", "run the invariant suite");
    validate->add_option("--only", only, "criterion ids to run");
    for (auto* s : {coeffs, kinetic, mc, chain, converge, validate}) s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.output = out_dir;
        const auto out = ensure_output_dir(cfg.output);
        if (*coeffs) return cmd_coeffs(cfg, out);
        if (*kinetic) return cmd_kinetic(cfg, out);
        if (*mc) return cmd_mc(cfg, out);
        if (*chain) return cmd_chain(cfg, out);
        if (*converge) return cmd_converge(cfg, out);
        if (*validate) return cmd_validate(cfg, out, only);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
