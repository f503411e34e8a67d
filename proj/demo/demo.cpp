// Small end-to-end run: interface coefficients, a kinetic solve of the
// default packet, and the same probes from the particle solver.
#include <cstdio>

#include "kinchain/kinchain.hpp"

int main() {
    using namespace kinchain;
    const ExperimentConfig cfg;
    const Dispersion disp(cfg.coupling());
    const NuValue nv = nu(0.25, cfg.gamma1, disp);
    std::printf("nu(1/4) = %.8f%+.2ei\n", nv.value.real(), nv.value.imag());

    KineticParams kp = cfg.kinetic_params();
    kp.ny = 256;
    kp.nk = 128;
    const KineticSolver s(kp);
    const KineticField W0 = packet_limit_field(s.grid(), cfg.packet, cfg.T);
    const KineticField W = s.solve(W0, cfg.t);
    std::printf("t = %.2f  |W|_2: %.6f -> %.6f\n", cfg.t, s.l2_norm(W0), s.l2_norm(W));

    McParams mp;
    mp.n_particles = 50000;
    const auto G = cfg.test_functions();
    const McResult r = run_mc(W0, cfg.t, s, mp, G);
    std::printf("%-4s %8s %12s %12s %10s\n", "G", "yc", "kinetic", "particles", "se");
    for (std::size_t q = 0; q < G.size(); ++q)
        std::printf("%-4s %8.2f %12.6f %12.6f %10.2e\n", G[q].label.c_str(), G[q].yc, s.pair_field(W, G[q]),
                    r.probes[q].value, r.probes[q].std_error);
    return 0;
}
