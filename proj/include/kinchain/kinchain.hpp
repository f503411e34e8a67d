// Umbrella header.
#pragma once

#include "kinchain/numerics.hpp"
#include "kinchain/dispersion.hpp"
#include "kinchain/scattering.hpp"
#include "kinchain/thermostat_coeffs.hpp"
#include "kinchain/mild_dynamics.hpp"
#include "kinchain/chain_sim.hpp"
#include "kinchain/wigner.hpp"
#include "kinchain/kinetic_solver.hpp"
#include "kinchain/phonon_mc.hpp"
#include "kinchain/experiments.hpp"
#include "kinchain/validation.hpp"
