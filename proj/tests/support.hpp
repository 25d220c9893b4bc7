#pragma once

#include <adhesion/scenario.hpp>

#include <cmath>

namespace adhesion::testing {

/// Affine off-rate 1 + k|u|, exponential initial density, v_I = 0.
inline ModelParams base_params(double dt = 1e-3, double T = 0.2) {
    ModelParams p;
    p.epsilon = 0.1;
    p.offrate = OffRateSpec::affine(1.0, 1.0);
    p.beta = TimeFunction::constant(1.0);
    p.force = TimeFunction::constant(0.0);
    p.rho_init = AgeFunction::exponential(0.5, 1.0);
    p.v_init = AgeFunction::zero();
    p.grid.dt = dt;
    p.grid.T = T;
    return p;
}

inline ModelParams constant_zeta(double dt, double T, double zeta0 = 1.0, double beta = 1.0) {
    ModelParams p = base_params(dt, T);
    p.offrate = OffRateSpec::constant(zeta0);
    p.beta = TimeFunction::constant(beta);
    return p;
}

/// Plain uniform grid with da = dt / eps.
inline Grid grid_of(double dt, double eps, double T, double a_max) { return make_grid(dt, eps, T, a_max); }

} // namespace adhesion::testing
