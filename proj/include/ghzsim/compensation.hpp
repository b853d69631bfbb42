#pragma once

// Waveplate synthesis of single-qubit unitaries and the compensation
// optimizer that undoes collection-fiber rotations on qubits 1..3 of the
// four-photon state. Qubit 0 carries no compensation plates.
//
// A QWP(x0) HWP(x1) QWP(x2) sequence reaches every SU(2) element up to
// global phase; decompose_su2 inverts the sequence in closed form through
// the Euler-like structure of the product.

#include <array>
#include <cstdint>

#include "ghzsim/polarization.hpp"
#include "ghzsim/spectral.hpp"  // ExecPolicy

namespace ghzsim {

// angles such that QWP(x0) HWP(x1) QWP(x2) equals u up to global phase,
// each in the canonical range [-pi/2, pi/2)
WaveplateSetting decompose_su2(const LocalUnitary& u);

struct CompensationPlan {
    std::array<LocalUnitary, 3> unitaries;     // qubits 1..3
    std::array<WaveplateSetting, 3> waveplates;
    double achieved_fidelity = 0.0;
};

struct CompensationOptions {
    int n_starts = 16;          // at least 16 deterministic multi-starts
    double tol = 1e-8;          // fidelity convergence tolerance
    int max_iter = 4000;
    uint64_t seed = 7;
    ExecPolicy policy = ExecPolicy::parallel;
};

// maximizes F((1 x U1 x U2 x U3)^dag rho (1 x U1 x U2 x U3), GHZ_0) over the
// nine waveplate-sequence angles; never returns less than the identity plan;
// ties between starts break toward the lowest start index
CompensationPlan optimize_compensation(const DensityMatrix& rho,
                                       const CompensationOptions& options = {});

// conjugates rho by 1 x U1 x U2 x U3
DensityMatrix apply_plan(const DensityMatrix& rho, const CompensationPlan& plan);

}  // namespace ghzsim
