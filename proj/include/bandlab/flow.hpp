#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bandlab/chains.hpp"
#include "bandlab/common.hpp"
#include "bandlab/ensemble.hpp"
#include "bandlab/kernels.hpp"
#include "bandlab/semicircle.hpp"

namespace bandlab {

struct Trajectory {
    std::vector<double> t;             // 0 = t_0 < ... < t_n = T
    std::vector<SpectralPoint> z;
    double T = 0.0;
    double W = 1.0;
    double N = 1.0;
    std::optional<double> t_star;      // eta_{t*} = (W/N)^2 if crossed

    // Exact between nodes: m scales by e^{dt/2} and z = -m - 1/m.
    SpectralPoint point_at(double time) const;
    std::string to_csv() const;
};

// dz/dt = -z/2 - m(z), integrated backward from (T, z_T) by classical RK4.
Trajectory solve_characteristic(Complex zT, double T, double step, double W, double N,
                                double C0 = 10.0);

// Exact Ornstein-Uhlenbeck transition of the standardized entries.
MatrixSample ou_evolve(const MatrixSample& s, double dt, std::uint64_t seed);

// Max-entry relative residual of the central difference of Theta_t (or Xi_t)
// against (I + K_t) K_t.
double check_theta_ode(const VarianceProfile& p, const Trajectory& traj, double t, double h,
                       KernelKind kind = KernelKind::theta);

struct FlowPsiConfig {
    std::vector<int> xs{0, 0};   // special observables; size k (last is the test observable)
    int a = 0, b = 0;            // isotropic entry
    int K = 8;
    double T = 1.0;
    int n_steps = 5;
    int samples = 20;
    std::uint64_t seed = 1;
    SymmetryClass symmetry = SymmetryClass::complex_hermitian;
    EntryDistribution distribution = EntryDistribution::gaussian;
    UpsilonFamily family = UpsilonFamily::polynomial(6.0);
};

struct FlowPsiRow {
    double t = 0.0;
    Complex z;
    double eta = 0.0;
    double ell = 0.0;
    double psi_av = 0.0;
    double psi_iso = 0.0;
};

std::vector<FlowPsiRow> flow_psi_trace(ProfilePtr p, Complex zT, const FlowPsiConfig& cfg);
std::string flow_rows_to_csv(const std::vector<FlowPsiRow>& rows);

}  // namespace bandlab
