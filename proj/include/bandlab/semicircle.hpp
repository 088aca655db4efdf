#pragma once

#include "bandlab/common.hpp"

namespace bandlab {

// Solution of m^2 + z m + 1 = 0 with Im m * Im z > 0.
Complex stieltjes_m(Complex z);

double semicircle_density(double E);

bool in_bulk_domain(Complex z, double kappa, double delta0, double C0, int N);

// min(W / sqrt(eta), N)
double localization_length(double W, double N, double eta);

struct SpectralPoint {
    Complex z;
    Complex m;
    double eta = 0.0;
    double ell = 0.0;

    static SpectralPoint make(Complex z, double W, double N);
    SpectralPoint conj() const;
    double dyson_residual() const { return std::abs(-1.0 / m - z - m); }
};

}  // namespace bandlab
