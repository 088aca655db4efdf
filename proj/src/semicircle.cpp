#include "bandlab/semicircle.hpp"

#include <algorithm>
#include <cmath>

namespace bandlab {

Complex stieltjes_m(Complex z) {
    if (z.imag() == 0.0 && std::abs(z.real()) <= 2.0)
        throw DomainError("stieltjes_m: z on the spectrum [-2,2]");
    // The two roots multiply to 1. Take the large one from the numerically
    // stable combination and invert it, which lands on |m| < 1.
    const Complex s = std::sqrt(z * z - 4.0);
    const Complex r1 = (-z + s) / 2.0;
    const Complex r2 = (-z - s) / 2.0;
    const Complex big = std::abs(r1) >= std::abs(r2) ? r1 : r2;
    Complex m = 1.0 / big;
    // one Newton step on the quadratic cleans the last ulps
    m -= (m * m + z * m + 1.0) / (2.0 * m + z);
    return m;
}

double semicircle_density(double E) {
    return std::sqrt(std::max(4.0 - E * E, 0.0)) / (2.0 * M_PI);
}

double localization_length(double W, double N, double eta) {
    if (!(eta > 0.0)) throw DomainError("localization_length: eta must be positive");
    return std::min(W / std::sqrt(eta), N);
}

bool in_bulk_domain(Complex z, double kappa, double delta0, double C0, int N) {
    const double eta = std::abs(z.imag());
    if (eta < std::pow(static_cast<double>(N), -1.0 + delta0)) return false;
    if (std::abs(z) > C0) return false;
    const Complex m = stieltjes_m(z);
    const Complex u = m / std::abs(m);
    return std::abs(u * u - 1.0) >= kappa;
}

SpectralPoint SpectralPoint::make(Complex z, double W, double N) {
    SpectralPoint p;
    p.z = z;
    p.m = stieltjes_m(z);
    p.eta = std::abs(z.imag());
    p.ell = localization_length(W, N, p.eta);
    return p;
}

SpectralPoint SpectralPoint::conj() const {
    SpectralPoint p = *this;
    p.z = std::conj(z);
    p.m = std::conj(m);
    return p;
}

}  // namespace bandlab
