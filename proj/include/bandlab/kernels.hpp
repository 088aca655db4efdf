#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "bandlab/common.hpp"
#include "bandlab/ensemble.hpp"
#include "bandlab/observables.hpp"
#include "bandlab/semicircle.hpp"

namespace bandlab {

enum class KernelKind { theta, xi };

struct TwoPointKernel {
    CMat values;
    KernelKind kind = KernelKind::theta;
    SpectralPoint z1, z2;
    double rcond = 1.0;
    Complex weight() const;   // m1*conj(m2) for theta, m1*m2 for xi
};

// theta: m1 conj(m2) S (I - m1 conj(m2) S)^{-1}; xi: the same with m2 unconjugated.
TwoPointKernel two_point_kernel(const VarianceProfile& p, const SpectralPoint& z1,
                                const SpectralPoint& z2, KernelKind kind);
// wS (I - wS)^{-1} for an arbitrary weight |w| < 1.
CMat weighted_kernel(const Mat& S, Complex w, double* rcond_out = nullptr);

enum class UpsilonKind { polynomial, exponential, custom };

struct UpsilonFamily {
    UpsilonKind kind = UpsilonKind::polynomial;
    double D = 6.0;
    double c0 = 1.0;
    static UpsilonFamily polynomial(double D = 6.0) { return {UpsilonKind::polynomial, D, 1.0}; }
    static UpsilonFamily exponential(double c0, double D) { return {UpsilonKind::exponential, D, c0}; }
};

struct ControlFunction {
    Mat values;
    double eta = 0.0;
    double ell = 0.0;
    int N = 0;
    int W = 0;
    UpsilonFamily family;
    double ell_eta() const { return ell * eta; }
    double operator()(int x, int y) const { return values(x, y); }
};

ControlFunction upsilon_build(int N, int W, double eta, const UpsilonFamily& fam);

struct TripleNorm {
    double value = 0.0;
    Vec certificate;
};

TripleNorm triple_norm(const VarianceProfile& p, const DiagObservable& A);
// Copy of A with norm and certificate attached.
DiagObservable with_certificate(const VarianceProfile& p, const DiagObservable& A);

double generalized_upsilon(const CVec& u, const CVec& v, const ControlFunction& U);
double generalized_upsilon(const CVec& u, const DiagObservable& A, const ControlFunction& U);
double generalized_upsilon(const DiagObservable& A, const CVec& v, const ControlFunction& U);
double generalized_upsilon(const DiagObservable& A, const DiagObservable& B, const ControlFunction& U);

// Index forms: xs holds the k-1 interior indices (iso) or the k cyclic indices (av).
double size_iso(const ControlFunction& U, int a, const std::vector<int>& xs, int b);
double size_av(const ControlFunction& U, const std::vector<int>& xs);
// General forms; observables must carry certificates.
double size_iso(const ControlFunction& U, const CVec& u, const std::vector<DiagObservable>& A,
                const CVec& v);
double size_av(const ControlFunction& U, const std::vector<DiagObservable>& A);

// (Theta^x)_{ab} = Theta_ab - Theta_ax
CMat regularize_theta(const TwoPointKernel& theta, int x);

// P_{s,t} and Q_{s,t} between two points of one characteristic (s <= t).
Mat saturated_propagator(const VarianceProfile& p, const SpectralPoint& zs, const SpectralPoint& zt);
CMat unsaturated_propagator(const VarianceProfile& p, const SpectralPoint& zs, const SpectralPoint& zt);

struct AdmissibilityOptions {
    std::vector<double> etas{0.01, 0.03, 0.1, 0.3, 1.0};
    double E = 0.0;
    int pairs = 64;         // (x,y) subsample for (iv)/(v)
    int rows = 8;           // a-rows for (vi)
    bool exhaustive = false;
    double c2 = 1.0;        // (vi) applies for eta >= c2 (W/N)^2
    std::uint64_t seed = 1;
};

struct AdmissibilityRow {
    std::string condition;
    double fitted_constant = 0.0;
    nlohmann::json grid;
};

struct AdmissibilityReport {
    std::vector<AdmissibilityRow> rows;
    // c2 sweep for (vi): eta / (W/N)^2 versus the constant at that single eta
    std::vector<std::pair<double, double>> regularity_sweep;
    double constant(const std::string& condition) const;
    nlohmann::json to_json() const;
};

AdmissibilityReport verify_control_admissibility(const VarianceProfile& p, const UpsilonFamily& fam,
                                                 const AdmissibilityOptions& opt);

}  // namespace bandlab
