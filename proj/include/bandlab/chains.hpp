#pragma once

#include <optional>
#include <vector>

#include "bandlab/common.hpp"
#include "bandlab/ensemble.hpp"
#include "bandlab/kernels.hpp"
#include "bandlab/mterms.hpp"

namespace bandlab {

struct ResolventCache {
    Vec lambda;   // ascending
    CMat U;       // columns are eigenvectors
    ProfilePtr profile;
    SymmetryClass symmetry = SymmetryClass::complex_hermitian;
    std::uint64_t seed = 0;
    int N() const { return static_cast<int>(lambda.size()); }
    CVec g(Complex z) const;   // 1 / (lambda - z)
};

ResolventCache eigendecompose(const MatrixSample& s);
double reconstruction_error(const ResolventCache& c, const CMat& H);

CMat resolvent(const ResolventCache& c, Complex z);
// U^* diag(a) U
CMat to_eigenbasis(const ResolventCache& c, const Vec& a);

struct ChainValue {
    Complex value;            // the random chain
    Complex deterministic;    // matching M contribution, zero if not subtracted
    bool subtracted = false;
    Complex fluctuation() const { return value - deterministic; }
};

// Low-level forms on pre-transformed observables. For traces At holds k matrices
// (A_1..A_k); for bilinear forms it holds k-1.
Complex trace_eigen(const ResolventCache& c, const std::vector<Complex>& z,
                    const std::vector<const CMat*>& At);
// Returns the vector G_1 A_1 ... G_k v in the standard basis.
CVec apply_chain(const ResolventCache& c, const std::vector<Complex>& z,
                 const std::vector<const CMat*>& At, const CVec& v);
// Same for several right vectors at once (columns of V).
CMat apply_chain(const ResolventCache& c, const std::vector<Complex>& z,
                 const std::vector<const CMat*>& At, const CMat& V);

ChainValue chain_trace(const ResolventCache& c, const ChainSpec& spec, const MTerm* M = nullptr);
ChainValue chain_bilinear(const ResolventCache& c, const ChainSpec& spec, const CVec& u,
                          const CVec& v, const MTerm* M = nullptr);

// E[H R H]: the diagonal part S[R] in both classes, plus T[R] in the real class.
CMat self_energy_apply(const VarianceProfile& p, const CMat& R, SymmetryClass sym);

double loss_alpha(int k, int K);
double loss_beta(int k, int K);

enum class PsiKind { iso, av };

struct EmpiricalPsi {
    PsiKind kind = PsiKind::av;
    int k = 0;
    double value = 0.0;
    double exponent = 0.0;
};

EmpiricalPsi psi_av(Complex fluctuation, int k, int K, double size, double ell_eta);
EmpiricalPsi psi_iso(Complex fluctuation, int k, int K, double size, double ell_eta);

// Max of Psi over a batch of samples for one chain. Averaged mode needs spec.test;
// isotropic mode needs u and v. Observables must carry certificates.
EmpiricalPsi empirical_psi(const std::vector<ResolventCache>& batch, const ChainSpec& spec,
                           const ControlFunction& U, int K, PsiKind kind,
                           const CVec* u = nullptr, const CVec* v = nullptr);

}  // namespace bandlab
