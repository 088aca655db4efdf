#include "bandlab/chains.hpp"

#include <algorithm>
#include <cmath>

namespace bandlab {

CVec ResolventCache::g(Complex z) const {
    if (z.imag() == 0.0) throw DomainError("resolvent at eta = 0");
    CVec out(lambda.size());
    for (Index i = 0; i < lambda.size(); ++i) out(i) = 1.0 / (lambda(i) - z);
    return out;
}

ResolventCache eigendecompose(const MatrixSample& s) {
    ResolventCache c;
    c.profile = s.profile;
    c.symmetry = s.symmetry;
    c.seed = s.seed;
    if (s.is_real()) {
        Eigen::SelfAdjointEigenSolver<Mat> es(s.H.real());
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
        c.lambda = es.eigenvalues();
        c.U = es.eigenvectors().cast<Complex>();
    } else {
        Eigen::SelfAdjointEigenSolver<CMat> es(s.H);
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
        c.lambda = es.eigenvalues();
        c.U = es.eigenvectors();
    }
    return c;
}

double reconstruction_error(const ResolventCache& c, const CMat& H) {
    const CMat R = c.U * c.lambda.cast<Complex>().asDiagonal() * c.U.adjoint();
    return (R - H).norm() / H.norm();
}

CMat resolvent(const ResolventCache& c, Complex z) {
    return c.U * c.g(z).asDiagonal() * c.U.adjoint();
}

CMat to_eigenbasis(const ResolventCache& c, const Vec& a) {
    if (a.size() != c.N()) throw ArgumentError("to_eigenbasis: size mismatch");
    return c.U.adjoint() * (a.cast<Complex>().asDiagonal() * c.U);
}

Complex trace_eigen(const ResolventCache& c, const std::vector<Complex>& z,
                    const std::vector<const CMat*>& At) {
    const size_t k = z.size();
    if (At.size() != k || k == 0) throw ArgumentError("trace_eigen: need k observables");
    const CVec g1 = c.g(z[0]);
    if (k == 1) return g1.cwiseProduct(At[0]->diagonal()).sum();
    CMat T = g1.asDiagonal() * (*At[0]);
    for (size_t j = 1; j + 1 < k; ++j) {
        T = T * c.g(z[j]).asDiagonal();
        T = T * (*At[j]);
    }
    // Tr[T diag(g_k) A_k] = sum_{i,l} T_il g_l (A_k)_li
    const CVec gk = c.g(z[k - 1]);
    const CMat& Ak = *At[k - 1];
    const CVec rows = T.transpose().cwiseProduct(Ak).rowwise().sum();
    return gk.cwiseProduct(rows).sum();
}

CMat apply_chain(const ResolventCache& c, const std::vector<Complex>& z,
                 const std::vector<const CMat*>& At, const CMat& V) {
    const size_t k = z.size();
    if (At.size() + 1 != k) throw ArgumentError("apply_chain: need k-1 observables");
    CMat w = c.U.adjoint() * V;
    w = c.g(z[k - 1]).asDiagonal() * w;
    for (size_t j = k - 1; j-- > 0;) {
        w = (*At[j]) * w;
        w = c.g(z[j]).asDiagonal() * w;
    }
    return c.U * w;
}

CVec apply_chain(const ResolventCache& c, const std::vector<Complex>& z,
                 const std::vector<const CMat*>& At, const CVec& v) {
    return apply_chain(c, z, At, CMat(v)).col(0);
}

namespace {

std::vector<Complex> zs_of(const ChainSpec& s) {
    std::vector<Complex> z;
    for (const auto& p : s.z) z.push_back(p.z);
    return z;
}

}  // namespace

ChainValue chain_trace(const ResolventCache& c, const ChainSpec& spec, const MTerm* M) {
    spec.validate(c.N());
    if (!spec.test) throw ArgumentError("chain_trace: needs a test observable A_k");
    std::vector<CMat> mats;
    for (const auto& a : spec.A) mats.push_back(to_eigenbasis(c, a.diag));
    mats.push_back(to_eigenbasis(c, spec.test->diag));
    std::vector<const CMat*> ptr;
    for (const auto& m : mats) ptr.push_back(&m);
    ChainValue v;
    v.value = trace_eigen(c, zs_of(spec), ptr);
    if (M) {
        v.deterministic = M->trace_against(*spec.test);
        v.subtracted = true;
    }
    return v;
}

ChainValue chain_bilinear(const ResolventCache& c, const ChainSpec& spec, const CVec& u,
                          const CVec& v, const MTerm* M) {
    spec.validate(c.N());
    std::vector<CMat> mats;
    for (const auto& a : spec.A) mats.push_back(to_eigenbasis(c, a.diag));
    std::vector<const CMat*> ptr;
    for (const auto& m : mats) ptr.push_back(&m);
    ChainValue out;
    out.value = u.dot(apply_chain(c, zs_of(spec), ptr, v));
    if (M) {
        out.deterministic = u.dot(M->diag.cwiseProduct(v));
        out.subtracted = true;
    }
    return out;
}

CMat self_energy_apply(const VarianceProfile& p, const CMat& R, SymmetryClass sym) {
    const Index N = p.N;
    if (R.rows() != N || R.cols() != N) throw ArgumentError("self_energy_apply: size mismatch");
    CMat out = CMat::Zero(N, N);
    out.diagonal() = p.S.cast<Complex>() * R.diagonal();
    if (sym == SymmetryClass::real_symmetric) {
        for (Index a = 0; a < N; ++a)
            for (Index b = 0; b < N; ++b)
                if (a != b) out(a, b) += p.S(a, b) * R(b, a);
    }
    return out;
}

double loss_alpha(int k, int K) {
    if (K < 2 || K % 2) throw ArgumentError("loss exponents: K must be even");
    if (k < 1 || k > K) throw ArgumentError("loss exponents: need 1 <= k <= K");
    if (k <= K / 2) return 0.0;
    return 0.5 * std::sqrt(2.0 * k / K - 1.0);
}

double loss_beta(int k, int K) {
    if (k < 1 || k > K) throw ArgumentError("loss exponents: need 1 <= k <= K");
    if (k <= K - 1) return loss_alpha(k + 1, K);
    return 0.5 + loss_alpha(K / 2 + 1, K);
}

EmpiricalPsi psi_av(Complex fluctuation, int k, int K, double size, double ell_eta) {
    EmpiricalPsi p;
    p.kind = PsiKind::av;
    p.k = k;
    p.exponent = loss_beta(k, K);
    p.value = std::abs(fluctuation) / (std::pow(ell_eta, p.exponent) * size);
    return p;
}

EmpiricalPsi psi_iso(Complex fluctuation, int k, int K, double size, double ell_eta) {
    EmpiricalPsi p;
    p.kind = PsiKind::iso;
    p.k = k;
    p.exponent = loss_alpha(k, K);
    p.value = std::abs(fluctuation) / (std::pow(ell_eta, p.exponent) * size);
    return p;
}

EmpiricalPsi empirical_psi(const std::vector<ResolventCache>& batch, const ChainSpec& spec,
                           const ControlFunction& U, int K, PsiKind kind, const CVec* u,
                           const CVec* v) {
    if (batch.empty()) throw ArgumentError("empirical_psi: empty batch");
    const int k = spec.k();
    if (k > K) throw ArgumentError("empirical_psi: chain longer than K");
    const VarianceProfile& p = *batch.front().profile;
    const MTerm M = m_chain(p, spec);
    double size;
    if (kind == PsiKind::av) {
        if (!spec.test) throw ArgumentError("empirical_psi: averaged mode needs a test observable");
        std::vector<DiagObservable> obs = spec.A;
        obs.push_back(*spec.test);
        size = size_av(U, obs);
    } else {
        if (!u || !v) throw ArgumentError("empirical_psi: isotropic mode needs u and v");
        size = size_iso(U, *u, spec.A, *v);
    }
    EmpiricalPsi best;
    best.kind = kind;
    best.k = k;
    best.exponent = kind == PsiKind::av ? loss_beta(k, K) : loss_alpha(k, K);
    for (const auto& c : batch) {
        const ChainValue cv = kind == PsiKind::av ? chain_trace(c, spec, &M) : chain_bilinear(c, spec, *u, *v, &M);
        const auto ps = kind == PsiKind::av ? psi_av(cv.fluctuation(), k, K, size, U.ell_eta())
                                            : psi_iso(cv.fluctuation(), k, K, size, U.ell_eta());
        best.value = std::max(best.value, ps.value);
    }
    return best;
}

}  // namespace bandlab
