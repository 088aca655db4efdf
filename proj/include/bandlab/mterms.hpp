#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "json.hpp"

#include "bandlab/common.hpp"
#include "bandlab/ensemble.hpp"
#include "bandlab/kernels.hpp"
#include "bandlab/observables.hpp"
#include "bandlab/semicircle.hpp"

namespace bandlab {

struct ChainSpec {
    std::vector<SpectralPoint> z;          // z_1..z_k
    std::vector<DiagObservable> A;         // A_1..A_{k-1}
    std::optional<DiagObservable> test;    // A_k for traced quantities
    double comparability = 100.0;          // max eta / min eta allowed

    int k() const { return static_cast<int>(z.size()); }
    void validate(int N) const;
    double min_eta() const;
};

struct MTerm {
    CVec diag;   // M is diagonal; only the diagonal is ever stored
    int k = 0;
    Complex trace_against(const DiagObservable& B) const;
};

// Shared factorisation of S: (1 - w S)^{-1} y = V (V^T y) / (1 - w lambda).
// The eigendecomposition is computed once, on first use, under a once-flag.
class StabilityOperator {
public:
    explicit StabilityOperator(const VarianceProfile& p);
    CVec solve(Complex w, const CVec& y) const;
    double condition(Complex w) const;
    CVec apply_S(const CVec& y) const { return p_->S * y; }
    const VarianceProfile& profile() const { return *p_; }
    const Vec& spectrum() const;

private:
    void ensure() const;
    const VarianceProfile* p_;
    mutable std::once_flag once_;
    mutable Mat V_;
    mutable Vec lambda_;
};

// All \tilde M_{[j,k]} for one chain, indexed 0-based by (j,k) with j <= k.
class MTable {
public:
    MTable(const StabilityOperator& op, const std::vector<Complex>& m, const std::vector<CVec>& A);
    const CVec& tilde(int j, int k) const { return t_[j][k]; }
    CVec full(int j, int k) const;   // with the product of m's

private:
    std::vector<Complex> m_;
    std::vector<std::vector<CVec>> t_;
};

MTerm m_chain(const StabilityOperator& op, const ChainSpec& c);
MTerm m_chain(const VarianceProfile& p, const ChainSpec& c);
// Chain from bare m-values and diagonals (used by identity checks and dM/dt).
CVec m_chain_raw(const StabilityOperator& op, const std::vector<Complex>& m,
                 const std::vector<CVec>& A);

double check_cyclicity(const StabilityOperator& op, const ChainSpec& c);
double check_divided_difference(const StabilityOperator& op, const ChainSpec& c, int j);
// Returns the max relative residual of the central difference against the right side.
double check_dm_dt(const StabilityOperator& op, const ChainSpec& c, double h);
// Right side of the time-derivative identity at the chain's current points.
CVec dm_dt_rhs(const StabilityOperator& op, const std::vector<Complex>& m,
               const std::vector<CVec>& A);

struct MSizeOptions {
    std::vector<int> ks{1, 2, 3};
    int tuples = 32;
    std::uint64_t seed = 7;
    UpsilonFamily family = UpsilonFamily::polynomial(6.0);
};

struct MSizeRow {
    int k = 0;
    int traceless = 0;
    double eta = 0.0;
    double av_constant = 0.0;    // max |Tr[M S^{x_k}]| / (l eta s_av)
    double iso_constant = 0.0;   // max |M_aa| / (sqrt(l eta) s_iso)
};

struct MSizeReport {
    std::vector<MSizeRow> rows;
    nlohmann::json to_json() const;
};

// z alternates between E+i eta and its conjugate along the chain.
MSizeReport check_m_size_bounds(const VarianceProfile& p, const std::vector<Complex>& zs,
                                const MSizeOptions& opt);

}  // namespace bandlab
