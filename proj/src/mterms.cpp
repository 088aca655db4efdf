#include "bandlab/mterms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bandlab/rng.hpp"

namespace bandlab {

void ChainSpec::validate(int N) const {
    if (z.empty()) throw ArgumentError("chain: needs at least one spectral point");
    if (static_cast<int>(A.size()) != k() - 1)
        throw ArgumentError("chain: expected k-1 observables");
    for (const auto& a : A)
        if (a.size() != N) throw ArgumentError("chain: observable size mismatch");
    if (test && test->size() != N) throw ArgumentError("chain: test observable size mismatch");
    double lo = 1e300, hi = 0;
    for (const auto& p : z) {
        if (!(p.eta > 0)) throw DomainError("chain: spectral point on the real axis");
        lo = std::min(lo, p.eta);
        hi = std::max(hi, p.eta);
    }
    if (hi > comparability * lo) throw ArgumentError("chain: imaginary parts not comparable");
}

double ChainSpec::min_eta() const {
    double lo = 1e300;
    for (const auto& p : z) lo = std::min(lo, p.eta);
    return lo;
}

Complex MTerm::trace_against(const DiagObservable& B) const {
    return diag.cwiseProduct(B.diag.cast<Complex>()).sum();
}

StabilityOperator::StabilityOperator(const VarianceProfile& p) : p_(&p) {}

void StabilityOperator::ensure() const {
    std::call_once(once_, [this] {
        Eigen::SelfAdjointEigenSolver<Mat> es(p_->S);
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of S failed");
        V_ = es.eigenvectors();
        lambda_ = es.eigenvalues();
    });
}

const Vec& StabilityOperator::spectrum() const {
    ensure();
    return lambda_;
}

double StabilityOperator::condition(Complex w) const {
    ensure();
    double lo = 1e300, hi = 0;
    for (Index i = 0; i < lambda_.size(); ++i) {
        const double d = std::abs(1.0 - w * lambda_(i));
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return hi / lo;
}

CVec StabilityOperator::solve(Complex w, const CVec& y) const {
    ensure();
    CVec c = V_.transpose() * y;
    for (Index i = 0; i < c.size(); ++i) c(i) /= (1.0 - w * lambda_(i));
    return V_ * c;
}

MTable::MTable(const StabilityOperator& op, const std::vector<Complex>& m, const std::vector<CVec>& A)
    : m_(m) {
    const int k = static_cast<int>(m.size());
    if (static_cast<int>(A.size()) != k - 1) throw ArgumentError("MTable: expected k-1 observables");
    const Index N = op.profile().N;
    t_.assign(k, std::vector<CVec>(k));
    for (int j = 0; j < k; ++j) t_[j][j] = CVec::Ones(N);
    for (int len = 1; len < k; ++len) {
        for (int j = 0; j + len < k; ++j) {
            const int l = j + len;
            CVec rhs = A[j].cwiseProduct(t_[j + 1][l]);
            for (int i = j + 1; i < l; ++i)
                rhs += (m[j] * m[i]) * op.apply_S(t_[j][i]).cwiseProduct(t_[i][l]);
            const Complex w = m[j] * m[l];
            const double cond = op.condition(w);
            if (!(cond <= 1e12))
                throw NumericalError("stability solve ill-conditioned at (j,k)=(" + std::to_string(j + 1) +
                                     "," + std::to_string(l + 1) + "), cond=" + std::to_string(cond));
            t_[j][l] = op.solve(w, rhs);
        }
    }
}

CVec MTable::full(int j, int k) const {
    Complex prod = 1.0;
    for (int i = j; i <= k; ++i) prod *= m_[i];
    return prod * t_[j][k];
}

namespace {

std::vector<Complex> ms_of(const ChainSpec& c) {
    std::vector<Complex> m;
    for (const auto& p : c.z) m.push_back(p.m);
    return m;
}

std::vector<CVec> obs_of(const std::vector<DiagObservable>& A) {
    std::vector<CVec> out;
    for (const auto& a : A) out.push_back(a.diag.cast<Complex>());
    return out;
}

double rel(const CVec& a, const CVec& b) {
    const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    if (scale == 0.0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

CVec m_chain_raw(const StabilityOperator& op, const std::vector<Complex>& m, const std::vector<CVec>& A) {
    MTable t(op, m, A);
    return t.full(0, static_cast<int>(m.size()) - 1);
}

MTerm m_chain(const StabilityOperator& op, const ChainSpec& c) {
    c.validate(op.profile().N);
    MTerm M;
    M.k = c.k();
    M.diag = m_chain_raw(op, ms_of(c), obs_of(c.A));
    return M;
}

MTerm m_chain(const VarianceProfile& p, const ChainSpec& c) {
    StabilityOperator op(p);
    return m_chain(op, c);
}

double check_cyclicity(const StabilityOperator& op, const ChainSpec& c) {
    c.validate(op.profile().N);
    if (c.k() < 2) throw ArgumentError("check_cyclicity: needs k >= 2");
    if (!c.test) throw ArgumentError("check_cyclicity: needs a test observable");
    const int k = c.k();
    auto m = ms_of(c);
    auto A = obs_of(c.A);
    const CVec Ak = c.test->diag.cast<Complex>();
    MTable t1(op, m, A);
    const Complex lhs = t1.tilde(0, k - 1).cwiseProduct(Ak).sum();

    std::vector<Complex> m2{m[k - 1]};
    m2.insert(m2.end(), m.begin(), m.end() - 1);
    std::vector<CVec> A2{Ak};
    A2.insert(A2.end(), A.begin(), A.end() - 1);
    MTable t2(op, m2, A2);
    const Complex rhs = A[k - 2].cwiseProduct(t2.tilde(0, k - 1)).sum();
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    return std::abs(lhs - rhs) / scale;
}

double check_divided_difference(const StabilityOperator& op, const ChainSpec& c, int j) {
    c.validate(op.profile().N);
    const int k = c.k();
    if (j < 0 || j >= k - 1) throw ArgumentError("check_divided_difference: bad position");
    if ((c.A[j].diag.array() != 1.0).any())
        throw ArgumentError("check_divided_difference: A_j must be the identity");
    const Complex dz = c.z[j].z - c.z[j + 1].z;
    if (std::abs(dz) < 1e-8) throw ArgumentError("check_divided_difference: z_j and z_{j+1} too close");
    auto m = ms_of(c);
    auto A = obs_of(c.A);
    const CVec lhs = m_chain_raw(op, m, A);

    auto drop = [&](int zi) {
        std::vector<Complex> mm = m;
        std::vector<CVec> AA = A;
        mm.erase(mm.begin() + zi);
        AA.erase(AA.begin() + j);
        return m_chain_raw(op, mm, AA);
    };
    const CVec rhs = (drop(j + 1) - drop(j)) / dz;
    return rel(lhs, rhs);
}

CVec dm_dt_rhs(const StabilityOperator& op, const std::vector<Complex>& m, const std::vector<CVec>& A) {
    const int k = static_cast<int>(m.size());
    MTable t(op, m, A);
    CVec out = (0.5 * k) * t.full(0, k - 1);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            // sum_q (M_[i,j])_qq S^q is the single diagonal observable S M_[i,j]
            const CVec inserted = op.apply_S(t.full(i, j));
            std::vector<Complex> mm(m.begin(), m.begin() + i + 1);
            mm.insert(mm.end(), m.begin() + j, m.end());
            std::vector<CVec> AA(A.begin(), A.begin() + i);
            AA.push_back(inserted);
            AA.insert(AA.end(), A.begin() + j, A.end());
            out += m_chain_raw(op, mm, AA);
        }
    }
    return out;
}

double check_dm_dt(const StabilityOperator& op, const ChainSpec& c, double h) {
    c.validate(op.profile().N);
    const auto m = ms_of(c);
    const auto A = obs_of(c.A);
    // Along a characteristic m_t = m_0 e^{t/2}, so shifting time rescales every m.
    auto shifted = [&](double dt) {
        std::vector<Complex> mm = m;
        for (auto& v : mm) v *= std::exp(0.5 * dt);
        return m_chain_raw(op, mm, A);
    };
    const CVec fd = (shifted(h) - shifted(-h)) / (2.0 * h);
    const CVec rhs = dm_dt_rhs(op, m, A);
    const double scale = rhs.cwiseAbs().maxCoeff();
    return (fd - rhs).cwiseAbs().maxCoeff() / scale;
}

nlohmann::json MSizeReport::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
        j.push_back({{"k", r.k},
                     {"traceless", r.traceless},
                     {"eta", r.eta},
                     {"av_constant", r.av_constant},
                     {"iso_constant", r.iso_constant}});
    return j;
}

MSizeReport check_m_size_bounds(const VarianceProfile& p, const std::vector<Complex>& zs,
                                const MSizeOptions& opt) {
    StabilityOperator op(p);
    const int N = p.N;
    const double crit = std::pow(double(p.W) / N, 2);
    MSizeReport rep;
    for (size_t zi = 0; zi < zs.size(); ++zi) {
        const auto z = SpectralPoint::make(zs[zi], p.W, N);
        const auto U = upsilon_build(N, p.W, z.eta, opt.family);
        for (int k : opt.ks) {
            std::vector<Complex> m(k);
            for (int i = 0; i < k; ++i) m[i] = (i % 2 == 0) ? z.m : std::conj(z.m);
            const int nmax = (z.eta <= crit && k >= 2) ? k : 0;
            for (int n = 0; n <= nmax; ++n) {
                MSizeRow row;
                row.k = k;
                row.traceless = n;
                row.eta = z.eta;
                for (int t = 0; t < opt.tuples; ++t) {
                    KeyedEngine eng(opt.seed, zi * 131 + k, static_cast<std::uint64_t>(t * 17 + n));
                    std::vector<int> xs(k);
                    for (auto& x : xs) x = static_cast<int>(eng() % static_cast<std::uint64_t>(N));
                    const int a = static_cast<int>(eng() % static_cast<std::uint64_t>(N));
                    std::vector<CVec> obs;
                    for (int i = 0; i < k; ++i) {
                        auto Ai = make_special_observable(p, xs[i]);
                        if (i < n) Ai = traceless_part(Ai);
                        obs.push_back(Ai.diag.cast<Complex>());
                    }
                    const CVec test = obs.back();
                    obs.pop_back();
                    const CVec M = m_chain_raw(op, m, obs);
                    const double tr = std::abs(M.cwiseProduct(test).sum());
                    if (n == 0) {
                        row.av_constant = std::max(row.av_constant, tr / (U.ell_eta() * size_av(U, xs)));
                        std::vector<int> inner(xs.begin(), xs.end() - 1);
                        const double iso = std::abs(M(a)) / (std::sqrt(U.ell_eta()) * size_iso(U, a, inner, a));
                        row.iso_constant = std::max(row.iso_constant, iso);
                    } else {
                        const double ne = N * z.eta;
                        const double bound = std::pow(ne, -(k - 1)) *
                                             std::pow(double(N) * N * z.eta / (double(p.W) * p.W), (n + 1) / 2);
                        row.av_constant = std::max(row.av_constant, tr / bound);
                    }
                }
                rep.rows.push_back(row);
            }
        }
    }
    return rep;
}

}  // namespace bandlab
