#include "bandlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bandlab/lp.hpp"
#include "bandlab/rng.hpp"

namespace bandlab {

Complex TwoPointKernel::weight() const {
    return kind == KernelKind::theta ? z1.m * std::conj(z2.m) : z1.m * z2.m;
}

CMat weighted_kernel(const Mat& S, Complex w, double* rcond_out) {
    const Index N = S.rows();
    const CMat wS = w * S.cast<Complex>();
    const CMat A = CMat::Identity(N, N) - wS;
    Eigen::PartialPivLU<CMat> lu(A);
    const double rc = lu.rcond();
    if (rcond_out) *rcond_out = rc;
    if (!(rc > 1e-13))
        throw NumericalError("kernel solve is singular to working precision, rcond=" +
                             std::to_string(rc));
    return lu.solve(wS);
}

TwoPointKernel two_point_kernel(const VarianceProfile& p, const SpectralPoint& z1,
                                const SpectralPoint& z2, KernelKind kind) {
    TwoPointKernel k;
    k.kind = kind;
    k.z1 = z1;
    k.z2 = z2;
    k.values = weighted_kernel(p.S, k.weight(), &k.rcond);
    return k;
}

ControlFunction upsilon_build(int N, int W, double eta, const UpsilonFamily& fam) {
    if (fam.kind == UpsilonKind::polynomial && fam.D < 6.0)
        throw ArgumentError("upsilon_build: polynomial family needs D >= 6");
    if (fam.kind == UpsilonKind::exponential && !(fam.c0 > 0.0))
        throw ArgumentError("upsilon_build: exponential family needs c0 > 0");
    if (fam.kind == UpsilonKind::custom)
        throw ArgumentError("upsilon_build: custom family has no generator");
    ControlFunction U;
    U.N = N;
    U.W = W;
    U.eta = eta;
    U.ell = localization_length(W, N, eta);
    U.family = fam;
    const double base = 1.0 / (U.ell * eta);
    std::vector<double> prof(N / 2 + 1);
    for (int d = 0; d <= N / 2; ++d) {
        const double r = d / U.ell;
        if (fam.kind == UpsilonKind::polynomial)
            prof[d] = base * std::pow(1.0 + r, -fam.D);
        else
            prof[d] = base * std::exp(-fam.c0 * r) + (U.ell / eta) * std::pow(double(N), -fam.D);
    }
    U.values.resize(N, N);
    for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y) U.values(x, y) = prof[periodic_distance(x, y, N)];
    return U;
}

TripleNorm triple_norm(const VarianceProfile& p, const DiagObservable& A) {
    if (A.size() != p.N) throw ArgumentError("triple_norm: size mismatch");
    if (A.tag == ObservableTag::special && A.certificate && A.norm) return {*A.norm, *A.certificate};
    const auto sol = solve_covering_lp(p.S, A.diag.cwiseAbs());
    return {sol.value, sol.a};
}

DiagObservable with_certificate(const VarianceProfile& p, const DiagObservable& A) {
    DiagObservable B = A;
    const auto t = triple_norm(p, A);
    B.norm = t.value;
    B.certificate = t.certificate;
    return B;
}

namespace {

const Vec& cert(const DiagObservable& A) {
    if (!A.certificate)
        throw ArgumentError("observable has no triple-norm certificate; call triple_norm first");
    return *A.certificate;
}

Vec abs2(const CVec& u) { return u.cwiseAbs2(); }

}  // namespace

double generalized_upsilon(const CVec& u, const CVec& v, const ControlFunction& U) {
    return abs2(u).dot(U.values * abs2(v));
}
double generalized_upsilon(const CVec& u, const DiagObservable& A, const ControlFunction& U) {
    return abs2(u).dot(U.values * cert(A));
}
double generalized_upsilon(const DiagObservable& A, const CVec& v, const ControlFunction& U) {
    return cert(A).dot(U.values * abs2(v));
}
double generalized_upsilon(const DiagObservable& A, const DiagObservable& B, const ControlFunction& U) {
    return cert(A).dot(U.values * cert(B));
}

double size_iso(const ControlFunction& U, int a, const std::vector<int>& xs, int b) {
    const int k = static_cast<int>(xs.size()) + 1;
    double prod = 1.0;
    int prev = a;
    for (int x : xs) {
        prod *= U(prev, x);
        prev = x;
    }
    prod *= U(prev, b);
    return std::pow(U.ell_eta(), -0.5 * (k - 1)) * std::sqrt(prod);
}

double size_av(const ControlFunction& U, const std::vector<int>& xs) {
    const int k = static_cast<int>(xs.size());
    if (k == 0) throw ArgumentError("size_av: empty index list");
    double prod = U(xs.back(), xs.front());
    for (int j = 1; j < k; ++j) prod *= U(xs[j - 1], xs[j]);
    return std::pow(U.ell_eta(), -0.5 * k) * std::sqrt(prod);
}

double size_iso(const ControlFunction& U, const CVec& u, const std::vector<DiagObservable>& A,
                const CVec& v) {
    if (A.empty()) return std::sqrt(generalized_upsilon(u, v, U));
    const int k = static_cast<int>(A.size()) + 1;
    double prod = generalized_upsilon(u, A.front(), U);
    for (size_t j = 1; j < A.size(); ++j) prod *= generalized_upsilon(A[j - 1], A[j], U);
    prod *= generalized_upsilon(A.back(), v, U);
    return std::pow(U.ell_eta(), -0.5 * (k - 1)) * std::sqrt(prod);
}

double size_av(const ControlFunction& U, const std::vector<DiagObservable>& A) {
    const int k = static_cast<int>(A.size());
    if (k == 0) throw ArgumentError("size_av: empty observable list");
    if (k == 1) {
        const double n = A[0].norm ? *A[0].norm : cert(A[0]).sum();
        return n / U.ell_eta();
    }
    double prod = generalized_upsilon(A.back(), A.front(), U);
    for (int j = 1; j < k; ++j) prod *= generalized_upsilon(A[j - 1], A[j], U);
    return std::pow(U.ell_eta(), -0.5 * k) * std::sqrt(prod);
}

CMat regularize_theta(const TwoPointKernel& theta, int x) {
    if (theta.kind != KernelKind::theta) throw ArgumentError("regularize_theta: needs a theta kernel");
    const Index N = theta.values.rows();
    if (x < 0 || x >= N) throw ArgumentError("regularize_theta: index out of range");
    CMat R = theta.values;
    for (Index b = 0; b < N; ++b) R.col(b) -= theta.values.col(x);
    return R;
}

namespace {

template <class Scalar>
Eigen::Matrix<Scalar, -1, -1> propagator(const Mat& S, Scalar ws, Scalar wt) {
    using M = Eigen::Matrix<Scalar, -1, -1>;
    const Index N = S.rows();
    const M Ss = S.cast<Scalar>();
    const M I = M::Identity(N, N);
    const M left = I - ws * Ss;
    const M right = I - wt * Ss;
    // left and right commute, so the order of the solve is irrelevant
    Eigen::PartialPivLU<M> lu(right);
    return (wt / ws) * lu.solve(left);
}

}  // namespace

Mat saturated_propagator(const VarianceProfile& p, const SpectralPoint& zs, const SpectralPoint& zt) {
    return propagator<double>(p.S, std::norm(zs.m), std::norm(zt.m));
}

CMat unsaturated_propagator(const VarianceProfile& p, const SpectralPoint& zs, const SpectralPoint& zt) {
    return propagator<Complex>(p.S, zs.m * zs.m, zt.m * zt.m);
}

// ---------------------------------------------------------------------------

double AdmissibilityReport::constant(const std::string& condition) const {
    for (const auto& r : rows)
        if (r.condition == condition) return r.fitted_constant;
    throw ArgumentError("no admissibility row named " + condition);
}

nlohmann::json AdmissibilityReport::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row{{"condition", r.condition}, {"grid", r.grid}};
        if (std::isfinite(r.fitted_constant))
            row["fitted_constant"] = r.fitted_constant;
        else
            row["fitted_constant"] = nullptr;
        j.push_back(row);
    }
    nlohmann::json sweep = nlohmann::json::array();
    for (auto [r, c] : regularity_sweep) sweep.push_back({{"eta_over_crit", r}, {"constant", c}});
    return {{"rows", j}, {"regularity_sweep", sweep}};
}

namespace {

struct PairSet {
    std::vector<std::pair<int, int>> xy;
};

PairSet make_pairs(int N, const AdmissibilityOptions& opt) {
    PairSet ps;
    if (opt.exhaustive) {
        for (int x = 0; x < N; ++x)
            for (int y = 0; y < N; ++y) ps.xy.emplace_back(x, y);
        return ps;
    }
    const int n = std::max(2, opt.pairs);
    for (int r = 0; r < n; ++r) {
        KeyedEngine eng(opt.seed, 0xad, static_cast<std::uint64_t>(r));
        const int x = static_cast<int>(eng() % static_cast<std::uint64_t>(N));
        // distances spread evenly over [0, N/2]
        const int d = static_cast<int>(std::lround(double(r) * (N / 2) / (n - 1)));
        ps.xy.emplace_back(x, (x + d) % N);
    }
    return ps;
}

std::vector<int> make_rows(int N, const AdmissibilityOptions& opt) {
    std::vector<int> rows;
    if (opt.exhaustive || opt.rows >= N) {
        for (int a = 0; a < N; ++a) rows.push_back(a);
        return rows;
    }
    for (int r = 0; r < opt.rows; ++r) {
        KeyedEngine eng(opt.seed, 0x6a, static_cast<std::uint64_t>(r));
        rows.push_back(static_cast<int>(eng() % static_cast<std::uint64_t>(N)));
    }
    return rows;
}

double regularity_constant(const CMat& T, const Mat& U, double ell, int W, const std::vector<int>& rows) {
    const int N = static_cast<int>(T.rows());
    double worst = 0.0;
    for (int a : rows) {
        for (int b = 0; b < N; ++b) {
            for (int c = 0; c < N; ++c) {
                if (b == c) continue;
                const double w = std::min(double(periodic_distance(b, c, N) + W), ell) / ell;
                const double rhs = w * (U(a, b) + U(a, c));
                worst = std::max(worst, std::abs(T(a, b) - T(a, c)) / rhs);
            }
        }
    }
    return worst;
}

}  // namespace

AdmissibilityReport verify_control_admissibility(const VarianceProfile& p, const UpsilonFamily& fam,
                                                 const AdmissibilityOptions& opt) {
    const int N = p.N;
    const int W = p.W;
    std::vector<double> etas = opt.etas;
    std::sort(etas.begin(), etas.end());
    const size_t G = etas.size();
    if (G == 0) throw ArgumentError("verify_control_admissibility: empty eta grid");

    std::vector<SpectralPoint> pts;
    std::vector<ControlFunction> ups;
    for (double eta : etas) {
        pts.push_back(SpectralPoint::make(Complex(opt.E, eta), W, N));
        ups.push_back(upsilon_build(N, W, eta, fam));
    }
    const ControlFunction ups1 = upsilon_build(N, W, 1.0, fam);
    const double crit = std::pow(double(W) / N, 2);
    const auto pairs = make_pairs(N, opt);
    const auto rows = make_rows(N, opt);

    nlohmann::json grid{{"N", N}, {"W", W}, {"E", opt.E}, {"etas", etas},
                        {"pairs", pairs.xy.size()}, {"rows", rows.size()}};
    AdmissibilityReport rep;
    auto add = [&](const std::string& name, double c, nlohmann::json extra = {}) {
        nlohmann::json g = grid;
        if (!extra.is_null()) g.update(extra);
        rep.rows.push_back({name, c, g});
    };

    // (i), (vi), (vii) need the kernels on every pair eta1 <= eta2
    double c_theta = 0, c_xi = 0, c_reg = 0, c_flat = 0;
    bool any_reg = false;
    std::vector<double> sweep(G, 0.0);
    for (size_t i = 0; i < G; ++i) {
        for (size_t j = i; j < G; ++j) {
            const auto th = two_point_kernel(p, pts[i], pts[j], KernelKind::theta);
            const auto xi = two_point_kernel(p, pts[i], pts[j], KernelKind::xi);
            const Mat& Ui = ups[i].values;
            c_theta = std::max(c_theta, (th.values.cwiseAbs().array() / Ui.array()).maxCoeff());
            c_xi = std::max(c_xi, (xi.values.cwiseAbs().array() / ups1.values.array()).maxCoeff());
            const CVec mean = th.values.rowwise().mean();
            double dev = 0.0;
            for (Index b = 0; b < N; ++b) dev = std::max(dev, (th.values.col(b) - mean).cwiseAbs().maxCoeff());
            c_flat = std::max(c_flat, dev / (double(N) / (double(W) * W)));
            const double rc = regularity_constant(th.values, Ui, ups[i].ell, W, rows);
            if (i == j) sweep[i] = rc;
            if (etas[i] >= opt.c2 * crit) {
                c_reg = std::max(c_reg, rc);
                any_reg = true;
            }
        }
    }
    add("i_theta", c_theta);
    add("i_xi", c_xi);

    // (ii)
    double c_max = 0, c_col = 0, dprime = 0, c_deloc = 0;
    bool any_deloc = false;
    for (size_t i = 0; i < G; ++i) {
        const Mat& U = ups[i].values;
        c_max = std::max(c_max, U.maxCoeff() * ups[i].ell_eta());
        c_col = std::max(c_col, U.colwise().sum().maxCoeff() * etas[i]);
        dprime = std::max(dprime, std::log(1.0 / U.minCoeff()) / (2.0 * std::log(double(N))));
        if (etas[i] <= crit) {
            any_deloc = true;
            const double ne = N * etas[i];
            c_deloc = std::max({c_deloc, U.maxCoeff() * ne, 1.0 / (U.minCoeff() * ne)});
        }
    }
    add("ii_max", c_max);
    add("ii_colsum", c_col);
    add("ii_lower_Dprime", dprime);
    add("ii_deloc", any_deloc ? c_deloc : std::numeric_limits<double>::quiet_NaN(),
        {{"evaluated", any_deloc}});

    // (iii)
    double c_mon = 0;
    for (size_t i = 0; i < G; ++i)
        for (size_t j = i + 1; j < G; ++j)
            c_mon = std::max(c_mon, (ups[j].values.array() / ups[i].values.array()).maxCoeff());
    add("iii_monotone", G > 1 ? c_mon : std::numeric_limits<double>::quiet_NaN());

    // (iv), (v)
    double c_tri = 0, c_sq = 0, c_conv = 0, c_w1 = 0, c_w2 = 0;
    for (size_t i = 0; i < G; ++i) {
        for (size_t j = i; j < G; ++j) {
            const ControlFunction& U1 = ups[i];
            const ControlFunction& U2 = ups[j];
            const double l1 = U1.ell, l2 = U2.ell, e1 = etas[i], e2 = etas[j];
            for (auto [x, y] : pairs.xy) {
                double mx = 0, sq = 0, conv = 0, w1 = 0, w2 = 0;
                for (int a = 0; a < N; ++a) {
                    const double u2 = U2(x, a);
                    const double u1 = U1(a, y);
                    mx = std::max(mx, u2 * u1);
                    sq += std::sqrt(u2 * u1);
                    conv += u2 * u1;
                    const double wt = std::min(double(periodic_distance(a, x, N) + W), l1) / l1;
                    w1 += wt * std::sqrt(u2 * u1);
                    w2 += wt * std::sqrt(u2 * U2(a, y));
                }
                const double u1xy = U1(x, y);
                c_tri = std::max(c_tri, mx / (u1xy / (l2 * e2)));
                c_sq = std::max(c_sq, sq / (std::sqrt(l2 * e2 * u1xy) / e2));
                c_conv = std::max(c_conv, conv / (u1xy / e2));
                const double base = (1.0 / e2) * (l2 / l1) * std::sqrt(l1 * e1 * u1xy);
                c_w1 = std::max(c_w1, w1 / (base * std::sqrt(l2 * e2 / (l1 * e1))));
                c_w2 = std::max(c_w2, w2 / base);
            }
        }
    }
    add("iv_triangle", c_tri);
    add("iv_sqrt_convolution", c_sq);
    add("iv_convolution", c_conv);
    add("v_weighted_1", c_w1);
    add("v_weighted_2", c_w2);
    add("vi_regularity", any_reg ? c_reg : std::numeric_limits<double>::quiet_NaN(),
        {{"c2", opt.c2}, {"evaluated", any_reg}});
    add("vii_flatness", c_flat);
    for (size_t i = 0; i < G; ++i) rep.regularity_sweep.emplace_back(etas[i] / crit, sweep[i]);
    return rep;
}

}  // namespace bandlab
