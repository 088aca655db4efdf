#include "bandlab/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "bandlab/rng.hpp"

namespace bandlab {

std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::translation_invariant: return "translation_invariant";
        case ProfileKind::block_band: return "block_band";
        case ProfileKind::custom: return "custom";
    }
    return "custom";
}

std::string to_string(SymmetryClass s) {
    return s == SymmetryClass::real_symmetric ? "real_symmetric" : "complex_hermitian";
}

std::string to_string(EntryDistribution d) {
    switch (d) {
        case EntryDistribution::gaussian: return "gaussian";
        case EntryDistribution::rademacher: return "rademacher";
        case EntryDistribution::uniform: return "uniform";
    }
    return "gaussian";
}

ProfileKind parse_profile_kind(const std::string& s) {
    if (s == "translation_invariant") return ProfileKind::translation_invariant;
    if (s == "block_band") return ProfileKind::block_band;
    if (s == "custom") return ProfileKind::custom;
    throw ArgumentError("unknown profile kind: " + s);
}

SymmetryClass parse_symmetry(const std::string& s) {
    if (s == "complex_hermitian" || s == "complex") return SymmetryClass::complex_hermitian;
    if (s == "real_symmetric" || s == "real") return SymmetryClass::real_symmetric;
    throw ArgumentError("unknown symmetry class: " + s);
}

EntryDistribution parse_distribution(const std::string& s) {
    if (s == "gaussian") return EntryDistribution::gaussian;
    if (s == "rademacher") return EntryDistribution::rademacher;
    if (s == "uniform") return EntryDistribution::uniform;
    throw ArgumentError("unknown entry distribution: " + s);
}

int periodic_distance(int x, int y, int N) {
    if (N <= 0) throw ArgumentError("periodic_distance: N must be positive");
    if (x < 0 || x >= N || y < 0 || y >= N)
        throw ArgumentError("periodic_distance: index out of range");
    int d = std::abs(x - y);
    return std::min(d, N - d);
}

DecayFunction power_decay(double p) {
    if (p <= 0.5) throw ArgumentError("power_decay: exponent must exceed 1/2");
    const double Z = std::sqrt(M_PI) * std::exp(std::lgamma(p - 0.5) - std::lgamma(p));
    return [p, Z](double x) { return std::pow(1.0 + x * x, -p) / Z; };
}

namespace {

void validate_size(int N, int W) {
    if (N <= 0) throw ArgumentError("profile: N must be positive");
    if (W < 1 || W > N) throw ArgumentError("profile: need 1 <= W <= N");
}

double measured_cw(const VarianceProfile& p) { return p.S.maxCoeff() * p.W; }

}  // namespace

VarianceProfile build_translation_invariant(int N, int W, const DecayFunction& f) {
    validate_size(N, W);
    std::vector<double> g(N / 2 + 1);
    for (int d = 0; d <= N / 2; ++d) {
        g[d] = f(static_cast<double>(d) / W) / W;
        if (!(g[d] >= 0.0) || !std::isfinite(g[d]))
            throw ArgumentError("build_translation_invariant: f negative or non-finite on grid");
    }
    VarianceProfile p;
    p.N = N;
    p.W = W;
    p.kind = ProfileKind::translation_invariant;
    p.S.resize(N, N);
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) p.S(a, b) = g[periodic_distance(a, b, N)];
    // every column carries the same multiset of values, so one constant fixes all sums
    long double mass = 0.0L;
    for (int a = 0; a < N; ++a) mass += p.S(a, 0);
    if (!(mass > 0.0L)) throw ArgumentError("build_translation_invariant: zero total mass");
    p.S /= static_cast<double>(mass);
    p.C_W = measured_cw(p);
    return p;
}

VarianceProfile build_translation_invariant_power(int N, int W, double exponent) {
    auto p = build_translation_invariant(N, W, power_decay(exponent));
    p.generator = {{"family", "power"}, {"exponent", exponent}};
    return p;
}

Mat nearest_neighbour_sigma(int L) {
    if (L < 1) throw ArgumentError("nearest_neighbour_sigma: L must be positive");
    Mat s = Mat::Zero(L, L);
    if (L < 3) {
        s.setConstant(1.0 / L);
        return s;
    }
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
            if (periodic_distance(i, j, L) <= 1) s(i, j) = 1.0 / 3.0;
    return s;
}

VarianceProfile build_block_band(int L, int W, const Mat& sigma) {
    if (L < 1 || W < 1) throw ArgumentError("build_block_band: L and W must be positive");
    if (sigma.rows() != L || sigma.cols() != L)
        throw ArgumentError("build_block_band: sigma must be L x L");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-14)
        throw ArgumentError("build_block_band: sigma not symmetric");
    if (sigma.minCoeff() < 0.0) throw ArgumentError("build_block_band: sigma has negative entries");
    for (int j = 0; j < L; ++j)
        if (std::abs(sigma.col(j).sum() - 1.0) > 1e-12)
            throw ArgumentError("build_block_band: sigma is not stochastic");
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
            if (std::abs(sigma(i, j) - sigma(0, periodic_distance(i, j, L))) > 1e-14)
                throw ArgumentError("build_block_band: sigma is not periodic Toeplitz");
    VarianceProfile p;
    p.N = L * W;
    p.W = W;
    p.kind = ProfileKind::block_band;
    p.S.resize(p.N, p.N);
    for (int a = 0; a < p.N; ++a)
        for (int b = 0; b < p.N; ++b) p.S(a, b) = sigma(a / W, b / W) / W;
    p.C_W = measured_cw(p);
    std::vector<double> row(sigma.row(0).data(), sigma.row(0).data() + L);
    p.generator = {{"L", L}, {"sigma_row", row}};
    return p;
}

VarianceProfile make_custom_profile(const Mat& S, int W) {
    if (S.rows() != S.cols()) throw ArgumentError("make_custom_profile: S must be square");
    VarianceProfile p;
    p.N = static_cast<int>(S.rows());
    validate_size(p.N, W);
    p.W = W;
    p.S = S;
    p.kind = ProfileKind::custom;
    p.C_W = measured_cw(p);
    return p;
}

bool ProfileReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

ProfileReport verify_profile(const VarianceProfile& p, double zeta0) {
    ProfileReport r;
    const Mat& S = p.S;
    const int N = static_cast<int>(S.rows());
    bool shape_ok = N > 0 && S.cols() == N && N == p.N;
    r.checks.push_back({"shape", shape_ok, static_cast<double>(S.rows()), static_cast<double>(p.N)});
    if (!shape_ok) return r;

    r.symmetry_error = (S - S.transpose()).cwiseAbs().maxCoeff();
    r.checks.push_back({"symmetry", r.symmetry_error == 0.0, r.symmetry_error, 0.0});

    const double mn = S.minCoeff();
    r.checks.push_back({"nonnegative", mn >= 0.0, mn, 0.0});

    double cs = 0.0;
    for (int b = 0; b < N; ++b) cs = std::max(cs, std::abs(S.col(b).sum() - 1.0));
    r.column_sum_error = cs;
    r.checks.push_back({"column_sums", cs <= 1e-12, cs, 1e-12});

    r.measured_C_W = S.maxCoeff() * p.W;
    const double cw = p.C_W > 0 ? p.C_W : r.measured_C_W;
    r.checks.push_back({"entry_bound", r.measured_C_W <= cw * (1 + 1e-12), r.measured_C_W, cw});

    const double lhs = static_cast<double>(p.W) * p.W;
    const double rhs = std::pow(static_cast<double>(N), 1.0 + zeta0);
    r.checks.push_back({"bandwidth", lhs >= rhs, lhs, rhs});

    double D = std::numeric_limits<double>::infinity();
    for (int a = 0; a < N; ++a) {
        const double peak = S(a, a);
        if (peak <= 0) continue;
        for (int b = 0; b < N; ++b) {
            const int d = periodic_distance(a, b, N);
            if (d == 0 || S(a, b) <= 0) continue;
            const double ratio = S(a, b) / peak;
            if (ratio >= 1.0) {
                // flat within distance d; only meaningful once d exceeds W
                if (d > p.W) D = std::min(D, 0.0);
                continue;
            }
            D = std::min(D, std::log(1.0 / ratio) / std::log1p(static_cast<double>(d) / p.W));
        }
    }
    r.empirical_D = D;
    return r;
}

double standardized_draw(EntryDistribution d, KeyedEngine& eng) {
    switch (d) {
        case EntryDistribution::gaussian: {
            std::normal_distribution<double> g(0.0, 1.0);
            return g(eng);
        }
        case EntryDistribution::rademacher: return (eng() >> 63) ? 1.0 : -1.0;
        case EntryDistribution::uniform: return std::sqrt(3.0) * (2.0 * eng.uniform01() - 1.0);
    }
    return 0.0;
}

MatrixSample assemble_sample(ProfilePtr p, CMat h, SymmetryClass sym, EntryDistribution dist,
                             std::uint64_t seed) {
    MatrixSample s;
    const int N = p->N;
    s.H.resize(N, N);
    for (int b = 0; b < N; ++b)
        for (int a = 0; a < N; ++a) s.H(a, b) = std::sqrt(p->S(a, b)) * h(a, b);
    s.h = std::move(h);
    s.symmetry = sym;
    s.distribution = dist;
    s.seed = seed;
    s.profile = std::move(p);
    return s;
}

MatrixSample sample_matrix(ProfilePtr p, SymmetryClass sym, EntryDistribution dist,
                           std::uint64_t seed) {
    if (!p) throw ArgumentError("sample_matrix: null profile");
    const int N = p->N;
    CMat h(N, N);
    const double r2 = std::sqrt(0.5);
    for (int b = 0; b < N; ++b) {
        for (int a = 0; a <= b; ++a) {
            KeyedEngine eng(seed, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b));
            Complex v;
            if (sym == SymmetryClass::real_symmetric || a == b) {
                v = standardized_draw(dist, eng);
            } else {
                const double x = standardized_draw(dist, eng);
                const double y = standardized_draw(dist, eng);
                v = Complex(x * r2, y * r2);
            }
            h(a, b) = v;
            h(b, a) = std::conj(v);
        }
    }
    return assemble_sample(std::move(p), std::move(h), sym, dist, seed);
}

nlohmann::json profile_to_json(const VarianceProfile& p, bool include_entries) {
    nlohmann::json j;
    j["kind"] = to_string(p.kind);
    j["N"] = p.N;
    j["W"] = p.W;
    j["C_W"] = p.C_W;
    if (!p.generator.is_null()) j["generator"] = p.generator;
    if (include_entries || p.generator.is_null()) {
        std::vector<std::vector<double>> rows(p.N, std::vector<double>(p.N));
        for (int a = 0; a < p.N; ++a)
            for (int b = 0; b < p.N; ++b) rows[a][b] = p.S(a, b);
        j["entries"] = rows;
    }
    return j;
}

VarianceProfile profile_from_json(const nlohmann::json& j) {
    const auto kind = parse_profile_kind(j.at("kind").get<std::string>());
    const int N = j.at("N").get<int>();
    const int W = j.at("W").get<int>();
    if (j.contains("entries")) {
        const auto rows = j.at("entries").get<std::vector<std::vector<double>>>();
        if (static_cast<int>(rows.size()) != N) throw ArgumentError("profile json: entries size");
        Mat S(N, N);
        for (int a = 0; a < N; ++a) {
            if (static_cast<int>(rows[a].size()) != N)
                throw ArgumentError("profile json: ragged entries");
            for (int b = 0; b < N; ++b) S(a, b) = rows[a][b];
        }
        auto p = make_custom_profile(S, W);
        p.kind = kind;
        if (j.contains("C_W")) p.C_W = j.at("C_W").get<double>();
        if (j.contains("generator")) p.generator = j.at("generator");
        return p;
    }
    const auto& g = j.at("generator");
    if (kind == ProfileKind::translation_invariant) {
        return build_translation_invariant_power(N, W, g.at("exponent").get<double>());
    }
    if (kind == ProfileKind::block_band) {
        const int L = g.at("L").get<int>();
        if (L * W != N) throw ArgumentError("profile json: N != L*W");
        const auto row = g.at("sigma_row").get<std::vector<double>>();
        if (static_cast<int>(row.size()) != L) throw ArgumentError("profile json: sigma_row size");
        Mat sigma(L, L);
        for (int i = 0; i < L; ++i)
            for (int k = 0; k < L; ++k) sigma(i, k) = row[periodic_distance(i, k, L)];
        return build_block_band(L, W, sigma);
    }
    throw ArgumentError("profile json: custom kind requires entries");
}

namespace {
void put(std::ostringstream& os, double v) { os << std::setprecision(17) << v; }
}  // namespace

std::string matrix_to_csv(const CMat& M, bool real_only) {
    std::ostringstream os;
    for (Index a = 0; a < M.rows(); ++a) {
        for (Index b = 0; b < M.cols(); ++b) {
            if (b) os << ',';
            put(os, M(a, b).real());
            if (!real_only) {
                os << ',';
                put(os, M(a, b).imag());
            }
        }
        os << '\n';
    }
    return os.str();
}

std::string matrix_to_csv(const Mat& M) {
    std::ostringstream os;
    for (Index a = 0; a < M.rows(); ++a) {
        for (Index b = 0; b < M.cols(); ++b) {
            if (b) os << ',';
            put(os, M(a, b));
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace bandlab
