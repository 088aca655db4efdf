// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <set>
#include <string>

#include "CLI11.hpp"

#include "bandlab/flow.hpp"
#include "bandlab/harness.hpp"
#include "bandlab/kernels.hpp"
#include "bandlab/mterms.hpp"
#include "bandlab/rng.hpp"

using namespace bandlab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

// describes the failing row with the largest measured/bound
std::string worst_row(const Report& r) {
    double worst = -1;
    std::string name;
    for (const auto& row : r.rows) {
        const double q = row.bound != 0 ? row.measured / row.bound : row.measured;
        if (!row.pass && (worst < 0 || name.empty() || q > worst)) {
            worst = q;
            name = row.check + fmt(" eta=%g measured=%.4g", row.eta, row.measured) + fmt(" bound=%.4g", row.bound);
        }
    }
    if (name.empty()) return "all " + std::to_string(r.rows.size()) + " rows within bounds";
    return "worst failing row " + name;
}

std::string out_dir;

Outcome from_report(const Report& r, const std::string& tag) {
    Report copy = r;
    copy.experiment = tag;
    emit_report(copy, out_dir, true);
    return {r.all_pass(), worst_row(r)};
}

// ---------------------------------------------------------------- 1

Outcome exact_identities() {
    double dyson = 0, sum_rule = 0, max_rule = 0, ward = 0, cyc = 0, dd = 0, prop = 0;
    for (double E = -3.0; E <= 3.0; E += 0.05)
        for (double eta : {1e-6, 1e-3, 0.01, 0.1, 1.0, 10.0})
            dyson = std::max(dyson, SpectralPoint::make(Complex(E, eta), 1, 1).dyson_residual());

    const auto p = build_translation_invariant_power(128, 16, 3.0);
    auto pp = std::make_shared<const VarianceProfile>(p);
    for (double eta : {0.005, 0.05, 0.5})
        for (double E : {-1.2, 0.0, 0.9}) {
            const auto z = SpectralPoint::make(Complex(E, eta), p.W, p.N);
            const Mat T = two_point_kernel(p, z, z, KernelKind::theta).values.real();
            const double w = std::norm(z.m), expect = w / (1 - w);
            sum_rule = std::max(sum_rule, (T.colwise().sum().array() - expect).abs().maxCoeff() / expect);
            max_rule = std::max(max_rule, std::abs(T.rowwise().sum().maxCoeff() - expect) / expect);
        }

    for (int s = 0; s < 3; ++s) {
        const auto smp = sample_matrix(pp, s ? SymmetryClass::real_symmetric : SymmetryClass::complex_hermitian,
                                       EntryDistribution::gaussian, derive_seed(1, s));
        const auto c = eigendecompose(smp);
        const Complex z(0.1 * s, 0.01 + 0.05 * s);
        const CMat G = resolvent(c, z);
        const Vec lhs = G.cwiseAbs2().rowwise().sum();
        const Vec rhs = G.diagonal().imag() / z.imag();
        ward = std::max(ward, (lhs - rhs).cwiseAbs().maxCoeff() / rhs.cwiseAbs().maxCoeff());
    }

    StabilityOperator op(p);
    for (int trial = 0; trial < 8; ++trial) {
        KeyedEngine eng(2024, trial);
        const int k = 2 + trial % 4;
        ChainSpec c;
        for (int i = 0; i < k; ++i) {
            const double E = -1.5 + 3.0 * eng.uniform01();
            const double eta = 0.02 + 0.1 * eng.uniform01();
            c.z.push_back(SpectralPoint::make(Complex(E, eng() % 2 ? eta : -eta), p.W, p.N));
        }
        auto random_obs = [&] {
            Vec a(p.N);
            for (int x = 0; x < p.N; ++x) a(x) = 2 * eng.uniform01() - 1;
            return make_general_observable(a);
        };
        for (int i = 0; i < k - 1; ++i) c.A.push_back(random_obs());
        c.test = random_obs();
        cyc = std::max(cyc, check_cyclicity(op, c));
        const int j = static_cast<int>(eng() % static_cast<std::uint64_t>(k - 1));
        c.A[j] = make_identity_observable(p.N);
        dd = std::max(dd, check_divided_difference(op, c, j));
    }

    const auto zs = SpectralPoint::make(Complex(0, 0.5), p.W, p.N);
    const auto zu = SpectralPoint::make(Complex(0, 0.1), p.W, p.N);
    const auto zt = SpectralPoint::make(Complex(0, 0.01), p.W, p.N);
    const Mat Pst = saturated_propagator(p, zs, zt);
    const Mat comp = saturated_propagator(p, zu, zt) * saturated_propagator(p, zs, zu);
    prop = (comp - Pst).cwiseAbs().maxCoeff() / Pst.cwiseAbs().maxCoeff();
    const Mat Ts = two_point_kernel(p, zs, zs, KernelKind::theta).values.real();
    const Mat Tt = two_point_kernel(p, zt, zt, KernelKind::theta).values.real();
    prop = std::max(prop, (Pst * Ts - Tt).cwiseAbs().maxCoeff() / Tt.maxCoeff());

    const bool ok = dyson <= 1e-12 && sum_rule <= 1e-10 && max_rule <= 1e-8 && ward <= 1e-9 && cyc <= 1e-9 &&
                    dd <= 1e-9 && prop <= 1e-9;
    char buf[400];
    std::snprintf(buf, sizeof buf,
                  "dyson=%.2e sum_rule=%.2e theta_norm=%.2e ward=%.2e cyclicity=%.2e divided_diff=%.2e "
                  "propagator=%.2e",
                  dyson, sum_rule, max_rule, ward, cyc, dd, prop);
    return {ok, buf};
}

// ---------------------------------------------------------------- 2

Outcome order_of_accuracy() {
    const auto p = build_translation_invariant_power(128, 16, 3.0);
    StabilityOperator op(p);
    double lo = 1e9, hi = 0;
    for (int k = 1; k <= 3; ++k) {
        ChainSpec c;
        for (int i = 0; i < k; ++i)
            c.z.push_back(SpectralPoint::make(Complex(0.25 * i - 0.2, i % 2 ? -0.08 : 0.08), p.W, p.N));
        for (int i = 0; i < k - 1; ++i) {
            Vec a(p.N);
            for (int x = 0; x < p.N; ++x) a(x) = std::cos(0.21 * x * (i + 2));
            c.A.push_back(make_general_observable(a));
        }
        const double q = check_dm_dt(op, c, 4e-3) / check_dm_dt(op, c, 2e-3);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    const auto tr = solve_characteristic(Complex(0.1, 0.02), 1.0, 1e-3, p.W, p.N);
    for (auto kind : {KernelKind::theta, KernelKind::xi}) {
        const double q = check_theta_ode(p, tr, 0.5, 2e-3, kind) / check_theta_ode(p, tr, 0.5, 1e-3, kind);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    return {lo >= 3.5 && hi <= 4.5, fmt("residual ratio under h -> h/2 in [%.4f, %.4f], required within 4 +- 0.5", lo, hi)};
}

// ---------------------------------------------------------------- 3

Outcome global_law() {
    bool ok = true;
    std::string detail;
    for (const char* sym : {"complex_hermitian", "real_symmetric"})
        for (const char* dist : {"gaussian", "rademacher"}) {
            auto cfg = ExperimentConfig::defaults_for("mcheck");
            cfg.symmetry = sym;
            cfg.distribution = dist;
            const auto r = run_global_law(cfg);
            Report copy = r;
            copy.experiment = std::string("mcheck_") + sym + "_" + dist;
            emit_report(copy, out_dir, true);
            double worst = 0;
            for (const auto& row : r.rows) worst = std::max(worst, row.measured);
            ok = ok && r.all_pass();
            detail += std::string(" ") + sym + "/" + dist + fmt(" max_z=%.3g", worst);
        }
    return {ok, "bound 3 standard errors;" + detail};
}

// ---------------------------------------------------------------- 9

Outcome admissibility() {
    bool ok = true;
    double worst = 0;
    std::string worst_name;
    nlohmann::json all;
    for (int kind = 0; kind < 2; ++kind) {
        std::map<std::string, std::pair<double, double>> range;
        for (int N : {128, 256, 512}) {
            const auto p = kind == 0 ? build_translation_invariant_power(N, N / 8, 3.0)
                                     : build_block_band(8, N / 8, nearest_neighbour_sigma(8));
            const auto rep = verify_control_admissibility(p, UpsilonFamily::polynomial(6.0), AdmissibilityOptions{});
            all.push_back({{"profile", kind == 0 ? "translation_invariant" : "block_band"}, {"N", N}, {"report", rep.to_json()}});
            for (const auto& row : rep.rows) {
                auto it = range.find(row.condition);
                if (it == range.end())
                    range[row.condition] = {row.fitted_constant, row.fitted_constant};
                else
                    it->second = {std::min(it->second.first, row.fitted_constant),
                                  std::max(it->second.second, row.fitted_constant)};
            }
        }
        for (const auto& [name, r] : range) {
            const double q = r.second / r.first;
            if (!(q <= 2.0)) ok = false;
            if (q > worst) {
                worst = q;
                worst_name = std::string(kind == 0 ? "translation_invariant/" : "block_band/") + name;
            }
        }
    }
    std::filesystem::create_directories(out_dir);
    std::FILE* f = std::fopen((out_dir + "/admissibility.json").c_str(), "w");
    if (f) {
        std::fputs(all.dump(1).c_str(), f);
        std::fclose(f);
    }
    return {ok, fmt("max/min constant across N worst=%.4f bound=%.1f", worst, 2.0) + " at " + worst_name};
}

// ---------------------------------------------------------------- 10

Outcome regularization_gain() {
    const int N = 512, W = 32;
    const auto p = build_translation_invariant_power(N, W, 3.0);
    bool ok = true;
    double worst = 0;
    std::string detail;
    for (double eta_t : {0.01, 0.03, 0.1})
        for (double r : {4.0, 16.0}) {
            const auto zt = SpectralPoint::make(Complex(0, eta_t), W, N);
            // earlier point on the same characteristic: m_s = m_t e^{-(t-s)/2}
            double lo = 0, hi = 20;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const Complex ms = zt.m * std::exp(-0.5 * mid);
                if ((-ms - 1.0 / ms).imag() < r * eta_t) lo = mid;
                else hi = mid;
            }
            const Complex ms = zt.m * std::exp(-0.5 * lo);
            const auto zs = SpectralPoint::make(-ms - 1.0 / ms, W, N);
            const Mat Ts = two_point_kernel(p, zs, zs, KernelKind::theta).values.real();
            const auto Kt = two_point_kernel(p, zt, zt, KernelKind::theta);
            const int x = 0;
            const Vec f = Ts.col(x);
            const double full = (Kt.values.real() * f).cwiseAbs().maxCoeff();
            const double reg = (regularize_theta(Kt, x).real() * f).cwiseAbs().maxCoeff();
            const double bound = 3.0 * zs.ell * zt.ell * zt.eta / (double(W) * W);
            const double q = (reg / full) / bound;
            ok = ok && q <= 1.0;
            if (q > worst) {
                worst = q;
                detail = fmt("worst eta_t=%g ratio_eta=%g", eta_t, r) + fmt(" measured=%.4f bound=%.4f", reg / full, bound);
            }
        }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    out_dir = "acceptance_results";
    std::string only;
    int threads = 1;
    app.add_option("--out", out_dir, "directory for per-criterion reports");
    app.add_option("--only", only, "comma separated subset of criteria, e.g. 1,2,10");
    app.add_option("--threads", threads, "worker threads for Monte Carlo runs");
    CLI11_PARSE(app, argc, argv);

    std::set<int> pick;
    if (!only.empty()) {
        std::stringstream ss(only);
        for (std::string tok; std::getline(ss, tok, ',');) pick.insert(std::stoi(tok));
    }

    auto cfg_for = [&](const std::string& name) {
        auto c = ExperimentConfig::defaults_for(name);
        c.threads = threads;
        return c;
    };

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"exact identities", exact_identities},
        {"second order finite differences", order_of_accuracy},
        {"global law at eta=2, N=64", global_law},
        {"local law boundedness, N=400 W=40", [&] { return from_report(run_local_law(cfg_for("locallaw")), "locallaw"); }},
        {"decay profile, N=400 W=40 eta=0.1", [&] { return from_report(run_decay_profile(cfg_for("decay")), "decay"); }},
        {"eigenvector overlap scaling, N=900 W=150,300", [&] { return from_report(run_que(cfg_for("que")), "que"); }},
        {"traceless eta exponents, N=900 W=300", [&] { return from_report(run_traceless_scaling(cfg_for("traceless")), "traceless"); }},
        {"gap ratio KS distances, N=400 W=40", [&] { return from_report(run_spacing(cfg_for("spacing")), "spacing"); }},
        {"admissibility constants across N=128,256,512", admissibility},
        {"regularization gain, N=512 W=32", regularization_gain},
    };

    bool all = true;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!pick.empty() && !pick.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all = all && o.pass;
        std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
