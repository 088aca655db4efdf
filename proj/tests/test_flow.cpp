#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bandlab/flow.hpp"

using namespace bandlab;

TEST_CASE("characteristic matches the exact m scaling") {
    const Complex zT(0.3, 0.001);
    const double T = 1.5;
    const auto tr = solve_characteristic(zT, T, 1e-3, 20, 400);
    const Complex mT = stieltjes_m(zT);
    double worst = 0.0;
    for (size_t i = 0; i < tr.t.size(); i += 37) {
        const Complex exact = mT * std::exp(-0.5 * (T - tr.t[i]));
        worst = std::max(worst, std::abs(tr.z[i].m - exact));
    }
    CHECK(worst <= 1e-9);
    CHECK(tr.z.back().z == zT);
    CHECK(tr.z.front().eta > tr.z.back().eta);

    const auto mid = tr.point_at(0.77);
    CHECK(std::abs(mid.m - mT * std::exp(-0.5 * (T - 0.77))) <= 1e-9);
    CHECK(mid.dyson_residual() <= 1e-12);
    CHECK_THROWS_AS(tr.point_at(T + 0.1), ArgumentError);

    REQUIRE(tr.t_star.has_value());
    const double crit = std::pow(20.0 / 400.0, 2);
    CHECK(tr.point_at(*tr.t_star).eta == doctest::Approx(crit).epsilon(1e-6));

    const auto nocross = solve_characteristic(Complex(0, 0.5), 0.5, 1e-3, 20, 400);
    CHECK_FALSE(nocross.t_star.has_value());
    CHECK(nocross.to_csv().rfind("t,re_z,im_z,eta,ell\n", 0) == 0);
}

TEST_CASE("characteristic errors") {
    CHECK_THROWS_AS(solve_characteristic(Complex(0, 0.1), 12.0, 1e-3, 20, 400), NumericalError);
    CHECK_THROWS_AS(solve_characteristic(Complex(0.5, 0.0), 1.0, 1e-3, 20, 400), DomainError);
    CHECK_THROWS_AS(solve_characteristic(Complex(0, 0.1), -1.0, 1e-3, 20, 400), ArgumentError);
}

TEST_CASE("ornstein-uhlenbeck transition") {
    const auto p = std::make_shared<const VarianceProfile>(build_translation_invariant_power(80, 10, 3.0));
    const auto s = sample_matrix(p, SymmetryClass::complex_hermitian, EntryDistribution::rademacher, 4);
    const auto same = ou_evolve(s, 0.0, 9);
    CHECK((same.H - s.H).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(ou_evolve(s, -1.0, 9), ArgumentError);

    auto fourth = [&](const MatrixSample& m) {
        double sum = 0.0;
        int n = 0;
        for (int a = 0; a < p->N; ++a)
            for (int b = a + 1; b < p->N; ++b) {
                sum += std::pow(std::norm(m.h(a, b)), 2);
                ++n;
            }
        return sum / n;
    };
    // complex Gaussian entries have E|h|^4 = 2, the Rademacher start has 1
    CHECK(fourth(s) == doctest::Approx(1.0).epsilon(1e-12));
    const auto late = ou_evolve(s, 30.0, 9);
    CHECK(std::abs(fourth(late) - 2.0) <= 0.35);
    CHECK((late.H - late.H.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    const auto mid = ou_evolve(s, 0.1, 9);
    const double f = fourth(mid);
    CHECK(f > 1.0);
    CHECK(f < 1.5);
    // second moments are preserved along the flow
    CHECK(mid.h.cwiseAbs2().mean() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("kernel ODE along the characteristic") {
    const auto p = build_translation_invariant_power(100, 10, 3.0);
    const auto tr = solve_characteristic(Complex(0.2, 0.02), 1.0, 1e-3, p.W, p.N);
    for (auto kind : {KernelKind::theta, KernelKind::xi}) {
        const double r1 = check_theta_ode(p, tr, 0.5, 2e-3, kind);
        const double r2 = check_theta_ode(p, tr, 0.5, 1e-3, kind);
        CHECK(r1 <= 1e-4);
        CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.125));
    }
}

TEST_CASE("psi trace along the flow") {
    const auto p = std::make_shared<const VarianceProfile>(build_translation_invariant_power(60, 10, 3.0));
    FlowPsiConfig cfg;
    cfg.samples = 3;
    cfg.n_steps = 2;
    cfg.T = 0.5;
    cfg.xs = {0, 5};
    const auto rows = flow_psi_trace(p, Complex(0, 0.05), cfg);
    REQUIRE(rows.size() == 3);
    CHECK(rows.front().eta > rows.back().eta);
    CHECK(rows.back().eta == doctest::Approx(0.05));
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.psi_av));
        CHECK(std::isfinite(r.psi_iso));
    }
    CHECK(flow_rows_to_csv(rows).find('\n') != std::string::npos);
    cfg.xs.clear();
    CHECK_THROWS_AS(flow_psi_trace(p, Complex(0, 0.05), cfg), ArgumentError);
}
