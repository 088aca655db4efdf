#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bandlab/kernels.hpp"
#include "bandlab/lp.hpp"
#include "bandlab/observables.hpp"

using namespace bandlab;

namespace {

Mat two_by_two(double s) {
    Mat S(2, 2);
    S << s, 1 - s, 1 - s, s;
    return S;
}

}  // namespace

TEST_CASE("kernel on a 2x2 profile matches its spectral form") {
    const double s = 0.7;
    const Complex w(0.3, 0.4);
    const CMat K = weighted_kernel(two_by_two(s), w);
    // eigenvalues 1 and 2s-1 with eigenvectors (1,1) and (1,-1)
    const Complex f1 = w / (1.0 - w);
    const Complex f2 = w * (2 * s - 1) / (1.0 - w * (2 * s - 1));
    CHECK(std::abs(K(0, 0) - (f1 + f2) / 2.0) <= 1e-14);
    CHECK(std::abs(K(0, 1) - (f1 - f2) / 2.0) <= 1e-14);
    CHECK(std::abs(K(1, 1) - K(0, 0)) <= 1e-14);
}

TEST_CASE("sum rule and maximum for theta") {
    const auto p = build_translation_invariant_power(128, 16, 3.0);
    for (double eta : {0.01, 0.1, 1.0}) {
        for (double E : {0.0, 0.8}) {
            const auto z = SpectralPoint::make(Complex(E, eta), p.W, p.N);
            const auto th = two_point_kernel(p, z, z, KernelKind::theta);
            const double w = std::norm(z.m);
            const double expect = w / (1 - w);
            const Mat T = th.values.real();
            CHECK(th.values.imag().cwiseAbs().maxCoeff() <= 1e-12 * expect);
            CHECK(((T.colwise().sum().array() - expect).abs() / expect).maxCoeff() <= 1e-10);
            CHECK(T.minCoeff() >= 0.0);
            // the infinity operator norm of a nonnegative matrix is its largest row sum
            CHECK(std::abs(T.rowwise().sum().maxCoeff() - expect) <= 1e-8 * expect);

            const auto xi = two_point_kernel(p, z, z, KernelKind::xi);
            const Complex wx = z.m * z.m;
            CHECK(std::abs(xi.values.col(3).sum() - wx / (1.0 - wx)) <= 1e-10 * std::abs(wx / (1.0 - wx)));
        }
    }
}

TEST_CASE("general two point kernel sum rule") {
    const auto p = build_block_band(8, 16, nearest_neighbour_sigma(8));
    const auto z1 = SpectralPoint::make(Complex(0.3, 0.05), p.W, p.N);
    const auto z2 = SpectralPoint::make(Complex(-0.2, 0.2), p.W, p.N);
    const auto th = two_point_kernel(p, z1, z2, KernelKind::theta);
    const Complex w = th.weight();
    CHECK(std::abs(w - z1.m * std::conj(z2.m)) == 0.0);
    CHECK((th.values.colwise().sum().array() - w / (1.0 - w)).abs().maxCoeff() <= 1e-10 * std::abs(w / (1.0 - w)));
}

TEST_CASE("singular kernel is refused") {
    CHECK_THROWS_AS(weighted_kernel(two_by_two(0.5), Complex(1.0, 0.0)), NumericalError);
}

TEST_CASE("covering lp") {
    SUBCASE("flat profile and identity") {
        const int N = 12;
        const Mat S = Mat::Constant(N, N, 1.0 / N);
        const auto sol = solve_covering_lp(S, Vec::Ones(N));
        CHECK(sol.value == doctest::Approx(N).epsilon(1e-12));
        CHECK(((S.transpose() * sol.a).array() >= 1.0 - 1e-12).all());
    }
    SUBCASE("special observable has norm one") {
        const auto p = build_translation_invariant_power(40, 5, 3.0);
        DiagObservable A = make_general_observable(p.S.row(7).transpose());
        const auto t = triple_norm(p, A);
        // column sums are one, so sum |A| is a lower bound that e_7 attains
        CHECK(t.value == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("small problem against enumeration") {
        Mat M(3, 3);
        M << 1.0, 0.2, 0.5, 0.1, 1.0, 0.5, 0.3, 0.3, 0.2;
        Vec c(3);
        c << 1.0, 1.0, 0.8;
        double best = 1e9;
        const double h = 0.01;
        for (int i = 0; i <= 200; ++i)
            for (int j = 0; j <= 200; ++j)
                for (int l = 0; l <= 200; ++l) {
                    const Vec a = Eigen::Vector3d(i * h, j * h, l * h);
                    if (((M.transpose() * a - c).array() >= -1e-12).all()) best = std::min(best, a.sum());
                }
        const auto sol = solve_covering_lp(M, c);
        CHECK(sol.value <= best + 1e-12);
        CHECK(sol.value >= best - 3 * h);
        CHECK(((M.transpose() * sol.a - c).array() >= -1e-12).all());
        CHECK(sol.a.minCoeff() >= 0.0);
        CHECK(sol.a.sum() == doctest::Approx(sol.value));
    }
    SUBCASE("lower bound through duality") {
        const auto p = build_block_band(6, 4, nearest_neighbour_sigma(6));
        Vec a(p.N);
        for (int i = 0; i < p.N; ++i) a(i) = std::cos(0.7 * i);
        const auto t = triple_norm(p, make_general_observable(a));
        CHECK(t.value >= a.cwiseAbs().sum() - 1e-10);
        CHECK(((p.S.transpose() * t.certificate).array() >= a.cwiseAbs().array() - 1e-10).all());
    }
}

TEST_CASE("control function") {
    const int N = 200, W = 20;
    const double eta = 0.1;
    const auto U = upsilon_build(N, W, eta, UpsilonFamily::polynomial(6.0));
    const double ell = W / std::sqrt(eta);
    CHECK(U.ell == doctest::Approx(ell));
    CHECK(U(5, 5) == doctest::Approx(1.0 / (ell * eta)));
    CHECK(U(0, 30) == doctest::Approx(std::pow(1 + 30 / ell, -6.0) / (ell * eta)));
    CHECK(U(0, 199) == U(0, 1));
    CHECK_THROWS_AS(upsilon_build(N, W, eta, UpsilonFamily::polynomial(4.0)), ArgumentError);

    const auto E = upsilon_build(N, W, eta, UpsilonFamily::exponential(1.0, 10.0));
    CHECK(E(0, 30) == doctest::Approx(std::exp(-30 / ell) / (ell * eta) + ell / eta * std::pow(double(N), -10.0)));
}

TEST_CASE("generalized control function and size functions") {
    const auto p = build_translation_invariant_power(100, 10, 3.0);
    const auto U = upsilon_build(p.N, p.W, 0.05, UpsilonFamily::polynomial(6.0));
    const CVec ex = CVec::Unit(p.N, 3), ey = CVec::Unit(p.N, 40);
    CHECK(generalized_upsilon(ex, ey, U) == doctest::Approx(U(3, 40)));
    const auto Sx = make_special_observable(p, 3), Sy = make_special_observable(p, 40);
    CHECK(generalized_upsilon(Sx, Sy, U) == doctest::Approx(U(3, 40)));
    CHECK(generalized_upsilon(ex, Sy, U) == doctest::Approx(U(3, 40)));
    CHECK_THROWS_AS(generalized_upsilon(make_general_observable(Vec::Ones(p.N)), ey, U), ArgumentError);

    CHECK(size_iso(U, 3, {}, 40) == doctest::Approx(std::sqrt(U(3, 40))));
    const double le = U.ell_eta();
    CHECK(size_av(U, std::vector<int>{3}) == doctest::Approx(1.0 / le));
    const std::vector<int> xs{3, 40, 77};
    const std::vector<int> inner{3, 40};
    CHECK(size_av(U, xs) == doctest::Approx(size_iso(U, 77, inner, 77) / std::sqrt(le)));
    CHECK(size_iso(U, 5, {3, 40}, 60) ==
          doctest::Approx(std::sqrt(U(5, 3) * U(3, 40) * U(40, 60)) / le));
    // observable forms reduce to index forms for special observables
    CHECK(size_av(U, std::vector<DiagObservable>{Sx, Sy}) == doctest::Approx(size_av(U, {3, 40})));
    CHECK(size_iso(U, ex, {Sy}, CVec::Unit(p.N, 60)) == doctest::Approx(size_iso(U, 3, {40}, 60)));
}

TEST_CASE("regularized theta and propagators") {
    const auto p = build_translation_invariant_power(128, 16, 3.0);
    const auto zs = SpectralPoint::make(Complex(0, 0.4), p.W, p.N);
    const auto zu = SpectralPoint::make(Complex(0, 0.1), p.W, p.N);
    const auto zt = SpectralPoint::make(Complex(0, 0.025), p.W, p.N);
    const auto ths = two_point_kernel(p, zs, zs, KernelKind::theta);
    const auto tht = two_point_kernel(p, zt, zt, KernelKind::theta);

    const CMat R = regularize_theta(tht, 9);
    CHECK(R.col(9).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(R(4, 20) - (tht.values(4, 20) - tht.values(4, 9))) == 0.0);
    CHECK_THROWS_AS(regularize_theta(two_point_kernel(p, zs, zs, KernelKind::xi), 0), ArgumentError);

    const Mat Pst = saturated_propagator(p, zs, zt);
    const Mat Psu = saturated_propagator(p, zs, zu), Put = saturated_propagator(p, zu, zt);
    CHECK((Put * Psu - Pst).cwiseAbs().maxCoeff() <= 1e-9 * Pst.cwiseAbs().maxCoeff());
    CHECK((Pst * ths.values.real() - tht.values.real()).cwiseAbs().maxCoeff() <= 1e-9 * tht.values.real().maxCoeff());

    const auto xs = two_point_kernel(p, zs, zs, KernelKind::xi);
    const auto xt = two_point_kernel(p, zt, zt, KernelKind::xi);
    const CMat Q = unsaturated_propagator(p, zs, zt);
    CHECK((Q * xs.values - xt.values).cwiseAbs().maxCoeff() <= 1e-9 * xt.values.cwiseAbs().maxCoeff());
}

TEST_CASE("admissibility report is complete and finite") {
    const auto p = build_translation_invariant_power(128, 16, 3.0);
    AdmissibilityOptions opt;
    opt.pairs = 16;
    opt.rows = 4;
    const auto rep = verify_control_admissibility(p, UpsilonFamily::polynomial(6.0), opt);
    for (const char* name : {"i_theta", "i_xi", "ii_max", "ii_colsum", "iii_monotone", "iv_triangle",
                             "iv_convolution", "v_weighted_1", "v_weighted_2", "vi_regularity", "vii_flatness"}) {
        const double c = rep.constant(name);
        CHECK(std::isfinite(c));
        CHECK(c > 0.0);
    }
    CHECK_THROWS_AS(rep.constant("nope"), ArgumentError);
    CHECK(rep.to_json()["rows"].size() == rep.rows.size());
}
