#include "bandlab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "bandlab/mterms.hpp"
#include "bandlab/rng.hpp"

namespace bandlab {

namespace {

Complex velocity(Complex z) { return -0.5 * z - stieltjes_m(z); }

SpectralPoint from_m(Complex m, double W, double N) {
    SpectralPoint p;
    p.m = m;
    p.z = -m - 1.0 / m;
    p.eta = std::abs(p.z.imag());
    p.ell = localization_length(W, N, p.eta);
    return p;
}

}  // namespace

SpectralPoint Trajectory::point_at(double time) const {
    if (t.empty()) throw ArgumentError("point_at: empty trajectory");
    if (time < -1e-12 || time > T + 1e-12) throw ArgumentError("point_at: time outside [0,T]");
    const auto it = std::lower_bound(t.begin(), t.end(), time);
    size_t i = static_cast<size_t>(std::clamp<long>(it - t.begin(), 0, static_cast<long>(t.size()) - 1));
    if (i > 0 && std::abs(t[i - 1] - time) < std::abs(t[i] - time)) --i;
    const Complex m = z[i].m * std::exp(0.5 * (time - t[i]));
    return from_m(m, W, N);
}

std::string Trajectory::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(12) << "t,re_z,im_z,eta,ell\n";
    for (size_t i = 0; i < t.size(); ++i)
        os << t[i] << ',' << z[i].z.real() << ',' << z[i].z.imag() << ',' << z[i].eta << ',' << z[i].ell << '\n';
    return os.str();
}

Trajectory solve_characteristic(Complex zT, double T, double step, double W, double N, double C0) {
    if (!(T > 0.0)) throw ArgumentError("solve_characteristic: T must be positive");
    if (!(step > 0.0)) throw ArgumentError("solve_characteristic: step must be positive");
    if (zT.imag() == 0.0) throw DomainError("solve_characteristic: terminal point on the real axis");
    step = std::min(step, 1e-3);
    const int n = static_cast<int>(std::ceil(T / step - 1e-9));
    const double h = T / n;
    std::vector<Complex> zs(n + 1);
    zs[n] = zT;
    const double side = zT.imag() > 0 ? 1.0 : -1.0;
    for (int i = n; i > 0; --i) {
        const Complex z = zs[i];
        // backward in time: dz/ds = -v(z) with s = T - t
        const Complex k1 = -velocity(z);
        const Complex k2 = -velocity(z + 0.5 * h * k1);
        const Complex k3 = -velocity(z + 0.5 * h * k2);
        const Complex k4 = -velocity(z + h * k3);
        const Complex next = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (std::abs(next) > C0 || side * next.imag() <= 0.0)
            throw NumericalError("solve_characteristic: trajectory left the admissible region");
        zs[i - 1] = next;
    }
    Trajectory tr;
    tr.T = T;
    tr.W = W;
    tr.N = N;
    for (int i = 0; i <= n; ++i) {
        tr.t.push_back(i == n ? T : i * h);
        tr.z.push_back(SpectralPoint::make(zs[i], W, N));
    }
    const double crit = (W / N) * (W / N);
    if (tr.z.front().eta >= crit && tr.z.back().eta <= crit) {
        double lo = 0.0, hi = T;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (tr.point_at(mid).eta > crit) lo = mid;
            else hi = mid;
        }
        tr.t_star = 0.5 * (lo + hi);
    }
    return tr;
}

MatrixSample ou_evolve(const MatrixSample& s, double dt, std::uint64_t seed) {
    if (dt < 0.0) throw ArgumentError("ou_evolve: dt must be nonnegative");
    if (dt == 0.0) return s;
    const auto g = sample_matrix(s.profile, s.symmetry, EntryDistribution::gaussian, seed);
    const double a = std::exp(-0.5 * dt);
    const double b = std::sqrt(-std::expm1(-dt));
    CMat h = a * s.h + b * g.h;
    return assemble_sample(s.profile, std::move(h), s.symmetry, s.distribution, seed);
}

double check_theta_ode(const VarianceProfile& p, const Trajectory& traj, double t, double h,
                       KernelKind kind) {
    auto kernel_at = [&](double time) {
        const auto z = traj.point_at(time);
        return two_point_kernel(p, z, z, kind).values;
    };
    const CMat K = kernel_at(t);
    const CMat rhs = (CMat::Identity(p.N, p.N) + K) * K;
    const CMat fd = (kernel_at(t + h) - kernel_at(t - h)) / (2.0 * h);
    return (fd - rhs).cwiseAbs().maxCoeff() / rhs.cwiseAbs().maxCoeff();
}

std::vector<FlowPsiRow> flow_psi_trace(ProfilePtr p, Complex zT, const FlowPsiConfig& cfg) {
    const int k = static_cast<int>(cfg.xs.size());
    if (k < 1) throw ArgumentError("flow_psi_trace: template needs at least one observable");
    if (cfg.n_steps < 1 || cfg.samples < 1) throw ArgumentError("flow_psi_trace: bad sizes");
    const int N = p->N;
    const auto traj = solve_characteristic(zT, cfg.T, 1e-3, p->W, N);
    StabilityOperator op(*p);

    std::vector<MatrixSample> batch;
    for (int s = 0; s < cfg.samples; ++s)
        batch.push_back(sample_matrix(p, cfg.symmetry, cfg.distribution, derive_seed(cfg.seed, s)));

    std::vector<DiagObservable> obs;
    for (int x : cfg.xs) obs.push_back(make_special_observable(*p, x));
    const CVec ea = CVec::Unit(N, cfg.a);
    const CVec eb = CVec::Unit(N, cfg.b);

    std::vector<FlowPsiRow> rows;
    double prev_t = 0.0;
    for (int step = 0; step <= cfg.n_steps; ++step) {
        const double t = cfg.T * step / cfg.n_steps;
        for (int s = 0; s < cfg.samples; ++s)
            batch[s] = ou_evolve(batch[s], t - prev_t, derive_seed(cfg.seed, s, 1000 + step));
        prev_t = t;
        const auto zt = traj.point_at(t);
        const auto U = upsilon_build(N, p->W, zt.eta, cfg.family);
        ChainSpec spec;
        for (int i = 0; i < k; ++i) spec.z.push_back(i % 2 == 0 ? zt : zt.conj());
        spec.A.assign(obs.begin(), obs.end() - 1);
        spec.test = obs.back();
        std::vector<ResolventCache> caches;
        for (const auto& smp : batch) caches.push_back(eigendecompose(smp));
        FlowPsiRow row;
        row.t = t;
        row.z = zt.z;
        row.eta = zt.eta;
        row.ell = zt.ell;
        row.psi_av = empirical_psi(caches, spec, U, cfg.K, PsiKind::av).value;
        row.psi_iso = empirical_psi(caches, spec, U, cfg.K, PsiKind::iso, &ea, &eb).value;
        rows.push_back(row);
    }
    return rows;
}

std::string flow_rows_to_csv(const std::vector<FlowPsiRow>& rows) {
    std::ostringstream os;
    os << std::setprecision(12) << "t,re_z,im_z,eta,ell,psi_av,psi_iso\n";
    for (const auto& r : rows)
        os << r.t << ',' << r.z.real() << ',' << r.z.imag() << ',' << r.eta << ',' << r.ell << ','
           << r.psi_av << ',' << r.psi_iso << '\n';
    return os.str();
}

}  // namespace bandlab
