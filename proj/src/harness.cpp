#include "bandlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "bandlab/flow.hpp"
#include "bandlab/kernels.hpp"
#include "bandlab/mterms.hpp"
#include "bandlab/rng.hpp"

namespace bandlab {

// ---------------------------------------------------------------- config

VarianceProfile ProfileSpec::build() const {
    if (kind == "translation_invariant") return build_translation_invariant_power(N, W, exponent);
    if (kind == "block_band") {
        const int blocks = L > 0 ? L : N / W;
        if (blocks * W != N) throw ArgumentError("block_band profile: N must equal L*W");
        return build_block_band(blocks, W, nearest_neighbour_sigma(blocks));
    }
    if (kind == "flat") {
        auto p = build_block_band(1, N, Mat::Ones(1, 1));
        p.kind = ProfileKind::custom;
        p.generator = nullptr;
        return p;
    }
    throw ArgumentError("unknown profile kind: " + kind);
}

void to_json(nlohmann::json& j, const ProfileSpec& p) {
    j = {{"kind", p.kind}, {"N", p.N}, {"W", p.W}, {"exponent", p.exponent}, {"L", p.L}};
}

void from_json(const nlohmann::json& j, ProfileSpec& p) {
    p.kind = j.value("kind", p.kind);
    p.N = j.value("N", p.N);
    p.W = j.value("W", p.W);
    p.exponent = j.value("exponent", p.exponent);
    p.L = j.value("L", p.L);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"experiment", c.experiment},
         {"profile", c.profile},
         {"symmetry", c.symmetry},
         {"distribution", c.distribution},
         {"seed", c.seed},
         {"samples", c.samples},
         {"E", c.E},
         {"etas", c.etas},
         {"ks", c.ks},
         {"K", c.K},
         {"pool", c.pool},
         {"tuples", c.tuples},
         {"vectors", c.vectors},
         {"xi", c.xi},
         {"margin", c.margin},
         {"kappa", c.kappa},
         {"widths", c.widths},
         {"threads", c.threads},
         {"out", c.out}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c.experiment = j.value("experiment", c.experiment);
    if (j.contains("profile")) c.profile = j.at("profile").get<ProfileSpec>();
    c.symmetry = j.value("symmetry", c.symmetry);
    c.distribution = j.value("distribution", c.distribution);
    c.seed = j.value("seed", c.seed);
    c.samples = j.value("samples", c.samples);
    c.E = j.value("E", c.E);
    c.etas = j.value("etas", c.etas);
    c.ks = j.value("ks", c.ks);
    c.K = j.value("K", c.K);
    c.pool = j.value("pool", c.pool);
    c.tuples = j.value("tuples", c.tuples);
    c.vectors = j.value("vectors", c.vectors);
    c.xi = j.value("xi", c.xi);
    c.margin = j.value("margin", c.margin);
    c.kappa = j.value("kappa", c.kappa);
    c.widths = j.value("widths", c.widths);
    c.threads = j.value("threads", c.threads);
    c.out = j.value("out", c.out);
    if (c.samples < 0 || c.pool < 1 || c.tuples < 1 || c.vectors < 1 || c.threads < 1)
        throw ArgumentError("config: sizes must be positive");
    for (double e : c.etas)
        if (!(e > 0)) throw ArgumentError("config: etas must be positive");
}

ExperimentConfig ExperimentConfig::defaults_for(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    if (experiment == "locallaw") {
        c.samples = 200;
    } else if (experiment == "decay") {
        c.samples = 500;
        c.etas = {0.1};
    } else if (experiment == "que") {
        c.profile.N = 900;
        c.profile.W = 150;
        c.widths = {150, 300};
        c.samples = 100;
        c.xi = 0.2;
        c.margin = 3.0;
        c.pool = 4;
    } else if (experiment == "traceless") {
        c.profile.N = 900;
        c.profile.W = 300;
        c.samples = 0;
        c.etas = {0.003, 0.005, 0.008, 0.013, 0.02, 0.035, 0.06, 0.1};
        c.margin = 10.0;
        c.pool = 4;
    } else if (experiment == "spacing") {
        c.samples = 100;
    } else if (experiment == "mcheck") {
        c.profile.N = 64;
        c.profile.W = 16;
        c.samples = 2000;
        c.etas = {2.0};
        c.pool = 3;
        c.margin = 3.0;
    } else if (experiment == "flow") {
        c.profile.N = 200;
        c.profile.W = 20;
        c.samples = 20;
        c.etas = {0.05};
        c.xi = 0.2;
    } else if (experiment != "profile" && experiment != "sample") {
        throw ArgumentError("unknown experiment: " + experiment);
    }
    return c;
}

// ---------------------------------------------------------------- report

void Report::add(const std::string& check, double measured, double bound, bool pass, int N, int W,
                 double eta) {
    rows.push_back({check, measured, bound, pass, N, W, eta});
}

void Report::add_le(const std::string& check, double measured, double bound, int N, int W, double eta) {
    add(check, measured, bound, measured <= bound, N, W, eta);
}

bool Report::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

namespace {

SymmetryClass sym_of(const ExperimentConfig& c) { return parse_symmetry(c.symmetry); }
EntryDistribution dist_of(const ExperimentConfig& c) { return parse_distribution(c.distribution); }

std::vector<int> distinct_indices(int N, int count, std::uint64_t seed, std::uint64_t salt) {
    count = std::min(count, N);
    std::vector<int> out;
    std::set<int> seen;
    for (std::uint64_t r = 0; static_cast<int>(out.size()) < count; ++r) {
        KeyedEngine eng(seed, salt, r);
        const int x = static_cast<int>(eng() % static_cast<std::uint64_t>(N));
        if (seen.insert(x).second) out.push_back(x);
    }
    return out;
}

std::vector<Complex> alternating(const SpectralPoint& z, int k) {
    std::vector<Complex> out;
    for (int i = 0; i < k; ++i) out.push_back(i % 2 == 0 ? z.z : std::conj(z.z));
    return out;
}

std::vector<Complex> alternating_m(const SpectralPoint& z, int k) {
    std::vector<Complex> out;
    for (int i = 0; i < k; ++i) out.push_back(i % 2 == 0 ? z.m : std::conj(z.m));
    return out;
}

Report make_report(const ExperimentConfig& cfg) {
    Report r;
    r.experiment = cfg.experiment;
    r.seed = cfg.seed;
    r.config = cfg;
    return r;
}

}  // namespace

// ---------------------------------------------------------------- local law

Report run_local_law(const ExperimentConfig& cfg) {
    Report rep = make_report(cfg);
    auto prof = std::make_shared<const VarianceProfile>(cfg.profile.build());
    const VarianceProfile& p = *prof;
    const int N = p.N, W = p.W;
    const auto sym = sym_of(cfg);
    const auto dist = dist_of(cfg);
    StabilityOperator op(p);

    const auto pool = distinct_indices(N, cfg.pool, cfg.seed, 0x11);
    const auto cols = distinct_indices(N, cfg.vectors, cfg.seed, 0x22);
    std::vector<DiagObservable> obs;
    for (int x : pool) obs.push_back(make_special_observable(p, x));

    // tuples index into the pool
    std::map<int, std::vector<std::vector<int>>> tuples;
    for (int k : cfg.ks) {
        if (k < 1 || k > cfg.K) throw ArgumentError("locallaw: chain length outside [1,K]");
        const int count = k == 1 ? static_cast<int>(pool.size()) : (k == 2 ? cfg.tuples : std::max(8, cfg.tuples / 4));
        for (int t = 0; t < count; ++t) {
            std::vector<int> tup(k);
            if (k == 1) {
                tup[0] = t;
            } else {
                KeyedEngine eng(cfg.seed, 0x33 + k, static_cast<std::uint64_t>(t));
                for (auto& v : tup) v = static_cast<int>(eng() % pool.size());
            }
            tuples[k].push_back(tup);
        }
    }
    // isotropic entries (a, b): `tuples` of them per chain, spread over the first
    // iso_tuples x-tuples and the `vectors` columns, rows drawn at random
    const int iso_tuples = std::max(4, cfg.tuples / 4);
    struct IsoEntry {
        int t, col, a;
    };
    std::vector<IsoEntry> iso_entries;
    for (int i = 0; i < cfg.tuples; ++i) {
        KeyedEngine eng(cfg.seed, 0x3f, static_cast<std::uint64_t>(i));
        iso_entries.push_back({i % iso_tuples, (i / iso_tuples) % static_cast<int>(cols.size()),
                               static_cast<int>(eng() % static_cast<std::uint64_t>(N))});
    }

    struct EtaData {
        SpectralPoint z;
        ControlFunction U;
        std::map<int, std::vector<Complex>> m_av;   // per tuple: Tr[M S^{x_k}]
        std::map<int, std::vector<CVec>> m_iso;     // per tuple: diag of M_{[1,k]}
        std::map<int, std::vector<double>> s_av;
        std::map<int, std::vector<double>> s_iso;   // per iso entry
    };
    std::vector<EtaData> data;
    for (double eta : cfg.etas) {
        EtaData d{SpectralPoint::make(Complex(cfg.E, eta), W, N), upsilon_build(N, W, eta, UpsilonFamily::polynomial(6.0)), {}, {}, {}, {}};
        for (int k : cfg.ks) {
            const auto ms = alternating_m(d.z, k);
            for (size_t t = 0; t < tuples[k].size(); ++t) {
                const auto& tup = tuples[k][t];
                std::vector<CVec> A;
                std::vector<int> xs;
                for (int i = 0; i < k; ++i) xs.push_back(pool[tup[i]]);
                for (int i = 0; i + 1 < k; ++i) A.push_back(obs[tup[i]].diag.cast<Complex>());
                const CVec M = m_chain_raw(op, ms, A);
                d.m_av[k].push_back(M.cwiseProduct(obs[tup[k - 1]].diag.cast<Complex>()).sum());
                d.s_av[k].push_back(size_av(d.U, xs));
                if (static_cast<int>(t) < iso_tuples) d.m_iso[k].push_back(M);
            }
            for (const auto& ie : iso_entries) {
                std::vector<int> inner;
                for (int i = 0; i + 1 < k; ++i) inner.push_back(pool[tuples[k][ie.t][i]]);
                d.s_iso[k].push_back(size_iso(d.U, ie.a, inner, cols[ie.col]));
            }
        }
        data.push_back(std::move(d));
    }

    const size_t G = data.size();
    const int kmax = *std::max_element(cfg.ks.begin(), cfg.ks.end());
    struct SampleOut {
        std::vector<std::vector<double>> av, iso;   // [eta][k]
        std::vector<double> law1, entry;            // [eta]
    };
    std::vector<SampleOut> outs(cfg.samples);
    CMat E_cols = CMat::Zero(N, cols.size());
    for (size_t b = 0; b < cols.size(); ++b) E_cols(cols[b], b) = 1.0;

    parallel_for(cfg.samples, cfg.threads, [&](int s) {
        const auto smp = sample_matrix(prof, sym, dist, derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
        const auto c = eigendecompose(smp);
        std::vector<CMat> At;
        for (const auto& o : obs) At.push_back(to_eigenbasis(c, o.diag));
        SampleOut out;
        out.av.assign(G, std::vector<double>(kmax + 1, 0.0));
        out.iso.assign(G, std::vector<double>(kmax + 1, 0.0));
        out.law1.assign(G, 0.0);
        out.entry.assign(G, 0.0);
        for (size_t e = 0; e < G; ++e) {
            const auto& d = data[e];
            const double le = d.U.ell_eta();
            for (int k : cfg.ks) {
                const auto zs = alternating(d.z, k);
                for (size_t t = 0; t < tuples.at(k).size(); ++t) {
                    const auto& tup = tuples.at(k)[t];
                    std::vector<const CMat*> ptr;
                    for (int i = 0; i < k; ++i) ptr.push_back(&At[tup[i]]);
                    const Complex tr = trace_eigen(c, zs, ptr);
                    const auto ps = psi_av(tr - d.m_av.at(k)[t], k, cfg.K, d.s_av.at(k)[t], le);
                    out.av[e][k] = std::max(out.av[e][k], ps.value);
                    if (k == 1) out.law1[e] = std::max(out.law1[e], std::abs(tr - d.m_av.at(k)[t]) * le);
                    if (static_cast<int>(t) < iso_tuples) {
                        ptr.pop_back();
                        const CMat X = apply_chain(c, zs, ptr, E_cols);
                        const CVec& M = d.m_iso.at(k)[t];
                        const double den = std::pow(le, loss_alpha(k, cfg.K));
                        for (size_t i = 0; i < iso_entries.size(); ++i) {
                            const auto& ie = iso_entries[i];
                            if (ie.t != static_cast<int>(t)) continue;
                            Complex f = X(ie.a, ie.col);
                            if (ie.a == cols[ie.col]) f -= M(ie.a);
                            out.iso[e][k] = std::max(out.iso[e][k], std::abs(f) / (den * d.s_iso.at(k)[i]));
                        }
                    }
                }
            }
            // every entry of G - m against sqrt(Upsilon)
            const CMat Gm = resolvent(c, d.z.z);
            double worst = 0.0;
            for (int b = 0; b < N; ++b)
                for (int a = 0; a < N; ++a) {
                    const Complex f = Gm(a, b) - (a == b ? d.z.m : Complex(0.0));
                    worst = std::max(worst, std::abs(f) / std::sqrt(d.U(a, b)));
                }
            out.entry[e] = worst;
        }
        outs[s] = std::move(out);
    });

    const double bound = std::pow(double(N), cfg.xi);
    const double entry_bound = std::pow(double(N), 0.2);
    nlohmann::json summary = nlohmann::json::array();
    for (size_t e = 0; e < G; ++e) {
        const double eta = cfg.etas[e];
        for (int k : cfg.ks) {
            double mav = 0, miso = 0;
            for (const auto& o : outs) {
                mav = std::max(mav, o.av[e][k]);
                miso = std::max(miso, o.iso[e][k]);
            }
            rep.add_le("psi_av_k" + std::to_string(k), mav, bound, N, W, eta);
            rep.add_le("psi_iso_k" + std::to_string(k), miso, bound, N, W, eta);
            summary.push_back({{"eta", eta}, {"k", k}, {"psi_av_max", mav}, {"psi_iso_max", miso}});
        }
        double law1 = 0;
        int good = 0;
        for (const auto& o : outs) {
            law1 = std::max(law1, o.law1[e]);
            if (o.entry[e] <= entry_bound) ++good;
        }
        rep.add_le("law1_av_times_elleta", law1, cfg.margin, N, W, eta);
        const double frac = cfg.samples ? double(good) / cfg.samples : 1.0;
        rep.add("entrywise_fraction_within_N^0.2", frac, 0.99, frac >= 0.99, N, W, eta);
    }
    rep.summary = {{"maxima", summary}, {"pool", pool}, {"columns", cols}};
    return rep;
}

// ---------------------------------------------------------------- decay profile

Report run_decay_profile(const ExperimentConfig& cfg) {
    Report rep = make_report(cfg);
    auto prof = std::make_shared<const VarianceProfile>(cfg.profile.build());
    const VarianceProfile& p = *prof;
    const int N = p.N, W = p.W;
    const auto sym = sym_of(cfg);
    const auto dist = dist_of(cfg);
    const double crit = std::pow(double(W) / N, 2);
    nlohmann::json summary = nlohmann::json::array();

    for (double eta : cfg.etas) {
        const auto z = SpectralPoint::make(Complex(cfg.E, eta), W, N);
        const Mat theta = two_point_kernel(p, z, z, KernelKind::theta).values.real();
        // chunked so the running sum is accumulated in a fixed order
        Mat acc = Mat::Zero(N, N);
        const int chunk = std::max(1, cfg.threads);
        for (int start = 0; start < cfg.samples; start += chunk) {
            const int n = std::min(chunk, cfg.samples - start);
            std::vector<Mat> part(n);
            parallel_for(n, cfg.threads, [&](int i) {
                const auto smp = sample_matrix(prof, sym, dist, derive_seed(cfg.seed, static_cast<std::uint64_t>(start + i)));
                const auto c = eigendecompose(smp);
                const Mat G2 = resolvent(c, z.z).cwiseAbs2();
                part[i] = p.S * G2;
            });
            for (const auto& m : part) acc += m;
        }
        const Mat X = acc / std::max(1, cfg.samples);

        // profile as a function of distance, averaged over the torus
        std::vector<double> prof_mc(N / 2 + 1, 0.0), prof_th(N / 2 + 1, 0.0);
        std::vector<int> cnt(N / 2 + 1, 0);
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) {
                const int d = periodic_distance(a, b, N);
                prof_mc[d] += X(a, b);
                prof_th[d] += theta(a, b);
                ++cnt[d];
            }
        for (int d = 0; d <= N / 2; ++d) {
            prof_mc[d] /= cnt[d];
            prof_th[d] /= cnt[d];
        }

        nlohmann::json entry{{"eta", eta}};
        if (eta > crit) {
            const double ell = z.ell;
            double worst = 1.0;
            int tail_pairs = 0;
            double tail = 0.0;
            const double peak = X.maxCoeff();
            for (int a = 0; a < N; ++a)
                for (int b = 0; b < N; ++b) {
                    const int d = periodic_distance(a, b, N);
                    if (d <= ell) {
                        const double r = X(a, b) / theta(a, b);
                        worst = std::max({worst, r, 1.0 / r});
                    }
                    if (d > 4.0 * ell) {
                        ++tail_pairs;
                        tail = std::max(tail, X(a, b) / peak);
                    }
                }
            rep.add_le("ratio_to_theta_within_ell", worst, 2.0, N, W, eta);
            rep.add_le("tail_beyond_4ell_over_peak", tail, 0.1, N, W, eta);
            entry["tail_pairs"] = tail_pairs;
        } else {
            const double flat = z.m.imag() / (N * eta);
            double worst = 1.0;
            for (int a = 0; a < N; ++a)
                for (int b = 0; b < N; ++b) {
                    const double r = X(a, b) / flat;
                    worst = std::max({worst, r, 1.0 / r});
                }
            rep.add_le("flat_ratio_delocalized", worst, 2.0, N, W, eta);
        }
        const double diag = X.diagonal().maxCoeff() * z.ell * eta;
        rep.add_le("diagonal_times_elleta", diag, cfg.margin, N, W, eta);
        entry["profile_mc"] = prof_mc;
        entry["profile_theta"] = prof_th;
        summary.push_back(entry);
    }
    rep.summary = {{"profiles", summary}};
    return rep;
}

// ---------------------------------------------------------------- QUE

Report run_que(const ExperimentConfig& cfg) {
    Report rep = make_report(cfg);
    std::vector<int> widths = cfg.widths.empty() ? std::vector<int>{cfg.profile.W} : cfg.widths;
    const auto sym = sym_of(cfg);
    const auto dist = dist_of(cfg);
    std::vector<double> maxima;
    nlohmann::json summary = nlohmann::json::array();
    for (int W : widths) {
        ProfileSpec ps = cfg.profile;
        ps.W = W;
        auto prof = std::make_shared<const VarianceProfile>(ps.build());
        const VarianceProfile& p = *prof;
        const int N = p.N;
        // traceless special observables and one macroscopic traceless profile
        std::vector<DiagObservable> obs;
        std::vector<std::string> names;
        for (int x : distinct_indices(N, cfg.pool, cfg.seed, 0x44)) {
            obs.push_back(with_certificate(p, traceless_part(make_special_observable(p, x))));
            names.push_back("special");
        }
        Vec cosv(N);
        for (int a = 0; a < N; ++a) cosv(a) = std::cos(2.0 * M_PI * a / N);
        obs.push_back(with_certificate(p, traceless_part(make_general_observable(cosv))));
        names.push_back("macroscopic");

        struct Out {
            std::vector<double> dev;   // per observable, normalized
            double deloc = 0.0;
        };
        std::vector<Out> outs(cfg.samples);
        parallel_for(cfg.samples, cfg.threads, [&](int s) {
            const auto smp = sample_matrix(prof, sym, dist, derive_seed(cfg.seed, static_cast<std::uint64_t>(s), W));
            const auto c = eigendecompose(smp);
            const Mat P = c.U.cwiseAbs2();   // P(a,i) = |u_i(a)|^2
            Out o;
            o.dev.assign(obs.size(), 0.0);
            for (int i = 0; i < N; ++i) {
                if (std::abs(c.lambda(i)) > 2.0 - cfg.kappa) continue;
                for (size_t j = 0; j < obs.size(); ++j) {
                    const double v = obs[j].diag.dot(P.col(i)) - obs[j].trace() / N;
                    o.dev[j] = std::max(o.dev[j], N * std::abs(v) / *obs[j].norm);
                }
                o.deloc = std::max(o.deloc, std::sqrt(P(0, i)));
            }
            outs[s] = std::move(o);
        });
        double special = 0, macro = 0, deloc = 0;
        for (const auto& o : outs) {
            for (size_t j = 0; j < obs.size(); ++j) {
                double& slot = names[j] == "special" ? special : macro;
                slot = std::max(slot, o.dev[j]);
            }
            deloc = std::max(deloc, o.deloc);
        }
        const double rate = std::sqrt(double(N)) / W;
        const double all = std::max(special, macro);
        rep.add_le("que_max_normalized", all, cfg.margin * rate, N, W, 0.0);
        maxima.push_back(all);
        summary.push_back({{"W", W},
                           {"special", special},
                           {"macroscopic", macro},
                           {"norm_special", *obs.front().norm},
                           {"norm_macroscopic", *obs.back().norm},
                           {"rate", rate},
                           {"max_eigenvector_entry", deloc},
                           {"deloc_reference", std::pow(double(N), cfg.xi) / std::sqrt(double(N))}});
    }
    if (widths.size() >= 2) {
        const double ratio = maxima[0] / maxima[1];
        const double predicted = double(widths[1]) / widths[0];
        const bool pass = ratio >= 0.7 * predicted && ratio <= 1.4 * predicted;
        rep.add("que_ratio_between_widths", ratio, predicted, pass, cfg.profile.N, widths[1], 0.0);
    }
    rep.summary = {{"widths", summary}};
    return rep;
}

// ---------------------------------------------------------------- traceless

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

}  // namespace

Report run_traceless_scaling(const ExperimentConfig& cfg) {
    Report rep = make_report(cfg);
    auto prof = std::make_shared<const VarianceProfile>(cfg.profile.build());
    const VarianceProfile& p = *prof;
    const int N = p.N, W = p.W;
    const double crit = std::pow(double(W) / N, 2);
    const double lo = std::pow(double(N), -1.0);
    for (double e : cfg.etas)
        if (e <= lo || e > crit)
            throw ArgumentError("traceless: eta grid must lie inside (1/N, (W/N)^2]");
    StabilityOperator op(p);
    const auto pool = distinct_indices(N, std::max(2, cfg.pool), cfg.seed, 0x55);

    // pairs (x,y) from the pool, x != y
    std::vector<std::pair<int, int>> pairs;
    for (size_t i = 0; i + 1 < pool.size(); ++i) pairs.emplace_back(pool[i], pool[i + 1]);

    std::vector<double> logeta;
    for (double e : cfg.etas) logeta.push_back(std::log(e));
    nlohmann::json summary = nlohmann::json::array();
    std::vector<double> slopes[3];
    for (auto [x, y] : pairs) {
        const auto Sx = make_special_observable(p, x), Sy = make_special_observable(p, y);
        const auto Tx = traceless_part(Sx), Ty = traceless_part(Sy);
        std::vector<double> F[3];
        for (double eta : cfg.etas) {
            const auto z = SpectralPoint::make(Complex(cfg.E, eta), W, N);
            const std::vector<Complex> ms{z.m, std::conj(z.m)};
            const double base = std::log(N * eta);   // divide out the (N eta)^{-1} size
            auto val = [&](const DiagObservable& A, const DiagObservable& B) {
                const CVec M = m_chain_raw(op, ms, {A.diag.cast<Complex>()});
                return std::log(std::abs(M.cwiseProduct(B.diag.cast<Complex>()).sum())) + base;
            };
            F[0].push_back(val(Sx, Sy));
            F[1].push_back(val(Tx, Sy));
            F[2].push_back(val(Tx, Ty));
        }
        for (int n = 0; n < 3; ++n) slopes[n].push_back(fit_slope(logeta, F[n]));
        summary.push_back({{"x", x}, {"y", y}, {"log_n0", F[0]}, {"log_n1", F[1]}, {"log_n2", F[2]}});
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const double s0 = mean(slopes[0]), s1 = mean(slopes[1]), s2 = mean(slopes[2]);
    const double eta_ref = cfg.etas.front();
    rep.add("m_exponent_n0", s0, 0.0, std::abs(s0) <= 0.15, N, W, eta_ref);
    rep.add("m_exponent_n1", s1, 1.0, std::abs(s1 - 1.0) <= 0.2, N, W, eta_ref);
    rep.add("m_exponent_n2", s2, 1.0, std::abs(s2 - 1.0) <= 0.2, N, W, eta_ref);

    // optional Monte Carlo: fluctuation of the doubly traceless chain against its M-term
    if (cfg.samples > 0) {
        const auto [x, y] = pairs.front();
        const auto Tx = traceless_part(make_special_observable(p, x));
        const auto Ty = traceless_part(make_special_observable(p, y));
        const double eta = cfg.etas.front();
        const auto z = SpectralPoint::make(Complex(cfg.E, eta), W, N);
        const CVec M = m_chain_raw(op, {z.m, std::conj(z.m)}, {Tx.diag.cast<Complex>()});
        const Complex Mtr = M.cwiseProduct(Ty.diag.cast<Complex>()).sum();
        std::vector<double> fl(cfg.samples);
        parallel_for(cfg.samples, cfg.threads, [&](int s) {
            const auto smp = sample_matrix(prof, sym_of(cfg), dist_of(cfg), derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
            const auto c = eigendecompose(smp);
            const CMat A = to_eigenbasis(c, Tx.diag), B = to_eigenbasis(c, Ty.diag);
            const Complex tr = trace_eigen(c, {z.z, std::conj(z.z)}, {&A, &B});
            fl[s] = std::abs(tr - Mtr);
        });
        const double mf = mean(fl);
        const double ratio = mf / std::abs(Mtr);
        rep.add_le("fluctuation_over_m", ratio, cfg.margin / (N * eta), N, W, eta);
    }
    rep.summary = {{"pairs", summary}, {"slopes", {{"n0", slopes[0]}, {"n1", slopes[1]}, {"n2", slopes[2]}}}};
    return rep;
}

// ---------------------------------------------------------------- spacing

std::vector<double> middle_half(const Vec& ev) {
    const Index n = ev.size();
    return std::vector<double>(ev.data() + n / 4, ev.data() + (3 * n) / 4);
}

std::vector<double> gap_ratios(std::vector<double> ev) {
    std::sort(ev.begin(), ev.end());
    std::vector<double> r;
    for (size_t i = 2; i < ev.size(); ++i) {
        const double s1 = ev[i - 1] - ev[i - 2];
        const double s2 = ev[i] - ev[i - 1];
        const double hi = std::max(s1, s2);
        if (hi > 0) r.push_back(std::min(s1, s2) / hi);
    }
    return r;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw StatisticsError("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    const double na = a.size(), nb = b.size();
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

namespace {

std::vector<double> pooled_ratios(ProfilePtr prof, SymmetryClass sym, EntryDistribution dist, int samples,
                                  std::uint64_t seed, int threads) {
    std::vector<std::vector<double>> per(samples);
    parallel_for(samples, threads, [&](int s) {
        const auto smp = sample_matrix(prof, sym, dist, derive_seed(seed, static_cast<std::uint64_t>(s)));
        Vec ev;
        if (smp.is_real()) {
            Eigen::SelfAdjointEigenSolver<Mat> es(smp.H.real(), Eigen::EigenvaluesOnly);
            ev = es.eigenvalues();
        } else {
            Eigen::SelfAdjointEigenSolver<CMat> es(smp.H, Eigen::EigenvaluesOnly);
            ev = es.eigenvalues();
        }
        per[s] = gap_ratios(middle_half(ev));
    });
    std::vector<double> all;
    for (const auto& v : per) all.insert(all.end(), v.begin(), v.end());
    if (all.size() < 1000) throw StatisticsError("spacing: fewer than 1000 pooled gaps");
    return all;
}

}  // namespace

Report run_spacing(const ExperimentConfig& cfg) {
    Report rep = make_report(cfg);
    auto band = std::make_shared<const VarianceProfile>(cfg.profile.build());
    ProfileSpec fs = cfg.profile;
    fs.kind = "flat";
    auto flat = std::make_shared<const VarianceProfile>(fs.build());
    const auto sym = sym_of(cfg);
    const auto other = sym == SymmetryClass::real_symmetric ? SymmetryClass::complex_hermitian : SymmetryClass::real_symmetric;
    const auto r_band = pooled_ratios(band, sym, dist_of(cfg), cfg.samples, cfg.seed, cfg.threads);
    const auto r_ref = pooled_ratios(flat, sym, EntryDistribution::gaussian, cfg.samples, derive_seed(cfg.seed, 1, 0xf1), cfg.threads);
    const auto r_cross = pooled_ratios(flat, other, EntryDistribution::gaussian, cfg.samples, derive_seed(cfg.seed, 2, 0xf2), cfg.threads);
    const int N = band->N, W = band->W;
    const double same = ks_distance(r_band, r_ref);
    const double cross = ks_distance(r_band, r_cross);
    rep.add("pooled_gaps", double(r_band.size()), 1e4, r_band.size() >= 10000, N, W, 0.0);
    rep.add_le("ks_same_symmetry", same, 0.05, N, W, 0.0);
    rep.add("ks_cross_symmetry", cross, 0.1, cross >= 0.1, N, W, 0.0);
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    rep.summary = {{"mean_r_band", mean(r_band)}, {"mean_r_reference", mean(r_ref)}, {"mean_r_cross", mean(r_cross)}};
    return rep;
}

// ---------------------------------------------------------------- global law

Report run_global_law(const ExperimentConfig& cfg) {
    Report rep = make_report(cfg);
    auto prof = std::make_shared<const VarianceProfile>(cfg.profile.build());
    const VarianceProfile& p = *prof;
    const int N = p.N, W = p.W;
    StabilityOperator op(p);
    const auto pool = distinct_indices(N, std::max(3, cfg.pool), cfg.seed, 0x66);
    std::vector<DiagObservable> obs;
    for (int x : pool) obs.push_back(make_special_observable(p, x));
    nlohmann::json summary = nlohmann::json::array();
    for (double eta : cfg.etas) {
        const auto z = SpectralPoint::make(Complex(cfg.E, eta), W, N);
        struct Chain {
            int k;
            bool alt;
            std::vector<Complex> z;
            std::vector<int> idx;   // k observables, last is the test observable
            Complex M;
        };
        std::vector<Chain> chains;
        for (int k : cfg.ks) {
            // alternating chain and, for k >= 2, a same-half-plane chain
            for (int variant = 0; variant < (k >= 2 ? 2 : 1); ++variant) {
                Chain ch;
                ch.k = k;
                ch.alt = variant == 0;
                for (int i = 0; i < k; ++i) {
                    ch.idx.push_back(static_cast<int>(i % pool.size()));
                    ch.z.push_back(variant == 0 && i % 2 ? std::conj(z.z) : z.z);
                }
                std::vector<Complex> ms;
                for (auto zz : ch.z) ms.push_back(zz == z.z ? z.m : std::conj(z.m));
                std::vector<CVec> A;
                for (int i = 0; i + 1 < k; ++i) A.push_back(obs[ch.idx[i]].diag.cast<Complex>());
                ch.M = m_chain_raw(op, ms, A).cwiseProduct(obs[ch.idx[k - 1]].diag.cast<Complex>()).sum();
                chains.push_back(ch);
            }
        }
        std::vector<std::vector<Complex>> vals(cfg.samples);
        parallel_for(cfg.samples, cfg.threads, [&](int s) {
            const auto smp = sample_matrix(prof, sym_of(cfg), dist_of(cfg), derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
            const auto c = eigendecompose(smp);
            std::vector<CMat> At;
            for (const auto& o : obs) At.push_back(to_eigenbasis(c, o.diag));
            std::vector<Complex> v;
            for (const auto& ch : chains) {
                std::vector<const CMat*> ptr;
                for (int i : ch.idx) ptr.push_back(&At[i]);
                v.push_back(trace_eigen(c, ch.z, ptr));
            }
            vals[s] = std::move(v);
        });
        for (size_t j = 0; j < chains.size(); ++j) {
            Complex mean = 0.0;
            for (const auto& v : vals) mean += v[j];
            mean /= double(cfg.samples);
            double var = 0.0;
            for (const auto& v : vals) var += std::norm(v[j] - mean);
            var /= std::max(1, cfg.samples - 1);
            const double se = std::sqrt(var / cfg.samples);
            const double zscore = std::abs(mean - chains[j].M) / se;
            const std::string name = "global_k" + std::to_string(chains[j].k) +
                                     (chains[j].k >= 2 ? (chains[j].alt ? "_alt" : "_same") : "");
            rep.add_le(name + "_zscore", zscore, cfg.margin, N, W, eta);
            summary.push_back({{"chain", name},
                               {"mc_re", mean.real()},
                               {"mc_im", mean.imag()},
                               {"m_re", chains[j].M.real()},
                               {"m_im", chains[j].M.imag()},
                               {"se", se}});
        }
    }
    rep.summary = {{"chains", summary}};
    return rep;
}

// ---------------------------------------------------------------- output

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string report_csv(const Report& r) {
    std::ostringstream os;
    os << "experiment,check,measured,bound,pass,seed,N,W,eta\n";
    for (const auto& row : r.rows)
        os << r.experiment << ',' << row.check << ',' << fmt(row.measured) << ',' << fmt(row.bound) << ','
           << (row.pass ? "true" : "false") << ',' << r.seed << ',' << row.N << ',' << row.W << ','
           << fmt(row.eta) << '\n';
    return os.str();
}

nlohmann::json report_json(const Report& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"check", row.check},
                        {"measured", row.measured},
                        {"bound", row.bound},
                        {"pass", row.pass},
                        {"N", row.N},
                        {"W", row.W},
                        {"eta", row.eta}});
    return {{"experiment", r.experiment},
            {"seed", r.seed},
            {"all_pass", r.all_pass()},
            {"rows", rows},
            {"summary", r.summary},
            {"config", r.config}};
}

std::string report_svg(const Report& r) {
    // one horizontal bar per row: log10(measured/bound), centred on zero
    const int rowh = 18, width = 640, left = 260;
    const int height = rowh * static_cast<int>(r.rows.size()) + 40;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    os << "<text x=\"4\" y=\"14\" font-size=\"12\">" << r.experiment << ": log10(measured/bound)</text>\n";
    const int mid = left + (width - left) / 2;
    os << "<line x1=\"" << mid << "\" y1=\"20\" x2=\"" << mid << "\" y2=\"" << height << "\" stroke=\"black\"/>\n";
    for (size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        const int y = 24 + rowh * static_cast<int>(i);
        double v = 0.0;
        if (row.measured > 0 && row.bound > 0) v = std::clamp(std::log10(row.measured / row.bound), -3.0, 3.0);
        const int len = static_cast<int>(std::abs(v) / 3.0 * (width - left) / 2);
        const int x0 = v < 0 ? mid - len : mid;
        os << "<text x=\"4\" y=\"" << y + 12 << "\" font-size=\"11\">" << row.check << " eta=" << fmt(row.eta)
           << "</text>\n";
        os << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << std::max(len, 1) << "\" height=\"" << rowh - 4
           << "\" fill=\"" << (row.pass ? "#4a8" : "#c44") << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_report(const Report& r, const std::string& dir, bool svg) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base = fs::path(dir) / r.experiment;
    auto write = [](const fs::path& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path.string());
        f << text;
        if (!f) throw std::runtime_error("write failed for " + path.string());
    };
    write(base.string() + ".csv", report_csv(r));
    write(base.string() + ".json", report_json(r).dump(2) + "\n");
    if (svg) write(base.string() + ".svg", report_svg(r));
}

}  // namespace bandlab
