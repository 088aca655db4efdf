// Command line front end for the experiment harness.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bandlab/chains.hpp"
#include "bandlab/flow.hpp"
#include "bandlab/harness.hpp"
#include "bandlab/kernels.hpp"
#include "bandlab/mterms.hpp"
#include "bandlab/rng.hpp"

using namespace bandlab;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out = "results";
    int samples = -1;
    int threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--samples", c.samples, "number of samples");
    sub->add_option("--threads", c.threads, "worker threads");
}

ExperimentConfig load(const std::string& name, const Common& c, const CLI::App* sub) {
    ExperimentConfig cfg = ExperimentConfig::defaults_for(name);
    if (!c.config.empty()) {
        std::ifstream f(c.config);
        nlohmann::json j = nlohmann::json::parse(f);
        // fields missing from the file keep the experiment defaults
        nlohmann::json merged = cfg;
        merged.merge_patch(j);
        cfg = merged.get<ExperimentConfig>();
    }
    cfg.experiment = name;
    if (sub->count("--seed")) cfg.seed = c.seed;
    if (c.samples >= 0) cfg.samples = c.samples;
    if (c.threads > 0) cfg.threads = c.threads;
    if (sub->count("--out") || cfg.out.empty()) cfg.out = c.out;
    return cfg;
}

int finish(const Report& r, const std::string& out) {
    emit_report(r, out, true);
    for (const auto& row : r.rows)
        std::cout << (row.pass ? "PASS " : "FAIL ") << row.check << " eta=" << row.eta << " measured=" << row.measured
                  << " bound=" << row.bound << "\n";
    return r.all_pass() ? 0 : 1;
}

Report run_profile(const ExperimentConfig& cfg) {
    Report r;
    r.experiment = cfg.experiment;
    r.seed = cfg.seed;
    r.config = cfg;
    const auto p = cfg.profile.build();
    const auto pr = verify_profile(p, 0.1);
    for (const auto& c : pr.checks) r.add(c.name, c.measured, c.bound, c.pass, p.N, p.W, 0.0);
    AdmissibilityOptions opt;
    opt.seed = cfg.seed;
    const auto adm = verify_control_admissibility(p, UpsilonFamily::polynomial(6.0), opt);
    for (const auto& row : adm.rows)
        if (std::isfinite(row.fitted_constant))
            r.add_le("admissibility_" + row.condition, row.fitted_constant, cfg.margin, p.N, p.W, 0.0);
    r.summary = {{"empirical_D", pr.empirical_D}, {"admissibility", adm.to_json()}};
    std::filesystem::create_directories(cfg.out);
    std::ofstream(std::filesystem::path(cfg.out) / "profile.json") << profile_to_json(p).dump(2) << "\n";
    return r;
}

Report run_sample(const ExperimentConfig& cfg) {
    Report r;
    r.experiment = cfg.experiment;
    r.seed = cfg.seed;
    r.config = cfg;
    auto p = std::make_shared<const VarianceProfile>(cfg.profile.build());
    const auto s = sample_matrix(p, parse_symmetry(cfg.symmetry), parse_distribution(cfg.distribution), cfg.seed);
    const auto c = eigendecompose(s);
    const double err = reconstruction_error(c, s.H);
    r.add_le("eigendecomposition_residual", err, 1e-10, p->N, p->W, 0.0);
    std::filesystem::create_directories(cfg.out);
    std::ofstream(std::filesystem::path(cfg.out) / "sample.csv") << matrix_to_csv(s.H, s.is_real());
    return r;
}

Report run_mcheck(const ExperimentConfig& cfg) {
    Report r = run_global_law(cfg);
    const auto p = cfg.profile.build();
    MSizeOptions opt;
    opt.seed = cfg.seed;
    std::vector<Complex> zs;
    for (double e : cfg.etas) zs.emplace_back(cfg.E, e);
    const auto m = check_m_size_bounds(p, zs, opt);
    for (const auto& row : m.rows) {
        const std::string tag = "_k" + std::to_string(row.k) + "_n" + std::to_string(row.traceless);
        r.add_le("m_size_av" + tag, row.av_constant, 10.0, p.N, p.W, row.eta);
        r.add_le("m_size_iso" + tag, row.iso_constant, 10.0, p.N, p.W, row.eta);
    }
    return r;
}

Report run_flow(const ExperimentConfig& cfg) {
    Report r;
    r.experiment = cfg.experiment;
    r.seed = cfg.seed;
    r.config = cfg;
    auto p = std::make_shared<const VarianceProfile>(cfg.profile.build());
    FlowPsiConfig fc;
    fc.K = cfg.K;
    fc.samples = std::max(1, cfg.samples);
    fc.seed = cfg.seed;
    fc.symmetry = parse_symmetry(cfg.symmetry);
    fc.distribution = parse_distribution(cfg.distribution);
    const auto rows = flow_psi_trace(p, Complex(cfg.E, cfg.etas.front()), fc);
    const double bound = std::pow(double(p->N), cfg.xi);
    for (const auto& row : rows) {
        r.add_le("flow_psi_av", row.psi_av, bound, p->N, p->W, row.eta);
        r.add_le("flow_psi_iso", row.psi_iso, bound, p->N, p->W, row.eta);
    }
    std::filesystem::create_directories(cfg.out);
    std::ofstream(std::filesystem::path(cfg.out) / "flow_trace.csv") << flow_rows_to_csv(rows);
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"band matrix experiments"};
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, std::function<Report(const ExperimentConfig&)>>> cmds = {
        {"profile", run_profile},     {"sample", run_sample},
        {"mcheck", run_mcheck},       {"locallaw", run_local_law},
        {"decay", run_decay_profile}, {"que", run_que},
        {"traceless", run_traceless_scaling}, {"spacing", run_spacing},
        {"flow", run_flow}};
    Common common;
    std::vector<CLI::App*> subs;
    for (const auto& cmd : cmds) {
        auto* sub = app.add_subcommand(cmd.first);
        add_common(sub, common);
        subs.push_back(sub);
    }
    CLI11_PARSE(app, argc, argv);
    try {
        for (size_t i = 0; i < cmds.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const auto cfg = load(cmds[i].first, common, subs[i]);
            return finish(cmds[i].second(cfg), cfg.out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
