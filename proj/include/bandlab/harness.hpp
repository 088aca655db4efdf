#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bandlab/chains.hpp"
#include "bandlab/common.hpp"
#include "bandlab/ensemble.hpp"

namespace bandlab {

struct ProfileSpec {
    std::string kind = "translation_invariant";   // or block_band, flat
    int N = 400;
    int W = 40;
    double exponent = 3.0;   // translation invariant: f ~ (1+x^2)^{-exponent}, decay order 2*exponent
    int L = 0;               // block band: number of blocks (N = L W)

    VarianceProfile build() const;
};

struct ExperimentConfig {
    std::string experiment = "locallaw";
    ProfileSpec profile;
    std::string symmetry = "complex_hermitian";
    std::string distribution = "gaussian";
    std::uint64_t seed = 20240611;
    int samples = 100;
    double E = 0.0;
    std::vector<double> etas{0.02, 0.05, 0.1};
    std::vector<int> ks{1, 2, 3};
    int K = 8;
    int pool = 12;          // distinct special observables per run
    int tuples = 64;        // x-tuples per chain (k >= 3 uses tuples/4)
    int vectors = 8;        // isotropic columns b
    double xi = 0.25;
    double margin = 10.0;   // explicit constant in front of bounds
    double kappa = 0.1;
    std::vector<int> widths;   // que: alternative bandwidths at fixed N
    int threads = 1;
    std::string out;

    static ExperimentConfig defaults_for(const std::string& experiment);
};

void to_json(nlohmann::json& j, const ProfileSpec& p);
void from_json(const nlohmann::json& j, ProfileSpec& p);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct ReportRow {
    std::string check;
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
    int N = 0;
    int W = 0;
    double eta = 0.0;
};

struct Report {
    std::string experiment;
    std::uint64_t seed = 0;
    std::vector<ReportRow> rows;
    nlohmann::json summary;   // experiment specific extras (deterministic content only)
    nlohmann::json config;

    void add(const std::string& check, double measured, double bound, bool pass, int N, int W,
             double eta);
    // measured <= bound
    void add_le(const std::string& check, double measured, double bound, int N, int W, double eta);
    bool all_pass() const;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers; results are written by
// index so the outcome does not depend on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

Report run_local_law(const ExperimentConfig& cfg);
Report run_decay_profile(const ExperimentConfig& cfg);
Report run_que(const ExperimentConfig& cfg);
Report run_traceless_scaling(const ExperimentConfig& cfg);
Report run_spacing(const ExperimentConfig& cfg);
// Monte Carlo expectation of short chains against their M-terms (global regime).
Report run_global_law(const ExperimentConfig& cfg);

std::vector<double> gap_ratios(std::vector<double> eigenvalues_sorted_middle);
std::vector<double> middle_half(const Vec& eigenvalues);
double ks_distance(std::vector<double> a, std::vector<double> b);

std::string report_csv(const Report& r);
nlohmann::json report_json(const Report& r);
// Writes <dir>/<experiment>.csv and .json, and .svg when requested.
void emit_report(const Report& r, const std::string& dir, bool svg = false);
std::string report_svg(const Report& r);

}  // namespace bandlab
