#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bandlab/common.hpp"

namespace bandlab {

enum class ProfileKind { translation_invariant, block_band, custom };
enum class SymmetryClass { complex_hermitian, real_symmetric };
enum class EntryDistribution { gaussian, rademacher, uniform };

std::string to_string(ProfileKind k);
std::string to_string(SymmetryClass s);
std::string to_string(EntryDistribution d);
ProfileKind parse_profile_kind(const std::string& s);
SymmetryClass parse_symmetry(const std::string& s);
EntryDistribution parse_distribution(const std::string& s);

struct VarianceProfile {
    int N = 0;
    int W = 0;
    Mat S;
    ProfileKind kind = ProfileKind::custom;
    double C_W = 0.0;           // max_ab S_ab <= C_W / W
    nlohmann::json generator;   // parameters that rebuild S, empty for custom
};

using ProfilePtr = std::shared_ptr<const VarianceProfile>;

// 0-based indices, x,y in [0, N).
int periodic_distance(int x, int y, int N);

using DecayFunction = std::function<double(double)>;

// f(x) = (1+x^2)^{-p} / Z normalized on the real line (needs p > 1/2).
DecayFunction power_decay(double p);

VarianceProfile build_translation_invariant(int N, int W, const DecayFunction& f);
// Convenience form recording the generator so the profile round-trips through JSON.
VarianceProfile build_translation_invariant_power(int N, int W, double p);

VarianceProfile build_block_band(int L, int W, const Mat& sigma);
// sigma_ij = 1/3 on |i-j|_L <= 1 (or 1/L if L < 3).
Mat nearest_neighbour_sigma(int L);

VarianceProfile make_custom_profile(const Mat& S, int W);

struct ProfileCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
};

struct ProfileReport {
    std::vector<ProfileCheck> checks;
    double column_sum_error = 0.0;
    double symmetry_error = 0.0;
    double measured_C_W = 0.0;
    // Largest D with W*S_ab <= C*(1+|a-b|/W)^{-D}, C fixed at the diagonal value;
    // infinite when S has compact support inside the torus.
    double empirical_D = 0.0;
    bool all_pass() const;
};

ProfileReport verify_profile(const VarianceProfile& p, double zeta0);

struct MatrixSample {
    CMat H;   // real class stores zero imaginary parts
    CMat h;   // standardized entries
    SymmetryClass symmetry = SymmetryClass::complex_hermitian;
    EntryDistribution distribution = EntryDistribution::gaussian;
    std::uint64_t seed = 0;
    ProfilePtr profile;
    bool is_real() const { return symmetry == SymmetryClass::real_symmetric; }
};

// One standardized draw (mean 0, variance 1).
double standardized_draw(EntryDistribution d, class KeyedEngine& eng);

MatrixSample sample_matrix(ProfilePtr p, SymmetryClass sym, EntryDistribution dist,
                           std::uint64_t seed);
// Rebuilds H = sqrt(S) (.) h from a standardized matrix.
MatrixSample assemble_sample(ProfilePtr p, CMat h, SymmetryClass sym,
                             EntryDistribution dist, std::uint64_t seed);

nlohmann::json profile_to_json(const VarianceProfile& p, bool include_entries = true);
VarianceProfile profile_from_json(const nlohmann::json& j);

std::string matrix_to_csv(const CMat& M, bool real_only);
std::string matrix_to_csv(const Mat& M);

}  // namespace bandlab
