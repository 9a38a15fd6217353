#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdescore/covariance_op.hpp"
#include "spdescore/score.hpp"
#include "spdescore/spectrum.hpp"

namespace spdescore {

enum class Profile { quick, full };

/// Outcome of one named check over its randomized instance sweep. `metric`
/// is a residual or a z-score (or a worst-case band ratio for multi-part
/// checks; the detail string spells out the parts); pass iff metric <=
/// threshold. Wall time is reported on the console but kept out of the JSON
/// so reports are byte-reproducible from the seed.
struct CheckReport {
    std::string id;
    std::string instance;
    double metric = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

/// Random conformance instance: lambda_k = -nu k^2 with nu in [0.1, 2], and Q
/// either power-law diagonal or dense PSD from a decaying-row factor B B^T.
struct Instance {
    ModeSpectrum spectrum;
    TraceClassQ q;
    std::string descriptor;
};

Instance random_instance(std::mt19937_64& gen, int n_max, bool force_dense = false,
                         bool allow_rank_deficient = false);

/// Max relative gap between a claimed score at u and central finite
/// differences of the Gaussian log-density oracle along random retained
/// directions. Feeding anything other than the true score (a sign flip, a
/// wrong mean) makes this residual order one.
double score_fd_residual(const ScoreContext& ctx, const HilbertState& u,
                         const HilbertState& claimed_score, std::mt19937_64& gen,
                         int n_directions = 3);

CheckReport check_covariance_closed_form(Profile profile, std::uint64_t seed);
CheckReport check_covariance_recursion(Profile profile, std::uint64_t seed);
CheckReport check_covering_property(Profile profile, std::uint64_t seed);
CheckReport check_minimal_norm(Profile profile, std::uint64_t seed);
CheckReport check_skorokhod_ito(Profile profile, std::uint64_t seed);
CheckReport check_ibp_duality(Profile profile, std::uint64_t seed);
CheckReport check_trace_identity(Profile profile, std::uint64_t seed);
CheckReport check_chain_rule(Profile profile, std::uint64_t seed);
CheckReport check_score_exactness(Profile profile, std::uint64_t seed);
CheckReport check_bismut_demo(Profile profile, std::uint64_t seed);
CheckReport check_reverse_marginals(Profile profile, std::uint64_t seed);

/// All checks in canonical id order, each on its own derived RNG root.
std::vector<CheckReport> run_suite(Profile profile, std::uint64_t seed);

bool all_passed(const std::vector<CheckReport>& reports);
nlohmann::json report_to_json(const std::vector<CheckReport>& reports, Profile profile,
                              std::uint64_t seed);

}  // namespace spdescore
