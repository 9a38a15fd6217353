#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdescore/covariance_op.hpp"
#include "spdescore/spectrum.hpp"
#include "spdescore/state.hpp"

namespace spdescore {

/// Validated run configuration. Parsing is strict: unknown keys are rejected
/// with their full path, and every constraint violation names its field.
struct RunConfig {
    int n_modes = 0;

    struct Spectrum {
        std::string family = "dirichlet_laplacian";
        double nu = 1.0;
        double length = 1.0;
    } spectrum;

    struct Noise {
        std::string family;  // "power_law" | "dense"
        double amplitude = 1.0;
        double decay = 2.0;
        std::optional<std::vector<std::vector<double>>> matrix;  // inline dense Q
        std::optional<std::string> path;                         // or CSV file
    } q;

    struct Initial {
        std::string preset = "zero";  // "zero" | "first_mode" | "smooth"
        std::optional<std::vector<double>> coeffs;
    } u0;

    double horizon = 0.0;
    std::optional<double> dt;
    std::optional<int> n_steps;
    int n_samples = 1;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    double pinv_threshold = 1e-12;

    struct Simulate {
        std::string mode = "exact";  // "exact" | "em"
        bool export_path = false;    // em only: write sample 0's trajectory
    } simulate;

    struct ScoreGrid {
        std::vector<int> modes = {1};  // 1-based mode axes
        int points = 21;
        double sigma_range = 3.0;
    } score;

    struct Reverse {
        double t_min = 0.0;  // 0 -> default 1e-3 * horizon
        std::string mode = "sde";
        int n_steps = 128;
    } reverse;

    struct Verify {
        std::string profile = "quick";
    } verify;

    ModeSpectrum make_spectrum() const;
    TraceClassQ make_q() const;
    HilbertState make_u0(const ModeSpectrum& spec) const;
    int resolve_steps() const;  // from n_steps or horizon/dt

    nlohmann::json to_json() const;
};

/// Parse and validate. A top-level "config" object (meta.json shape) is
/// unwrapped, so emitted metadata can be fed straight back in.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

}  // namespace spdescore
