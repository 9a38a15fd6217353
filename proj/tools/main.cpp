#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spdescore/config.hpp"
#include "spdescore/covariance_op.hpp"
#include "spdescore/errors.hpp"
#include "spdescore/forward.hpp"
#include "spdescore/io.hpp"
#include "spdescore/malliavin.hpp"
#include "spdescore/parallel.hpp"
#include "spdescore/reverse.hpp"
#include "spdescore/rng.hpp"
#include "spdescore/score.hpp"
#include "spdescore/verify.hpp"
#include "spdescore/version.hpp"

namespace {

using namespace spdescore;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitVerifyFailed = 3;

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    std::optional<std::string> profile_override;
    unsigned threads = 0;
};

void write_meta(const fs::path& dir, const RunConfig& cfg, const std::string& command,
                std::optional<std::uint64_t> config_hash = std::nullopt) {
    nlohmann::json meta;
    meta["command"] = command;
    meta["version"] = kVersion;
    meta["seed"] = cfg.seed;
    if (config_hash) meta["config_hash"] = *config_hash;
    meta["config"] = cfg.to_json();
    write_json_file(dir / "meta.json", meta);
}

RunConfig load_effective_config(const CliOptions& opt) {
    RunConfig cfg = load_config_file(opt.config_path);
    if (opt.seed_override) cfg.seed = *opt.seed_override;
    if (opt.out_override) cfg.out_dir = *opt.out_override;
    if (opt.profile_override) cfg.verify.profile = *opt.profile_override;
    return cfg;
}

int cmd_simulate(const CliOptions& opt) {
    const RunConfig cfg = load_effective_config(opt);
    if (!(cfg.horizon > 0.0)) throw ConfigError("horizon", "must be positive for simulate");
    const ModeSpectrum spectrum = cfg.make_spectrum();
    const TraceClassQ q = cfg.make_q();
    const HilbertState u0 = cfg.make_u0(spectrum);

    Ensemble ensemble;
    if (cfg.simulate.mode == "exact") {
        ensemble = sample_ensemble(spectrum, q, u0, cfg.horizon, cfg.n_samples,
                                   SamplingMode::exact, cfg.seed);
    } else {
        ensemble = sample_ensemble(spectrum, q, u0, cfg.horizon, cfg.n_samples,
                                   SamplingMode::euler_maruyama, cfg.seed, cfg.resolve_steps());
    }

    const fs::path dir(cfg.out_dir);
    ensure_output_dir(dir);
    write_ensemble_csv(dir / "ensemble.csv", ensemble);

    if (cfg.simulate.export_path) {
        // Sample 0's trajectory: simulate_em_path draws from stream 0 of the
        // seed, so this reproduces ensemble row 0 exactly.
        const PathRecord path = simulate_em_path(
            spectrum, q, u0, cfg.horizon / cfg.resolve_steps(), cfg.horizon, cfg.seed);
        Eigen::MatrixXd table(path.states.rows(), 1 + path.states.cols());
        table.col(0) = path.times;
        table.rightCols(path.states.cols()) = path.states;
        std::vector<std::string> header{"time"};
        for (int c = 1; c <= cfg.n_modes; ++c) header.push_back("mode_" + std::to_string(c));
        write_matrix_csv(dir / "path.csv", header, table);
    }

    write_meta(dir, cfg, "simulate", ensemble.config_hash);
    std::cout << "wrote " << (dir / "ensemble.csv").string() << " (" << cfg.n_samples
              << " samples)\n";
    return kExitOk;
}

int cmd_covariance(const CliOptions& opt) {
    const RunConfig cfg = load_effective_config(opt);
    const ModeSpectrum spectrum = cfg.make_spectrum();
    const TraceClassQ q = cfg.make_q();
    const MalliavinCov cov =
        malliavin_covariance(spectrum, q, cfg.horizon, cfg.pinv_threshold);

    std::vector<std::string> header;
    for (int c = 1; c <= cfg.n_modes; ++c) header.push_back("mode_" + std::to_string(c));

    const fs::path dir(cfg.out_dir);
    ensure_output_dir(dir);
    write_matrix_csv(dir / "gamma.csv", header, cov.gamma());
    write_matrix_csv(dir / "gamma_pinv.csv", header, cov.pinv());
    write_matrix_csv(dir / "gamma_eigenvalues.csv", {"eigenvalue"}, cov.eigenvalues());

    const double hs = hs_condition_value(spectrum, q, cfg.horizon);
    const double trace = cov.trace();
    nlohmann::json summary;
    summary["horizon"] = cfg.horizon;
    summary["trace_gamma"] = trace;
    summary["hs_condition_value"] = hs;
    summary["trace_rel_gap"] = (hs != 0.0) ? std::abs(trace - hs) / hs : 0.0;
    summary["rank"] = cov.rank();
    summary["pinv_threshold"] = cov.pinv_threshold();
    write_json_file(dir / "covariance_summary.json", summary);
    write_meta(dir, cfg, "covariance");
    std::cout << "wrote gamma/gamma_pinv/eigenvalues to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_score(const CliOptions& opt) {
    const RunConfig cfg = load_effective_config(opt);
    const ModeSpectrum spectrum = cfg.make_spectrum();
    const TraceClassQ q = cfg.make_q();
    const HilbertState u0 = cfg.make_u0(spectrum);
    const ScoreContext ctx(spectrum, q, u0, cfg.horizon, cfg.pinv_threshold);

    // Perturbation grid around the mean along the configured mode axes,
    // scaled by the per-mode standard deviation of the terminal law.
    const int n_axes = static_cast<int>(cfg.score.modes.size());
    const int points = cfg.score.points;
    Eigen::VectorXd offsets(points);
    for (int p = 0; p < points; ++p)
        offsets[p] = -cfg.score.sigma_range + 2.0 * cfg.score.sigma_range * p / (points - 1);

    const long rows = (n_axes == 1) ? points : static_cast<long>(points) * points;
    Eigen::MatrixXd table(rows, 2 * cfg.n_modes);
    long row = 0;
    for (int pa = 0; pa < points; ++pa) {
        const int inner = (n_axes == 2) ? points : 1;
        for (int pb = 0; pb < inner; ++pb, ++row) {
            Eigen::VectorXd u_vec = ctx.mean();
            const int axis_a = cfg.score.modes[0] - 1;
            const double sigma_a = std::sqrt(std::max(ctx.covariance().gamma()(axis_a, axis_a), 0.0));
            u_vec[axis_a] += offsets[pa] * sigma_a;
            if (n_axes == 2) {
                const int axis_b = cfg.score.modes[1] - 1;
                const double sigma_b =
                    std::sqrt(std::max(ctx.covariance().gamma()(axis_b, axis_b), 0.0));
                u_vec[axis_b] += offsets[pb] * sigma_b;
            }
            const HilbertState s = score_full(ctx, spectrum.state(u_vec));
            table.row(row).head(cfg.n_modes) = u_vec;
            table.row(row).tail(cfg.n_modes) = s.coeffs();
        }
    }

    std::vector<std::string> header;
    for (int c = 1; c <= cfg.n_modes; ++c) header.push_back("u_" + std::to_string(c));
    for (int c = 1; c <= cfg.n_modes; ++c) header.push_back("score_" + std::to_string(c));

    const fs::path dir(cfg.out_dir);
    ensure_output_dir(dir);
    write_matrix_csv(dir / "score_field.csv", header, table);
    write_meta(dir, cfg, "score");
    std::cout << "wrote " << (dir / "score_field.csv").string() << " (" << rows << " rows)\n";
    return kExitOk;
}

int cmd_reverse(const CliOptions& opt) {
    const RunConfig cfg = load_effective_config(opt);
    if (!(cfg.horizon > 0.0)) throw ConfigError("horizon", "must be positive for reverse");
    const ModeSpectrum spectrum = cfg.make_spectrum();
    const TraceClassQ q = cfg.make_q();
    const HilbertState u0 = cfg.make_u0(spectrum);

    ReverseConfig rcfg;
    rcfg.t_min = cfg.reverse.t_min;  // 0 picks the 1e-3 * horizon default
    rcfg.horizon = cfg.horizon;
    rcfg.n_steps = cfg.reverse.n_steps;
    rcfg.mode = cfg.reverse.mode == "sde" ? ReverseMode::sde : ReverseMode::ode;
    rcfg.seed = derive_root(cfg.seed, "reverse");
    const ScoreContextCache cache(spectrum, q, u0, rcfg, cfg.pinv_threshold);
    const double t_min = cache.t_min();

    const Ensemble start = sample_ensemble(spectrum, q, u0, cfg.horizon, cfg.n_samples,
                                           SamplingMode::exact, cfg.seed);
    const Ensemble end = run_reverse_ensemble(cache, start, rcfg.mode, rcfg.seed);

    const Eigen::VectorXd emp_mean = end.states.colwise().mean();
    const Eigen::MatrixXd centered = end.states.rowwise() - emp_mean.transpose();
    const Eigen::MatrixXd emp_cov =
        end.states.rows() > 1
            ? Eigen::MatrixXd(centered.transpose() * centered /
                              static_cast<double>(end.states.rows() - 1))
            : Eigen::MatrixXd::Zero(cfg.n_modes, cfg.n_modes);

    const fs::path dir(cfg.out_dir);
    ensure_output_dir(dir);
    write_ensemble_csv(dir / "reverse_start.csv", start);
    write_ensemble_csv(dir / "reverse_end.csv", end);

    nlohmann::json summary;
    summary["t_min"] = t_min;
    summary["mode"] = cfg.reverse.mode;
    summary["n_steps"] = cfg.reverse.n_steps;
    summary["target_mean"] = vector_to_json((spectrum.decay(t_min) * u0.coeffs().array()).matrix());
    summary["target_cov"] = matrix_to_json(stochastic_convolution_covariance(spectrum, q, t_min));
    summary["empirical_mean"] = vector_to_json(emp_mean);
    summary["empirical_cov"] = matrix_to_json(emp_cov);
    write_json_file(dir / "reverse_summary.json", summary);
    write_meta(dir, cfg, "reverse");
    std::cout << "wrote reverse ensembles + targets to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_verify(const CliOptions& opt) {
    const RunConfig cfg = load_effective_config(opt);
    const Profile profile = cfg.verify.profile == "full" ? Profile::full : Profile::quick;
    const std::vector<CheckReport> reports = run_suite(profile, cfg.seed);

    for (const auto& r : reports) {
        std::printf("%s %-28s metric=%.3e threshold=%.3e [%.1fs] %s\n",
                    r.pass ? "PASS" : "FAIL", r.id.c_str(), r.metric, r.threshold, r.seconds,
                    r.instance.c_str());
    }

    const nlohmann::json report = report_to_json(reports, profile, cfg.seed);
    if (opt.out_override || !cfg.out_dir.empty()) {
        const fs::path dir(cfg.out_dir);
        ensure_output_dir(dir);
        write_json_file(dir / "verify_report.json", report);
        write_meta(dir, cfg, "verify");
        std::cout << "report: " << (dir / "verify_report.json").string() << "\n";
    } else {
        std::cout << report.dump(2) << "\n";
    }
    return all_passed(reports) ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral engine for a linear Hilbert-space SPDE: exact forward sampling, "
                 "Malliavin covariance, closed-form scores, reverse-time generation"};
    app.require_subcommand(1);

    CliOptions opt;
    std::uint64_t seed_value = 0;
    std::string out_value;
    std::string profile_value;

    auto add_common = [&](CLI::App* sub, bool with_profile) {
        sub->add_option("--config", opt.config_path, "JSON config file")->required();
        sub->add_option("--seed", seed_value, "override the config seed");
        sub->add_option("--out", out_value, "override the output directory");
        sub->add_option("--threads", opt.threads, "worker cap (0 = hardware)");
        if (with_profile) {
            sub->add_option("--profile", profile_value, "quick | full")
                ->check(CLI::IsMember({"quick", "full"}));
        }
    };

    CLI::App* simulate = app.add_subcommand("simulate", "sample a terminal ensemble");
    CLI::App* covariance = app.add_subcommand("covariance", "export gamma, its pseudoinverse and spectrum");
    CLI::App* score = app.add_subcommand("score", "export the exact score field on a grid");
    CLI::App* reverse = app.add_subcommand("reverse", "run reverse-time generation");
    CLI::App* verify = app.add_subcommand("verify", "run the identity suite");
    add_common(simulate, false);
    add_common(covariance, false);
    add_common(score, false);
    add_common(reverse, false);
    add_common(verify, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitConfig : kExitOk;
    }

    for (CLI::App* sub : {simulate, covariance, score, reverse, verify}) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) opt.seed_override = seed_value;
        if (sub->count("--out")) opt.out_override = out_value;
        if (sub->get_option_no_throw("--profile") && sub->count("--profile"))
            opt.profile_override = profile_value;
    }

    set_max_threads(opt.threads);

    try {
        if (simulate->parsed()) return cmd_simulate(opt);
        if (covariance->parsed()) return cmd_covariance(opt);
        if (score->parsed()) return cmd_score(opt);
        if (reverse->parsed()) return cmd_reverse(opt);
        if (verify->parsed()) return cmd_verify(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
