#include "spdescore/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "spdescore/errors.hpp"
#include "spdescore/io.hpp"

namespace spdescore {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::string& prefix,
                         const std::set<std::string>& known) {
    for (const auto& item : j.items()) {
        if (!known.count(item.key()))
            throw ConfigError(prefix.empty() ? item.key() : prefix + "." + item.key(),
                              "unknown key");
    }
}

template <typename T>
T get_required(const json& j, const std::string& prefix, const std::string& key) {
    if (!j.contains(key))
        throw ConfigError(prefix.empty() ? key : prefix + "." + key, "required key is missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(prefix.empty() ? key : prefix + "." + key, "has the wrong type");
    }
}

template <typename T>
void get_optional(const json& j, const std::string& prefix, const std::string& key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(prefix.empty() ? key : prefix + "." + key, "has the wrong type");
    }
}

}  // namespace

ModeSpectrum RunConfig::make_spectrum() const {
    return make_dirichlet_laplacian(n_modes, spectrum.length, spectrum.nu);
}

TraceClassQ RunConfig::make_q() const {
    if (q.family == "power_law") return make_power_law_q(n_modes, q.amplitude, q.decay);

    Eigen::MatrixXd m;
    if (q.matrix) {
        const auto& rows = *q.matrix;
        m.resize(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.front().size())
                throw ConfigError("q.matrix", "rows must all have the same length");
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    } else {
        m = read_matrix_csv(*q.path);
    }
    if (m.rows() != n_modes || m.cols() != n_modes)
        throw ConfigError("q.matrix", "dense covariance must be n_modes x n_modes");
    return make_dense_q(std::move(m));
}

HilbertState RunConfig::make_u0(const ModeSpectrum& spec) const {
    if (u0.coeffs) {
        if (static_cast<int>(u0.coeffs->size()) != n_modes)
            throw ConfigError("u0.coeffs", "length must equal n_modes");
        Eigen::VectorXd v(n_modes);
        for (int i = 0; i < n_modes; ++i) v[i] = (*u0.coeffs)[i];
        return spec.state(std::move(v));
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n_modes);
    if (u0.preset == "first_mode") {
        v[0] = 1.0;
    } else if (u0.preset == "smooth") {
        for (int k = 1; k <= n_modes; ++k) v[k - 1] = 1.0 / (k * k);
    }
    return spec.state(std::move(v));
}

int RunConfig::resolve_steps() const {
    if (n_steps) return *n_steps;
    if (!dt) throw ConfigError("dt", "either dt or n_steps is required for this command");
    const double ratio = horizon / *dt;
    const auto m = static_cast<long long>(std::llround(ratio));
    if (m < 1 || std::abs(static_cast<double>(m) * *dt - horizon) > 1e-9 * std::max(1.0, horizon))
        throw ConfigError("dt", "horizon must be an integer multiple of dt");
    return static_cast<int>(m);
}

json RunConfig::to_json() const {
    json j;
    j["n_modes"] = n_modes;
    j["spectrum"] = {{"family", spectrum.family}, {"nu", spectrum.nu}, {"length", spectrum.length}};
    json jq;
    jq["family"] = q.family;
    if (q.family == "power_law") {
        jq["amplitude"] = q.amplitude;
        jq["decay"] = q.decay;
    }
    if (q.matrix) jq["matrix"] = *q.matrix;
    if (q.path) jq["path"] = *q.path;
    j["q"] = std::move(jq);
    json ju;
    if (u0.coeffs)
        ju["coeffs"] = *u0.coeffs;
    else
        ju["preset"] = u0.preset;
    j["u0"] = std::move(ju);
    j["horizon"] = horizon;
    if (dt) j["dt"] = *dt;
    if (n_steps) j["n_steps"] = *n_steps;
    j["n_samples"] = n_samples;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["pinv_threshold"] = pinv_threshold;
    j["simulate"] = {{"mode", simulate.mode}, {"export_path", simulate.export_path}};
    j["score"] = {{"modes", score.modes}, {"points", score.points},
                  {"sigma_range", score.sigma_range}};
    j["reverse"] = {{"t_min", reverse.t_min}, {"mode", reverse.mode},
                    {"n_steps", reverse.n_steps}};
    j["verify"] = {{"profile", verify.profile}};
    return j;
}

RunConfig parse_config(const json& root) {
    const json& j = root.contains("config") ? root.at("config") : root;
    if (!j.is_object()) throw ConfigError("config", "configuration must be a JSON object");

    reject_unknown_keys(j, "", {"n_modes", "spectrum", "q", "u0", "horizon", "dt", "n_steps",
                                "n_samples", "seed", "out_dir", "pinv_threshold", "simulate",
                                "score", "reverse", "verify"});

    RunConfig cfg;
    cfg.n_modes = get_required<int>(j, "", "n_modes");
    if (cfg.n_modes < 1) throw ConfigError("n_modes", "must be >= 1");

    {
        const json& js = get_required<json>(j, "", "spectrum");
        reject_unknown_keys(js, "spectrum", {"family", "nu", "length"});
        get_optional(js, "spectrum", "family", cfg.spectrum.family);
        if (cfg.spectrum.family != "dirichlet_laplacian")
            throw ConfigError("spectrum.family", "unknown family '" + cfg.spectrum.family + "'");
        get_optional(js, "spectrum", "nu", cfg.spectrum.nu);
        get_optional(js, "spectrum", "length", cfg.spectrum.length);
        if (!(cfg.spectrum.nu > 0.0)) throw ConfigError("spectrum.nu", "must be positive");
        if (!(cfg.spectrum.length > 0.0)) throw ConfigError("spectrum.length", "must be positive");
    }

    {
        const json& jq = get_required<json>(j, "", "q");
        reject_unknown_keys(jq, "q", {"family", "amplitude", "decay", "matrix", "path"});
        cfg.q.family = get_required<std::string>(jq, "q", "family");
        if (cfg.q.family == "power_law") {
            get_optional(jq, "q", "amplitude", cfg.q.amplitude);
            get_optional(jq, "q", "decay", cfg.q.decay);
            if (!(cfg.q.amplitude > 0.0)) throw ConfigError("q.amplitude", "must be positive");
            if (!(cfg.q.decay > 1.0))
                throw ConfigError("q.decay",
                                  "must exceed 1 for a trace-class covariance (got " +
                                      std::to_string(cfg.q.decay) + ")");
        } else if (cfg.q.family == "dense") {
            if (jq.contains("matrix")) {
                std::vector<std::vector<double>> m;
                get_optional(jq, "q", "matrix", m);
                cfg.q.matrix = std::move(m);
            }
            if (jq.contains("path")) {
                std::string p;
                get_optional(jq, "q", "path", p);
                cfg.q.path = std::move(p);
            }
            if (!cfg.q.matrix && !cfg.q.path)
                throw ConfigError("q", "dense family needs 'matrix' or 'path'");
            if (cfg.q.matrix && cfg.q.path)
                throw ConfigError("q", "give either 'matrix' or 'path', not both");
        } else {
            throw ConfigError("q.family", "unknown family '" + cfg.q.family + "'");
        }
    }

    if (j.contains("u0")) {
        const json& ju = j.at("u0");
        reject_unknown_keys(ju, "u0", {"preset", "coeffs"});
        if (ju.contains("coeffs")) {
            std::vector<double> c;
            get_optional(ju, "u0", "coeffs", c);
            cfg.u0.coeffs = std::move(c);
        } else {
            get_optional(ju, "u0", "preset", cfg.u0.preset);
            if (cfg.u0.preset != "zero" && cfg.u0.preset != "first_mode" &&
                cfg.u0.preset != "smooth")
                throw ConfigError("u0.preset", "unknown preset '" + cfg.u0.preset + "'");
        }
    }

    // horizon 0 is meaningful for covariance/score exports (gamma = 0);
    // commands that integrate in time enforce positivity themselves.
    cfg.horizon = get_required<double>(j, "", "horizon");
    if (cfg.horizon < 0.0) throw ConfigError("horizon", "must be non-negative");
    if (j.contains("dt")) {
        double v = 0.0;
        get_optional(j, "", "dt", v);
        if (!(v > 0.0)) throw ConfigError("dt", "must be positive");
        cfg.dt = v;
    }
    if (j.contains("n_steps")) {
        int v = 0;
        get_optional(j, "", "n_steps", v);
        if (v < 1) throw ConfigError("n_steps", "must be >= 1");
        cfg.n_steps = v;
    }
    if (cfg.dt && cfg.n_steps) throw ConfigError("n_steps", "give either dt or n_steps, not both");

    get_optional(j, "", "n_samples", cfg.n_samples);
    if (cfg.n_samples < 1) throw ConfigError("n_samples", "must be >= 1");
    cfg.seed = get_required<std::uint64_t>(j, "", "seed");
    get_optional(j, "", "out_dir", cfg.out_dir);
    get_optional(j, "", "pinv_threshold", cfg.pinv_threshold);
    if (!(cfg.pinv_threshold > 0.0)) throw ConfigError("pinv_threshold", "must be positive");

    if (j.contains("simulate")) {
        const json& js = j.at("simulate");
        reject_unknown_keys(js, "simulate", {"mode", "export_path"});
        get_optional(js, "simulate", "mode", cfg.simulate.mode);
        get_optional(js, "simulate", "export_path", cfg.simulate.export_path);
        if (cfg.simulate.mode != "exact" && cfg.simulate.mode != "em")
            throw ConfigError("simulate.mode", "must be 'exact' or 'em'");
        if (cfg.simulate.export_path && cfg.simulate.mode != "em")
            throw ConfigError("simulate.export_path", "path export needs mode 'em'");
    }

    if (j.contains("score")) {
        const json& js = j.at("score");
        reject_unknown_keys(js, "score", {"modes", "points", "sigma_range"});
        get_optional(js, "score", "modes", cfg.score.modes);
        get_optional(js, "score", "points", cfg.score.points);
        get_optional(js, "score", "sigma_range", cfg.score.sigma_range);
        if (cfg.score.modes.empty() || cfg.score.modes.size() > 2)
            throw ConfigError("score.modes", "needs one or two mode axes");
        for (int m : cfg.score.modes)
            if (m < 1 || m > cfg.n_modes)
                throw ConfigError("score.modes", "mode index out of range");
        if (cfg.score.points < 2) throw ConfigError("score.points", "must be >= 2");
        const long rows = cfg.score.modes.size() == 2
                              ? static_cast<long>(cfg.score.points) * cfg.score.points
                              : static_cast<long>(cfg.score.points);
        if (rows > 1000000) throw ConfigError("score.points", "grid exceeds 1e6 rows");
        if (!(cfg.score.sigma_range > 0.0))
            throw ConfigError("score.sigma_range", "must be positive");
    }

    if (j.contains("reverse")) {
        const json& jr = j.at("reverse");
        reject_unknown_keys(jr, "reverse", {"t_min", "mode", "n_steps"});
        get_optional(jr, "reverse", "t_min", cfg.reverse.t_min);
        get_optional(jr, "reverse", "mode", cfg.reverse.mode);
        get_optional(jr, "reverse", "n_steps", cfg.reverse.n_steps);
        if (cfg.reverse.t_min < 0.0 || cfg.reverse.t_min >= cfg.horizon)
            throw ConfigError("reverse.t_min", "must satisfy 0 <= t_min < horizon");
        if (cfg.reverse.mode != "sde" && cfg.reverse.mode != "ode")
            throw ConfigError("reverse.mode", "must be 'sde' or 'ode'");
        if (cfg.reverse.n_steps < 1) throw ConfigError("reverse.n_steps", "must be >= 1");
    }

    if (j.contains("verify")) {
        const json& jv = j.at("verify");
        reject_unknown_keys(jv, "verify", {"profile"});
        get_optional(jv, "verify", "profile", cfg.verify.profile);
        if (cfg.verify.profile != "quick" && cfg.verify.profile != "full")
            throw ConfigError("verify.profile", "must be 'quick' or 'full'");
    }

    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("(root)", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace spdescore
