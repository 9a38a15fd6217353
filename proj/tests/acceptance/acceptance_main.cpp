// Acceptance suite: runs every conformance criterion at full scale, prints
// one PASS/FAIL line per criterion with its wall time, and exits nonzero if
// anything fails. Criteria 1-11 are the full-profile identity checks; 12 is
// byte-level determinism of the CLI across reruns and worker counts.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdescore/config.hpp"
#include "spdescore/forward.hpp"
#include "spdescore/io.hpp"
#include "spdescore/parallel.hpp"
#include "spdescore/verify.hpp"

namespace fs = std::filesystem;
using namespace spdescore;

namespace {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    double limit_seconds = 0.0;
    std::string detail;
};

std::vector<CriterionResult> g_results;

template <typename Fn>
void run_criterion(int number, const std::string& name, double limit_seconds, Fn&& fn) {
    CriterionResult res;
    res.number = number;
    res.name = name;
    res.limit_seconds = limit_seconds;
    const auto start = std::chrono::steady_clock::now();
    try {
        res.detail = fn(res.pass);
    } catch (const std::exception& e) {
        res.pass = false;
        res.detail = std::string("exception: ") + e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_seconds > 0.0 && res.seconds >= limit_seconds) {
        res.pass = false;
        res.detail += " [runtime limit exceeded]";
    }
    std::printf("%s criterion %2d %-28s [%6.1fs / limit %s] %s\n", res.pass ? "PASS" : "FAIL",
                number, name.c_str(), res.seconds,
                limit_seconds > 0.0 ? (std::to_string(static_cast<int>(limit_seconds)) + "s").c_str()
                                    : "none",
                res.detail.c_str());
    std::fflush(stdout);
    g_results.push_back(res);
}

std::string check_to_detail(const CheckReport& rep, bool& pass) {
    pass = rep.pass;
    std::ostringstream os;
    os.precision(3);
    os << "metric=" << rep.metric << " threshold=" << rep.threshold << " | " << rep.detail;
    return os.str();
}

std::map<std::string, std::string> read_dir_bytes(const fs::path& dir) {
    std::map<std::string, std::string> files;
    if (!fs::is_directory(dir)) return files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[fs::relative(entry.path(), dir).string()] = ss.str();
    }
    return files;
}

int run_cli(const std::string& cli, const std::string& args) {
    const std::string command = cli + " " + args + " > /dev/null 2>&1";
    return std::system(command.c_str());
}

const std::uint64_t kSeed = 20260809;

}  // namespace

int main(int argc, char** argv) {
    std::string cli_path;
    fs::path work = fs::temp_directory_path() / "spdescore_acceptance";
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--cli") cli_path = argv[i + 1];
        if (flag == "--work") work = argv[i + 1];
    }
    fs::create_directories(work);

    run_criterion(1, "covariance_closed_form", 5.0, [&](bool& pass) {
        return check_to_detail(check_covariance_closed_form(Profile::full, kSeed), pass);
    });
    run_criterion(2, "covariance_recursion", 2.0, [&](bool& pass) {
        return check_to_detail(check_covariance_recursion(Profile::full, kSeed), pass);
    });
    run_criterion(3, "covering_property", 5.0, [&](bool& pass) {
        return check_to_detail(check_covering_property(Profile::full, kSeed), pass);
    });
    run_criterion(4, "minimal_norm", 5.0, [&](bool& pass) {
        return check_to_detail(check_minimal_norm(Profile::full, kSeed), pass);
    });
    run_criterion(5, "skorokhod_ito", 60.0, [&](bool& pass) {
        return check_to_detail(check_skorokhod_ito(Profile::full, kSeed), pass);
    });
    run_criterion(6, "ibp_duality", 60.0, [&](bool& pass) {
        return check_to_detail(check_ibp_duality(Profile::full, kSeed), pass);
    });
    run_criterion(7, "trace_identity", 30.0, [&](bool& pass) {
        return check_to_detail(check_trace_identity(Profile::full, kSeed), pass);
    });
    run_criterion(8, "chain_rule", 10.0, [&](bool& pass) {
        return check_to_detail(check_chain_rule(Profile::full, kSeed), pass);
    });
    run_criterion(9, "score_exactness", 5.0, [&](bool& pass) {
        return check_to_detail(check_score_exactness(Profile::full, kSeed), pass);
    });
    run_criterion(10, "bismut_binned_demo", 120.0, [&](bool& pass) {
        return check_to_detail(check_bismut_demo(Profile::full, kSeed), pass);
    });
    run_criterion(11, "reverse_marginal_tracking", 120.0, [&](bool& pass) {
        return check_to_detail(check_reverse_marginals(Profile::full, kSeed), pass);
    });

    run_criterion(12, "determinism", 0.0, [&](bool& pass) {
        pass = true;
        std::ostringstream detail;

        // Library level: a worker-count sweep must not move a single bit.
        {
            const ModeSpectrum spec = make_dirichlet_laplacian(4, 1.0, 0.5);
            const TraceClassQ q = make_power_law_q(4, 1.0, 2.0);
            const HilbertState u0 = spec.zero_state();
            set_max_threads(1);
            const Ensemble a = sample_ensemble(spec, q, u0, 1.0, 5000, SamplingMode::exact, kSeed);
            set_max_threads(3);
            const Ensemble b = sample_ensemble(spec, q, u0, 1.0, 5000, SamplingMode::exact, kSeed);
            set_max_threads(0);
            if (!(a.states == b.states)) {
                pass = false;
                detail << "library ensemble differs across worker counts; ";
            }
        }

        if (cli_path.empty()) {
            detail << "cli path not supplied, CLI sweep skipped";
            pass = false;
            return detail.str();
        }

        // CLI level: every subcommand, rerun and thread sweep, byte-compare.
        nlohmann::json cfg{
            {"n_modes", 3},
            {"spectrum", {{"nu", 0.4}, {"length", 1.0}}},
            {"q", {{"family", "power_law"}, {"amplitude", 1.0}, {"decay", 2.0}}},
            {"u0", {{"preset", "smooth"}}},
            {"horizon", 1.0},
            {"n_samples", 400},
            {"n_steps", 64},
            {"seed", 911},
            {"reverse", {{"t_min", 0.1}, {"mode", "sde"}, {"n_steps", 32}}},
            {"verify", {{"profile", "quick"}}},
        };
        const fs::path cfg_path = work / "determinism_config.json";
        write_json_file(cfg_path, cfg);

        const std::vector<std::pair<std::string, std::string>> runs = {
            {"simulate", ""},
            {"covariance", ""},
            {"score", ""},
            {"reverse", ""},
        };
        for (const auto& [sub, extra] : runs) {
            // Same config and output path for both runs (the metadata echoes
            // the output directory); only the worker count varies.
            const fs::path dir = work / (sub + "_out");
            const std::string base = sub + " --config " + cfg_path.string() + extra +
                                     " --out " + dir.string();
            fs::remove_all(dir);
            if (run_cli(cli_path, base + " --threads 1") != 0) {
                pass = false;
                detail << sub << " run failed; ";
                continue;
            }
            const auto first = read_dir_bytes(dir);
            fs::remove_all(dir);
            if (run_cli(cli_path, base + " --threads 2") != 0) {
                pass = false;
                detail << sub << " rerun failed; ";
                continue;
            }
            if (first.empty() || first != read_dir_bytes(dir)) {
                pass = false;
                detail << sub << " outputs differ; ";
            }
        }

        // verify subcommand: quick profile, rerun with a different worker
        // count must reproduce the report bytes and the exit code.
        {
            const fs::path dir = work / "verify_out";
            const std::string base =
                "verify --config " + cfg_path.string() + " --out " + dir.string();
            fs::remove_all(dir);
            const int rc1 = run_cli(cli_path, base + " --threads 1");
            const auto first = read_dir_bytes(dir);
            fs::remove_all(dir);
            const int rc2 = run_cli(cli_path, base + " --threads 2");
            if (rc1 != 0 || rc2 != 0) {
                pass = false;
                detail << "verify quick must exit 0 on a clean build; ";
            }
            if (first.empty() || first != read_dir_bytes(dir)) {
                pass = false;
                detail << "verify reports missing or differ; ";
            }
        }

        if (pass) detail << "all subcommands byte-identical across reruns and worker counts";
        return detail.str();
    });

    int failures = 0;
    for (const auto& r : g_results) failures += r.pass ? 0 : 1;
    std::printf("ACCEPTANCE: %zu/%zu criteria passed\n", g_results.size() - failures,
                g_results.size());
    return failures == 0 ? 0 : 1;
}
