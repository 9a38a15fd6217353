#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>

#include "spdescore/forward.hpp"

namespace spdescore {

/// Shortest representation that round-trips the double (%.17g).
std::string format_full(double v);

/// CSV with the given header; every numeric cell printed with format_full.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& m);

/// sample_id,mode_1..mode_N rows of the terminal states.
void write_ensemble_csv(const std::filesystem::path& path, const Ensemble& ensemble);

/// Headerless numeric CSV (used for dense covariance matrices supplied by path).
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Create the directory if needed and verify it is writable.
void ensure_output_dir(const std::filesystem::path& dir);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);

}  // namespace spdescore
