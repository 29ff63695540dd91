#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "nnbm/model.hpp"

namespace nnbm::io {

/// Shortest representation that parses back to the identical double.
std::string format_exact(double x);

/// Table formatting: 12 significant digits, '.' decimal, locale-independent.
std::string format_table(double x);

nlohmann::json model_to_json(const NnbmModel& model);
NnbmModel model_from_json(const nlohmann::json& j);

void save_model(const NnbmModel& model, const std::string& path,
                const nlohmann::json& meta);
NnbmModel load_model(const std::string& path);

/// Dataset TSV: one sample per row, exact round-trip numbers, no header.
/// A sidecar <path>.meta.json carries provenance.
void save_dataset(const Dataset& d, const std::string& path,
                  const nlohmann::json& extra_meta);
Dataset load_dataset(const std::string& path);

/// Named columns of equal length, header line, table formatting.
void save_columns_tsv(const std::string& path, const std::vector<std::string>& names,
                      const std::vector<Eigen::VectorXd>& columns);

/// Row-major matrix dump preceded by an "n <rows> <cols>" header line.
void save_matrix_tsv(const std::string& path, const Eigen::MatrixXd& m);

void save_json(const nlohmann::json& j, const std::string& path);
nlohmann::json load_json(const std::string& path);

}  // namespace nnbm::io
