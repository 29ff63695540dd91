#include "nnbm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace nnbm::io {

using nlohmann::json;

std::string format_exact(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string format_table(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

json model_to_json(const NnbmModel& model) {
  json j;
  j["n"] = model.n();
  json edges = json::array();
  for (const auto& [a, b] : model.topology.edges()) edges.push_back({a + 1, b + 1});
  j["edges"] = std::move(edges);
  j["b"] = std::vector<double>(model.b.begin(), model.b.end());
  j["w_diag"] = std::vector<double>(model.w_diag.begin(), model.w_diag.end());
  j["w_edge"] = std::vector<double>(model.w_edge.begin(), model.w_edge.end());
  j["meta"] = json::object();
  return j;
}

NnbmModel model_from_json(const json& j) {
  const int n = j.at("n").get<int>();
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw DomainError("model file: malformed edge");
    edges.push_back({e[0].get<int>() - 1, e[1].get<int>() - 1});
  }
  NnbmModel model;
  model.topology = Topology(n, std::move(edges));
  const auto b = j.at("b").get<std::vector<double>>();
  const auto wd = j.at("w_diag").get<std::vector<double>>();
  const auto we = j.at("w_edge").get<std::vector<double>>();
  if (static_cast<int>(b.size()) != n || static_cast<int>(wd.size()) != n ||
      static_cast<int>(we.size()) != model.topology.edge_count()) {
    throw DomainError("model file: array lengths do not match topology");
  }
  model.b = Eigen::Map<const Eigen::VectorXd>(b.data(), n);
  model.w_diag = Eigen::Map<const Eigen::VectorXd>(wd.data(), n);
  model.w_edge = Eigen::Map<const Eigen::VectorXd>(we.data(), we.size());
  return model;
}

void save_model(const NnbmModel& model, const std::string& path, const json& meta) {
  json j = model_to_json(model);
  if (!meta.is_null()) j["meta"] = meta;
  save_json(j, path);
}

NnbmModel load_model(const std::string& path) { return model_from_json(load_json(path)); }

void save_dataset(const Dataset& d, const std::string& path, const json& extra_meta) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path);
  for (int i = 0; i < d.size(); ++i) {
    for (int c = 0; c < d.width(); ++c) {
      if (c) out << '\t';
      out << format_exact(d.samples(i, c));
    }
    out << '\n';
  }
  json meta;
  meta["n"] = d.width();
  meta["N"] = d.size();
  meta["provenance"] = {{"source", d.provenance.source},
                        {"seed", d.provenance.seed},
                        {"burn_in", d.provenance.burn_in},
                        {"thin", d.provenance.thin},
                        {"rng_algorithm", d.provenance.rng_algorithm}};
  if (!extra_meta.is_null()) meta["run"] = extra_meta;
  save_json(meta, path + ".meta.json");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      double x;
      auto res = std::from_chars(p, end, x);
      if (res.ec != std::errc()) throw DomainError("dataset file: bad number in " + path);
      row.push_back(x);
      p = res.ptr;
      if (p < end && *p == '\t') ++p;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DomainError("dataset file: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DomainError("dataset file: empty " + path);
  Dataset d;
  d.samples.resize(rows.size(), rows.front().size());
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    for (int c = 0; c < static_cast<int>(rows.front().size()); ++c)
      d.samples(i, c) = rows[i][c];
  d.provenance.source = path;
  std::ifstream side(path + ".meta.json");
  if (side) {
    json meta = json::parse(side);
    if (meta.contains("provenance")) {
      const auto& p = meta["provenance"];
      d.provenance.source = p.value("source", path);
      d.provenance.seed = p.value("seed", std::uint64_t{0});
      d.provenance.burn_in = p.value("burn_in", 0);
      d.provenance.thin = p.value("thin", 1);
      d.provenance.rng_algorithm = p.value("rng_algorithm", "");
    }
  }
  if ((d.samples.array() < 0.0).any()) throw DomainError("dataset file: negative entry");
  return d;
}

void save_columns_tsv(const std::string& path, const std::vector<std::string>& names,
                      const std::vector<Eigen::VectorXd>& columns) {
  if (names.size() != columns.size()) throw DomainError("save_columns_tsv: name/column mismatch");
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path);
  for (size_t c = 0; c < names.size(); ++c) out << (c ? "\t" : "") << names[c];
  out << '\n';
  const Eigen::Index rows = columns.empty() ? 0 : columns.front().size();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (size_t c = 0; c < columns.size(); ++c)
      out << (c ? "\t" : "") << format_table(columns[c][r]);
    out << '\n';
  }
}

void save_matrix_tsv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path);
  out << "n\t" << m.rows() << '\t' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "\t" : "") << format_table(m(i, j));
    out << '\n';
  }
}

void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path);
  out << j.dump(2) << '\n';
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError("bad JSON in " + path + ": " + e.what());
  }
}

}  // namespace nnbm::io
