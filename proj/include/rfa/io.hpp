#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rfa/error.hpp"
#include "rfa/panel.hpp"

namespace rfa {

using Json = nlohmann::ordered_json;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::Io, "cannot parse number '" + std::string(s) + "'");
  return v;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

// Lines starting with '#' carry run metadata and are skipped by the readers.
inline bool skip_line(const std::string& line) { return blank(line) || line.front() == '#'; }

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return in;
}

}  // namespace detail

struct LabeledPanel {
  PanelData panel;
  std::vector<std::string> ids;
};

/// Header `id,t1,...,tT`, one row per variable, empty cell = missing.
inline LabeledPanel read_panel_csv(std::istream& in) {
  std::string line;
  std::size_t T = 0;
  bool header = false;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (detail::skip_line(line)) continue;
    const auto cells = detail::split_csv(line);
    if (!header) {
      if (cells.size() < 2) throw Error(ErrorKind::Io, "panel header needs an id column and at least one period");
      T = cells.size() - 1;
      header = true;
      continue;
    }
    if (cells.size() != T + 1)
      throw Error(ErrorKind::Io, "row " + std::to_string(rows.size() + 1) + " has " + std::to_string(cells.size()) +
                                     " cells, expected " + std::to_string(T + 1));
    ids.emplace_back(cells[0]);
    std::vector<double> row(T);
    for (std::size_t t = 0; t < T; ++t)
      row[t] = detail::blank(cells[t + 1]) ? std::numeric_limits<double>::quiet_NaN() : parse_double(cells[t + 1]);
    rows.push_back(std::move(row));
  }
  if (!header || rows.empty()) throw Error(ErrorKind::Io, "panel CSV has no data rows");
  Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(T));
  Mask mask(values.rows(), values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index t = 0; t < values.cols(); ++t) {
      values(i, t) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
      mask(i, t) = !std::isnan(values(i, t));
    }
  return {PanelData(std::move(values), std::move(mask)), std::move(ids)};
}

inline LabeledPanel read_panel_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_panel_csv(in);
}

/// Writes the panel CSV; ids default to v1..vp.
inline void write_panel_csv(std::ostream& out, const PanelData& panel, const std::vector<std::string>& ids = {}) {
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != panel.p())
    throw Error(ErrorKind::InvalidParameter, "one id per variable required");
  out << "id";
  for (Eigen::Index t = 0; t < panel.T(); ++t) out << ",t" << (t + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < panel.p(); ++i) {
    out << (ids.empty() ? "v" + std::to_string(i + 1) : ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index t = 0; t < panel.T(); ++t) {
      out << ',';
      if (panel.observed(i, t)) out << format_double(panel.values()(i, t));
    }
    out << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream& in) {
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (detail::skip_line(line)) continue;
    std::vector<double> row;
    for (auto cell : detail::split_csv(line)) row.push_back(parse_double(cell));
    if (!rows.empty() && row.size() != rows.front().size()) throw Error(ErrorKind::Io, "ragged matrix CSV");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Io, "matrix CSV is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix_csv(in);
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

/// Row-major nested arrays.
inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) throw Error(ErrorKind::Io, "expected a nonempty array of rows");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols()) throw Error(ErrorKind::Io, "ragged matrix");
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json fit_to_json(const FactorFit& fit) {
  const auto abs = fit.residuals.cwiseAbs();
  Json j;
  j["loadings"] = matrix_to_json(fit.loadings);
  j["scores"] = matrix_to_json(fit.scores);
  j["residual_summary"] = {{"max_abs", abs.size() ? abs.maxCoeff() : 0.0},
                           {"mean_abs", abs.size() ? abs.mean() : 0.0},
                           {"frobenius", fit.residuals.norm()}};
  j["loss"] = fit.loss;
  j["iterations"] = fit.iterations;
  j["tau"] = fit.tau;
  j["converged"] = fit.converged;
  return j;
}

/// Inverse of fit_to_json; residuals are not stored and come back empty.
inline FactorFit fit_from_json(const Json& j) {
  try {
    FactorFit fit;
    fit.loadings = matrix_from_json(j.at("loadings"));
    fit.scores = matrix_from_json(j.at("scores"));
    fit.loss = j.at("loss").get<double>();
    fit.iterations = j.at("iterations").get<int>();
    fit.tau = j.at("tau").get<double>();
    fit.converged = j.at("converged").get<bool>();
    return fit;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, std::string("malformed fit JSON: ") + e.what());
  }
}

}  // namespace rfa
