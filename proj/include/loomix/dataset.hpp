#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "loomix/errors.hpp"

namespace loomix {

/// Response vector y plus covariate matrix X; the unit of ingestion.
///
/// Invariants (checked at construction): n >= 1, p >= 1, rows(X) == len(y),
/// all entries finite.
class Dataset {
 public:
  Dataset(Eigen::VectorXd y, Eigen::MatrixXd X,
          std::vector<std::string> names = {})
      : y_(std::move(y)), X_(std::move(X)), names_(std::move(names)) {
    if (y_.size() < 1) throw DataError("Dataset: need at least one response");
    if (X_.cols() < 1) throw DataError("Dataset: need at least one covariate");
    if (X_.rows() != y_.size()) {
      throw DataError("Dataset: X has " + std::to_string(X_.rows()) +
                      " rows but y has " + std::to_string(y_.size()) +
                      " entries");
    }
    if (!y_.allFinite()) throw DataError("Dataset: non-finite response value");
    if (!X_.allFinite()) throw DataError("Dataset: non-finite covariate value");
    if (!names_.empty() && static_cast<Eigen::Index>(names_.size()) != X_.cols()) {
      throw DataError("Dataset: column name count does not match covariates");
    }
  }

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index p() const { return X_.cols(); }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const std::vector<std::string>& names() const { return names_; }

  bool binary_response() const {
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      if (y_[i] != 0.0 && y_[i] != 1.0) return false;
    }
    return true;
  }

  /// Center and scale columns to zero mean / unit variance (sd with n-1
  /// denominator). Constant columns are left untouched. When
  /// include_response is false (e.g. binary y) only covariates are scaled.
  Dataset standardized(bool include_response = true) const {
    Eigen::MatrixXd X = X_;
    Eigen::VectorXd y = y_;
    const double nn = static_cast<double>(n());
    if (nn < 2) return *this;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double mean = X.col(j).mean();
      const double sd =
          std::sqrt((X.col(j).array() - mean).square().sum() / (nn - 1.0));
      if (sd > 1e-300) X.col(j) = (X.col(j).array() - mean) / sd;
    }
    if (include_response) {
      const double mean = y.mean();
      const double sd =
          std::sqrt((y.array() - mean).square().sum() / (nn - 1.0));
      if (sd > 1e-300) y = (y.array() - mean) / sd;
    }
    return Dataset(std::move(y), std::move(X), names_);
  }

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd X_;
  std::vector<std::string> names_;
};

/// Copy with observation i removed.
inline Dataset drop_row(const Dataset& d, Eigen::Index drop) {
  const Eigen::Index n = d.n();
  if (drop < 0 || drop >= n) throw DataError("drop_row: index out of range");
  Eigen::VectorXd y(n - 1);
  Eigen::MatrixXd X(n - 1, d.p());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == drop) continue;
    y[r] = d.y()[i];
    X.row(r) = d.X().row(i);
    ++r;
  }
  return Dataset(std::move(y), std::move(X), d.names());
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string()
                                         : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, int line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("CSV line " + std::to_string(line_no) +
                    ": cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// Read the CSV dataset format: header row, first column named `y` is the
/// response, remaining columns are covariates. '.' decimal separator.
inline Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.substr(0, 3) == "\xEF\xBB\xBF") line = line.substr(3);
  const auto header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "y") {
    throw DataError(path + " line 1: first column must be named 'y'");
  }
  const std::size_t ncol = header.size();
  if (ncol < 2) throw DataError(path + " line 1: no covariate columns");

  std::vector<double> ys;
  std::vector<double> xs;  // row-major
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != ncol) {
      throw DataError(path + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(ncol) + " fields, got " +
                      std::to_string(fields.size()));
    }
    ys.push_back(detail::parse_number(fields[0], line_no));
    for (std::size_t j = 1; j < ncol; ++j) {
      xs.push_back(detail::parse_number(fields[j], line_no));
    }
  }
  if (ys.empty()) throw DataError(path + ": no data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(ys.size());
  const Eigen::Index p = static_cast<Eigen::Index>(ncol - 1);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = ys[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) {
      X(i, j) = xs[static_cast<std::size_t>(i * p + j)];
    }
  }
  return Dataset(std::move(y), std::move(X),
                 std::vector<std::string>(header.begin() + 1, header.end()));
}

inline void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "y";
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    if (!data.names().empty()) {
      out << ',' << data.names()[static_cast<std::size_t>(j)];
    } else {
      out << ",x" << (j + 1);
    }
  }
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data.y()[i]);
    out << buf;
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.X()(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace loomix
