#include "legsafe/qp/qp.hpp"

#include <istream>
#include <ostream>
#include <string>

namespace legsafe::qp {

namespace {

constexpr const char* kHeader = "# legsafe qp-problem v1";

void write_matrix(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& expected) {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> name >> rows >> cols) || name != expected || rows < 0 || cols < 0) {
    throw QpInputError("malformed qp dump: expected block '" + expected + "'");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(in >> m(i, j))) throw QpInputError("malformed qp dump: short block '" + expected + "'");
    }
  }
  return m;
}

}  // namespace

void write_problem(std::ostream& out, const QpProblem& problem) {
  const auto old_precision = out.precision(17);
  out << kHeader << '\n';
  write_matrix(out, "P", problem.P);
  write_matrix(out, "c", problem.c);
  write_matrix(out, "A_eq", problem.A_eq);
  write_matrix(out, "b_eq", problem.b_eq);
  write_matrix(out, "G", problem.G);
  write_matrix(out, "h_ub", problem.h_ub);
  out.precision(old_precision);
}

QpProblem read_problem(std::istream& in) {
  std::string header;
  std::getline(in, header);
  if (header != kHeader) throw QpInputError("not a qp-problem v1 dump");
  QpProblem p;
  p.P = read_matrix(in, "P");
  p.c = read_matrix(in, "c");
  p.A_eq = read_matrix(in, "A_eq");
  p.b_eq = read_matrix(in, "b_eq");
  p.G = read_matrix(in, "G");
  p.h_ub = read_matrix(in, "h_ub");
  return p;
}

}  // namespace legsafe::qp
