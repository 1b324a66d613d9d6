#ifndef MRD_IO_HPP
#define MRD_IO_HPP

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>

#include "mrd/procedures.hpp"

namespace mrd {

// Observation vector read from a data file: one value per line, optionally
// preceded by a header line "s2=<v>,nu=<n>".
struct DataFile {
  Eigen::VectorXd x;
  std::optional<VarianceEstimate> variance;
};

/// Throws ValidationError naming the line number of a malformed cell.
DataFile parse_data_csv(std::istream& in, const std::string& source = "data");
DataFile read_data_csv(const std::string& path);

/// Row-major, comma separated, '.' decimal separator.
Eigen::MatrixXd parse_matrix_csv(std::istream& in, const std::string& source = "matrix");
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& m);

/// index,statistic,threshold,rejected,rank with 1-based index and rank
/// (rank is the position in the rejection order, empty when accepted).
void write_decision_csv(std::ostream& out, const DecisionVector& decision);

}  // namespace mrd

#endif  // MRD_IO_HPP
