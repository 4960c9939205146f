#include "ovb/dataset.h"

#include <cmath>

#include "ovb/error.h"

namespace ovb {

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Index>(k)) = m.row(static_cast<Index>(rows[k]));
  }
  return out;
}

Vector select_rows(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out[static_cast<Index>(k)] = v[static_cast<Index>(rows[k])];
  }
  return out;
}

Matrix select_cols(const Matrix& m, std::span<const int> cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    require(cols[k] >= 0 && cols[k] < m.cols(), ErrorKind::kShape,
            "column index out of range");
    out.col(static_cast<Index>(k)) = m.col(cols[k]);
  }
  return out;
}

void ShiftDataset::validate(const LossFamily& family) const {
  require(source_features.cols() == target_features.cols(), ErrorKind::kShape,
          "source and target feature dimensions differ");
  require(n() >= 2, ErrorKind::kData, "need at least 2 source rows");
  require(m() >= 2, ErrorKind::kData, "need at least 2 target rows");
  require(source_features.allFinite() && target_features.allFinite(),
          ErrorKind::kData, "non-finite feature value");
  require(source_labels.rows() == n(), ErrorKind::kShape,
          "source label count differs from source row count");
  require(source_labels.cols() == family.width(), ErrorKind::kShape,
          "source label width does not match the task family");
  for (Index i = 0; i < n(); ++i) {
    validate_label(family, row_span(source_labels, i));
  }
  if (target_labels) {
    require(target_labels->rows() == m(), ErrorKind::kShape,
            "target label count differs from target row count");
    require(target_labels->cols() == family.width(), ErrorKind::kShape,
            "target label width does not match the task family");
    for (Index j = 0; j < m(); ++j) {
      validate_label(family, row_span(*target_labels, j));
    }
  }
}

Matrix encode_labels(const LossFamily& family, std::span<const double> raw) {
  const auto n = static_cast<Index>(raw.size());
  switch (family.task()) {
    case Task::kRegression:
    case Task::kBinary: {
      Matrix out(n, 1);
      for (Index i = 0; i < n; ++i) out(i, 0) = raw[i];
      return out;
    }
    case Task::kMulticlass: {
      Matrix out = Matrix::Zero(n, family.classes());
      for (Index i = 0; i < n; ++i) {
        const double v = raw[i];
        require(v == std::floor(v) && v >= 0 && v < family.classes(),
                ErrorKind::kData,
                "multiclass label must be a class index in [0, K)");
        out(i, static_cast<Index>(v)) = 1.0;
      }
      return out;
    }
    case Task::kSeqGen:
      break;
  }
  fail(ErrorKind::kInvalidArgument,
       "seqgen labels cannot be encoded from scalar values");
}

std::vector<double> row_losses(const LossFamily& family, const Matrix& eta,
                               const Matrix& labels) {
  require(eta.rows() == labels.rows(), ErrorKind::kShape,
          "row_losses: row count mismatch");
  std::vector<double> out(static_cast<std::size_t>(eta.rows()));
  for (Index i = 0; i < eta.rows(); ++i) {
    out[i] = nll(family, row_span(eta, i), row_span(labels, i));
  }
  return out;
}

}  // namespace ovb
