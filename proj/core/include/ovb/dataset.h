#ifndef OVB_DATASET_H_
#define OVB_DATASET_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ovb/glm.h"

namespace ovb {

// Row-major so a sample's natural parameter or label is a contiguous span.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using RowIndices = std::vector<std::size_t>;

inline std::span<const double> row_span(const Matrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}
inline std::span<double> row_span(Matrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}
inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Vector select_rows(const Vector& v, std::span<const std::size_t> rows);
Matrix select_cols(const Matrix& m, std::span<const int> cols);

// Labeled source sample and (optionally labeled) target sample over a shared
// feature space. Labels are stored in label space: one column for
// regression/binary, K one-hot columns for multiclass.
struct ShiftDataset {
  Matrix source_features;
  Matrix source_labels;
  Matrix target_features;
  std::optional<Matrix> target_labels;  // evaluation only
  std::vector<std::string> feature_names;

  Index n() const { return source_features.rows(); }
  Index m() const { return target_features.rows(); }
  Index d() const { return source_features.cols(); }
  bool has_target_labels() const { return target_labels.has_value(); }

  // Throws kData/kShape when invariants fail: equal d on both sides,
  // n, m >= 2, finite entries, label shape and conventions for `family`.
  void validate(const LossFamily& family) const;
};

// Maps raw label values (class indices for multiclass) to label-space rows.
Matrix encode_labels(const LossFamily& family, std::span<const double> raw);

// Per-row nll of eta against labels (both in label space, equal rows).
std::vector<double> row_losses(const LossFamily& family, const Matrix& eta,
                               const Matrix& labels);

}  // namespace ovb

#endif  // OVB_DATASET_H_
