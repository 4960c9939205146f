#ifndef OVB_CSV_H_
#define OVB_CSV_H_

// Dataset CSV schema shared by synthlab output and CLI input:
//   header: feature_0,...,feature_{d-1}[,label],domain
//   domain is "P" (source) or "Q" (target); an empty label cell means
//   unlabeled. Feature columns are any columns other than label/domain, kept
//   in file order.

#include <string>
#include <vector>

#include "ovb/dataset.h"

namespace ovb {

struct CsvTable {
  std::vector<std::string> feature_names;
  Matrix features;
  std::vector<double> labels;  // NaN where missing or no label column
  std::vector<char> domain;    // 'P' or 'Q'
  bool has_label_column = false;

  Index rows() const { return features.rows(); }
};

// Throws kData with a "path:line:" prefix on malformed content.
CsvTable read_csv_table(const std::string& path);

// Row-concatenates tables with identical feature headers.
CsvTable concat_tables(const std::vector<CsvTable>& parts);

void write_csv_table(const std::string& path, const CsvTable& table);

// Splits rows by domain. Every P row needs a label; target labels are kept
// only if every Q row has one.
ShiftDataset to_shift_dataset(const CsvTable& table, const LossFamily& family);

// Builds a table from separate source and target blocks (labels optional).
CsvTable make_table(const std::vector<std::string>& feature_names,
                    const Matrix& source_features,
                    const std::vector<double>& source_labels,
                    const Matrix& target_features,
                    const std::vector<double>& target_labels);

std::vector<std::string> default_feature_names(Index d);

}  // namespace ovb

#endif  // OVB_CSV_H_
