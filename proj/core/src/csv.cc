#include "ovb/csv.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ovb/error.h"
#include "ovb/numeric.h"

namespace ovb {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

std::vector<std::string> default_feature_names(Index d) {
  std::vector<std::string> names;
  for (Index j = 0; j < d; ++j) names.push_back("feature_" + std::to_string(j));
  return names;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kData,
          "cannot open data file: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kData,
          path + ":1: empty file");
  const auto header = split_line(line);
  int label_col = -1;
  int domain_col = -1;
  std::vector<int> feature_cols;
  CsvTable table;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[c] == "label") {
      label_col = c;
    } else if (header[c] == "domain") {
      domain_col = c;
    } else {
      require(!header[c].empty(), ErrorKind::kData,
              path + ":1: empty column name");
      feature_cols.push_back(c);
      table.feature_names.push_back(header[c]);
    }
  }
  require(domain_col >= 0, ErrorKind::kData,
          path + ":1: missing required 'domain' column");
  require(!feature_cols.empty(), ErrorKind::kData,
          path + ":1: no feature columns");
  table.has_label_column = label_col >= 0;

  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    require(cells.size() == header.size(), ErrorKind::kData,
            where + "expected " + std::to_string(header.size()) +
                " cells, got " + std::to_string(cells.size()));
    for (int c : feature_cols) {
      double v = 0.0;
      require(parse_double(cells[c], &v) && std::isfinite(v), ErrorKind::kData,
              where + "bad numeric value '" + cells[c] + "' in column '" +
                  header[c] + "'");
      values.push_back(v);
    }
    double label = std::numeric_limits<double>::quiet_NaN();
    if (label_col >= 0 && !cells[label_col].empty()) {
      require(parse_double(cells[label_col], &label) && std::isfinite(label),
              ErrorKind::kData, where + "bad label '" + cells[label_col] + "'");
    }
    table.labels.push_back(label);
    const std::string& dom = cells[domain_col];
    require(dom == "P" || dom == "Q", ErrorKind::kData,
            where + "domain must be P or Q, got '" + dom + "'");
    table.domain.push_back(dom[0]);
  }
  const auto rows = static_cast<Index>(table.domain.size());
  const auto d = static_cast<Index>(feature_cols.size());
  table.features = Matrix(rows, d);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < d; ++j) table.features(i, j) = values[i * d + j];
  }
  return table;
}

CsvTable concat_tables(const std::vector<CsvTable>& parts) {
  require(!parts.empty(), ErrorKind::kInvalidArgument, "no data files given");
  CsvTable out;
  out.feature_names = parts.front().feature_names;
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.feature_names == out.feature_names, ErrorKind::kData,
            "data files have different feature columns");
    rows += p.rows();
    out.has_label_column = out.has_label_column || p.has_label_column;
  }
  out.features = Matrix(rows, static_cast<Index>(out.feature_names.size()));
  Index at = 0;
  for (const auto& p : parts) {
    out.features.middleRows(at, p.rows()) = p.features;
    at += p.rows();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.domain.insert(out.domain.end(), p.domain.begin(), p.domain.end());
  }
  return out;
}

void write_csv_table(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kData,
          "cannot write data file: " + path);
  for (const auto& name : table.feature_names) out << name << ',';
  if (table.has_label_column) out << "label,";
  out << "domain\n";
  for (Index i = 0; i < table.rows(); ++i) {
    for (Index j = 0; j < table.features.cols(); ++j) {
      out << format_double(table.features(i, j)) << ',';
    }
    if (table.has_label_column) {
      if (!std::isnan(table.labels[i])) out << format_double(table.labels[i]);
      out << ',';
    }
    out << table.domain[i] << '\n';
  }
}

ShiftDataset to_shift_dataset(const CsvTable& table, const LossFamily& family) {
  require(table.has_label_column, ErrorKind::kData,
          "data has no 'label' column; source labels are required");
  RowIndices src, tgt;
  for (std::size_t i = 0; i < table.domain.size(); ++i) {
    (table.domain[i] == 'P' ? src : tgt).push_back(i);
  }
  require(src.size() >= 2, ErrorKind::kData, "need at least 2 source (P) rows");
  require(tgt.size() >= 2, ErrorKind::kData, "need at least 2 target (Q) rows");
  ShiftDataset ds;
  ds.feature_names = table.feature_names;
  ds.source_features = select_rows(table.features, src);
  ds.target_features = select_rows(table.features, tgt);
  std::vector<double> src_labels;
  for (auto i : src) {
    require(!std::isnan(table.labels[i]), ErrorKind::kData,
            "source row " + std::to_string(i) + " has no label");
    src_labels.push_back(table.labels[i]);
  }
  ds.source_labels = encode_labels(family, src_labels);
  bool all_target = true;
  std::vector<double> tgt_labels;
  for (auto j : tgt) {
    if (std::isnan(table.labels[j])) {
      all_target = false;
      break;
    }
    tgt_labels.push_back(table.labels[j]);
  }
  if (all_target) ds.target_labels = encode_labels(family, tgt_labels);
  ds.validate(family);
  return ds;
}

CsvTable make_table(const std::vector<std::string>& feature_names,
                    const Matrix& source_features,
                    const std::vector<double>& source_labels,
                    const Matrix& target_features,
                    const std::vector<double>& target_labels) {
  CsvTable t;
  t.feature_names = feature_names;
  t.has_label_column = true;
  const Index n = source_features.rows();
  const Index m = target_features.rows();
  t.features = Matrix(n + m, source_features.cols());
  t.features.topRows(n) = source_features;
  t.features.bottomRows(m) = target_features;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index i = 0; i < n; ++i) {
    t.labels.push_back(i < static_cast<Index>(source_labels.size())
                           ? source_labels[i]
                           : nan);
    t.domain.push_back('P');
  }
  for (Index j = 0; j < m; ++j) {
    t.labels.push_back(j < static_cast<Index>(target_labels.size())
                           ? target_labels[j]
                           : nan);
    t.domain.push_back('Q');
  }
  return t;
}

}  // namespace ovb
