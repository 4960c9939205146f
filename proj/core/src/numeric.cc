#include "ovb/numeric.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>

#include "ovb/error.h"

namespace ovb {
namespace {

constexpr std::size_t kPairwiseBlock = 64;

double pairwise_sum_impl(const double* p, std::size_t n) {
  if (n <= kPairwiseBlock) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(p, half) + pairwise_sum_impl(p + half, n - half);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double mean(std::span<const double> values) {
  require(!values.empty(), ErrorKind::kInvalidArgument,
          "mean of an empty sequence");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double gathered_mean(std::span<const double> values,
                     std::span<const std::size_t> idx) {
  require(!idx.empty(), ErrorKind::kInvalidArgument,
          "mean of an empty sequence");
  std::vector<double> buf(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) buf[k] = values[idx[k]];
  return pairwise_sum(buf) / static_cast<double>(buf.size());
}

double quantile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), ErrorKind::kInvalidArgument,
          "quantile of an empty sequence");
  require(q >= 0.0 && q <= 1.0, ErrorKind::kInvalidArgument,
          "quantile level outside [0, 1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::kShape,
          "pearson: need two equal-length sequences of size >= 2");
  const double ma = mean(a);
  const double mb = mean(b);
  std::vector<double> saa(a.size()), sbb(a.size()), sab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa[i] = da * da;
    sbb[i] = db * db;
    sab[i] = da * db;
  }
  const double va = pairwise_sum(saa);
  const double vb = pairwise_sum(sbb);
  if (va <= 0.0 || vb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return pairwise_sum(sab) / std::sqrt(va * vb);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kShape,
          "spearman: length mismatch");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kData,
          "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ovb
