#ifndef OVB_NUMERIC_H_
#define OVB_NUMERIC_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ovb {

// Pairwise (cascade) summation. The result depends only on the input order,
// not on how callers batch the work.
double pairwise_sum(std::span<const double> values);

// Arithmetic mean via pairwise_sum. Throws kInvalidArgument on empty input.
double mean(std::span<const double> values);

// Mean of values[idx[k]] over k, gathered then pairwise-summed.
double gathered_mean(std::span<const double> values,
                     std::span<const std::size_t> idx);

// Linear-interpolation sample quantile (Hyndman-Fan type 7). `sorted` must be
// ascending and non-empty; q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Pearson correlation; returns NaN when either input has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// Average-rank Spearman correlation (ties share their mean rank).
double spearman(std::span<const double> a, std::span<const double> b);

// SplitMix64 finalizer, used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Deterministic engine for (seed, stream).
inline std::mt19937_64 make_engine(std::uint64_t seed,
                                   std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(seed, stream));
}

// 64-bit FNV-1a over raw bytes, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

// Digest of a file's bytes; throws kData if unreadable.
std::string file_digest(const std::string& path);

// Shortest-roundtrip-safe textual form ("%.17g"), stable across runs.
std::string format_double(double v);

}  // namespace ovb

#endif  // OVB_NUMERIC_H_
