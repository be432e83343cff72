// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "sbc.hpp"

namespace gpsbc {

/// Write via a temporary file in the same directory, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(const std::string& data);

/// CSV with header test_point_index,output_index,rank,count; one row per bin.
std::string tally_csv(const RankTally& tally);

struct HistogramAnnotations {
  std::string title;
  std::vector<std::string> lines;  // rendered under the title, in order
};

/// Central (1 - 2 tail) interval of Binomial(trials, prob): {lower, upper} counts.
std::pair<std::int64_t, std::int64_t> binomial_interval(std::int64_t trials, double prob, double tail);

/*!
 * Deterministic SVG bar chart of `counts`: one bar per bin, a horizontal line
 * at the expected uniform count, and a shaded per-bin 99% band for that count.
 * Coordinates use six decimals and attributes are emitted in sorted order.
 */
std::string render_histogram(CountView counts, const HistogramAnnotations& annotations);

/// Two histograms side by side in one SVG document.
std::string render_side_by_side(CountView left, const HistogramAnnotations& left_notes, CountView right,
                                const HistogramAnnotations& right_notes);

}  // namespace gpsbc
