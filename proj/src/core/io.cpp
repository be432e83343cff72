// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "error.hpp"

namespace gpsbc {
namespace {

constexpr double kPanelWidth = 640.0;
constexpr double kPanelHeight = 400.0;
constexpr double kMarginLeft = 50.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 60.0;
constexpr double kMarginBottom = 40.0;

std::string fixed6(double v) {
  if (v == 0.0) v = 0.0;  // no "-0.000000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

/// Element with attributes emitted in sorted key order.
std::string element(const std::string& name, const std::map<std::string, std::string>& attrs, const std::string& body = {},
                    bool self_close = true) {
  std::string out = "<" + name;
  for (const auto& [k, v] : attrs) out += " " + k + "=\"" + escape_xml(v) + "\"";
  if (self_close && body.empty()) return out + "/>\n";
  return out + ">" + body + "</" + name + ">\n";
}

double log_binomial_pmf(std::int64_t n, std::int64_t k, double p) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0) + static_cast<double>(k) * std::log(p) +
         static_cast<double>(n - k) * std::log1p(-p);
}

/// Panel body positioned at horizontal offset `x0`.
std::string panel(CountView counts, const HistogramAnnotations& notes, double x0) {
  const auto bins = static_cast<std::int64_t>(counts.size());
  const std::int64_t total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  const double expected = bins > 0 ? static_cast<double>(total) / static_cast<double>(bins) : 0.0;
  const auto [band_lo, band_hi] = binomial_interval(total, bins > 0 ? 1.0 / static_cast<double>(bins) : 1.0, 0.005);
  const std::int64_t max_count = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  const double top = std::max({static_cast<double>(max_count), static_cast<double>(band_hi), expected, 1.0}) * 1.05;

  const double plot_w = kPanelWidth - kMarginLeft - kMarginRight;
  const double plot_h = kPanelHeight - kMarginTop - kMarginBottom;
  const double left = x0 + kMarginLeft;
  const double base = kMarginTop + plot_h;
  const double bar_w = bins > 0 ? plot_w / static_cast<double>(bins) : plot_w;
  auto y_of = [&](double c) { return base - plot_h * c / top; };

  std::string out;
  out += element("rect", {{"fill", "#ffffff"}, {"height", fixed6(kPanelHeight)}, {"width", fixed6(kPanelWidth)},
                          {"x", fixed6(x0)}, {"y", fixed6(0.0)}});
  out += element("text", {{"font-family", "sans-serif"}, {"font-size", "14"}, {"x", fixed6(left)}, {"y", fixed6(18.0)}},
                 escape_xml(notes.title), false);
  for (std::size_t k = 0; k < notes.lines.size(); ++k) {
    out += element("text",
                   {{"font-family", "sans-serif"}, {"font-size", "11"}, {"x", fixed6(left)},
                    {"y", fixed6(34.0 + 13.0 * static_cast<double>(k))}},
                   escape_xml(notes.lines[k]), false);
  }
  for (std::int64_t b = 0; b < bins; ++b) {
    const double x = left + bar_w * static_cast<double>(b);
    out += element("rect", {{"class", "band"},
                            {"fill", "#999999"},
                            {"fill-opacity", "0.3"},
                            {"height", fixed6(y_of(static_cast<double>(band_lo)) - y_of(static_cast<double>(band_hi)))},
                            {"width", fixed6(bar_w)},
                            {"x", fixed6(x)},
                            {"y", fixed6(y_of(static_cast<double>(band_hi)))}});
  }
  for (std::int64_t b = 0; b < bins; ++b) {
    const double x = left + bar_w * static_cast<double>(b);
    const double c = static_cast<double>(counts[static_cast<std::size_t>(b)]);
    out += element("rect", {{"class", "bar"},
                            {"fill", "#3b6ea8"},
                            {"height", fixed6(base - y_of(c))},
                            {"width", fixed6(bar_w * 0.9)},
                            {"x", fixed6(x + bar_w * 0.05)},
                            {"y", fixed6(y_of(c))}});
  }
  out += element("line", {{"class", "expected"},
                          {"stroke", "#c0392b"},
                          {"stroke-width", "1.5"},
                          {"x1", fixed6(left)},
                          {"x2", fixed6(left + plot_w)},
                          {"y1", fixed6(y_of(expected))},
                          {"y2", fixed6(y_of(expected))}});
  out += element("line", {{"stroke", "#000000"}, {"x1", fixed6(left)}, {"x2", fixed6(left + plot_w)}, {"y1", fixed6(base)},
                          {"y2", fixed6(base)}});
  out += element("text", {{"font-family", "sans-serif"}, {"font-size", "11"}, {"x", fixed6(left)}, {"y", fixed6(base + 16.0)}},
                 "rank", false);
  return out;
}

std::string document(double width, const std::string& body) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg height=\"" + fixed6(kPanelHeight) + "\" viewBox=\"0 0 " + fixed6(width) + " " + fixed6(kPanelHeight) +
         "\" width=\"" + fixed6(width) + "\" xmlns=\"http://www.w3.org/2000/svg\">\n";
  out += body;
  out += "</svg>\n";
  return out;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += kHex[digest[k] >> 4];
    out += kHex[digest[k] & 0xF];
  }
  return out;
}

std::string tally_csv(const RankTally& tally) {
  std::string out = "test_point_index,output_index,rank,count\n";
  for (Eigen::Index j = 0; j < tally.num_test(); ++j) {
    for (Eigen::Index i = 0; i < tally.num_outputs(); ++i) {
      const auto s = tally.slice(j, i);
      for (std::size_t r = 0; r < s.size(); ++r) {
        out += std::to_string(j) + "," + std::to_string(i) + "," + std::to_string(r) + "," + std::to_string(s[r]) + "\n";
      }
    }
  }
  return out;
}

std::pair<std::int64_t, std::int64_t> binomial_interval(std::int64_t trials, double prob, double tail) {
  if (trials <= 0) return {0, 0};
  if (prob >= 1.0) return {trials, trials};
  std::int64_t lower = -1;
  std::int64_t upper = trials;
  double cdf = 0.0;
  for (std::int64_t k = 0; k <= trials; ++k) {
    cdf += std::exp(log_binomial_pmf(trials, k, prob));
    if (lower < 0 && cdf >= tail) lower = k;
    if (cdf >= 1.0 - tail) {
      upper = k;
      break;
    }
  }
  return {std::max<std::int64_t>(lower, 0), upper};
}

std::string render_histogram(CountView counts, const HistogramAnnotations& annotations) {
  return document(kPanelWidth, panel(counts, annotations, 0.0));
}

std::string render_side_by_side(CountView left, const HistogramAnnotations& left_notes, CountView right,
                                const HistogramAnnotations& right_notes) {
  return document(2.0 * kPanelWidth, panel(left, left_notes, 0.0) + panel(right, right_notes, kPanelWidth));
}

}  // namespace gpsbc
