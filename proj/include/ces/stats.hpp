#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ces {

struct SignificanceLevel {
  double alpha;  // two-sided
  std::string_view mark;
};

// Strictest first.
inline constexpr std::array<SignificanceLevel, 4> kSignificanceLevels{{
    {0.05, "***"},
    {0.10, "**"},
    {0.15, "*"},
    {0.20, "^"},
}};

struct TTestResult {
  double mean_diff = 0.0;
  double sd_diff = 0.0;  // n-1 denominator
  double t = 0.0;
  std::size_t n = 0;
  std::size_t df = 0;
  double p_value = 1.0;  // two-sided
  std::string mark;      // strictest level cleared, empty if none
  std::string note;      // "no difference" / "degenerate: infinite t" for zero spread
};

// Two-sided critical value of Student's t. The df = 14 values (15 paired CV
// cells) are tabulated; other df are computed.
double critical_t(double alpha, std::size_t df);

// Mark of the strictest level whose critical value |t| exceeds.
std::string significance_mark(double t, std::size_t df);

// Paired t-test on d = a - b.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

nlohmann::json to_json(const TTestResult& r);

}  // namespace ces
