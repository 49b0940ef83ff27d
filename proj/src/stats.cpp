#include "ces/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace ces {
namespace {

constexpr std::array<double, 4> kCriticalDf14{2.1447866879169273, 1.7613101357748562, 1.5230950609257863,
                                              1.345030374454649};

}  // namespace

double critical_t(double alpha, std::size_t df) {
  if (df == 0) throw std::invalid_argument("critical_t: df must be positive");
  if (df == 14) {
    for (std::size_t k = 0; k < kSignificanceLevels.size(); ++k) {
      if (kSignificanceLevels[k].alpha == alpha) return kCriticalDf14[k];
    }
  }
  const boost::math::students_t dist(static_cast<double>(df));
  return boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
}

std::string significance_mark(double t, std::size_t df) {
  const double magnitude = std::abs(t);
  for (const auto& level : kSignificanceLevels) {
    if (magnitude > critical_t(level.alpha, df)) return std::string(level.mark);
  }
  return {};
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired_ttest: need at least two pairs");
  TTestResult r;
  r.n = a.size();
  r.df = r.n - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) sum += a[i] - b[i];
  r.mean_diff = sum / static_cast<double>(r.n);
  double ss = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double dev = a[i] - b[i] - r.mean_diff;
    ss += dev * dev;
  }
  r.sd_diff = std::sqrt(ss / static_cast<double>(r.df));
  if (r.sd_diff == 0.0) {
    if (r.mean_diff == 0.0) {
      r.note = "no difference";
      return r;
    }
    r.note = "degenerate: infinite t";
    r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    r.p_value = 0.0;
    r.mark = std::string(kSignificanceLevels.front().mark);
    return r;
  }
  r.t = r.mean_diff / (r.sd_diff / std::sqrt(static_cast<double>(r.n)));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.mark = significance_mark(r.t, r.df);
  return r;
}

nlohmann::json to_json(const TTestResult& r) {
  nlohmann::json j = {{"mean_diff", r.mean_diff}, {"sd_diff", r.sd_diff}, {"n", r.n},
                      {"df", r.df},               {"p_value", r.p_value}, {"mark", r.mark}};
  j["t"] = std::isfinite(r.t) ? nlohmann::json(r.t) : nlohmann::json(r.t > 0 ? "inf" : "-inf");
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

}  // namespace ces
