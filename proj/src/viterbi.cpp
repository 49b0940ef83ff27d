#include "ces/viterbi.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ces/error.hpp"

namespace ces {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxBruteForceLength = 10;

}  // namespace

TransitionModel TransitionModel::from_counts(const TransitionCounts& counts) {
  TransitionModel tm;
  tm.counts_ = counts;

  double start_total = 0.0;
  for (auto t : kAllTags) {
    if (start_allowed(t)) start_total += counts.start[tag_index(t)] + 1.0;
  }
  for (auto t : kAllTags) {
    const auto i = tag_index(t);
    tm.log_start_[i] = start_allowed(t) ? std::log((counts.start[i] + 1.0) / start_total) : kNegInf;
  }

  for (auto from : kAllTags) {
    const auto r = tag_index(from);
    double row_total = 0.0;
    for (auto to : kAllTags) {
      if (transition_allowed(from, to)) row_total += counts.bigram[r][tag_index(to)] + 1.0;
    }
    for (auto to : kAllTags) {
      const auto c = tag_index(to);
      tm.log_trans_[r][c] = transition_allowed(from, to) ? std::log((counts.bigram[r][c] + 1.0) / row_total) : kNegInf;
    }
  }
  return tm;
}

nlohmann::json TransitionModel::to_json() const {
  auto prob = [](double lp) { return std::isinf(lp) ? 0.0 : std::exp(lp); };
  nlohmann::json j;
  j["tags"] = nlohmann::json::array();
  for (auto t : kAllTags) j["tags"].push_back(std::string(to_string(t)));
  j["start"] = nlohmann::json::array();
  j["start_counts"] = counts_.start;
  j["transitions"] = nlohmann::json::array();
  j["transition_counts"] = nlohmann::json::array();
  for (std::size_t i = 0; i < kNumTags; ++i) {
    j["start"].push_back(prob(log_start_[i]));
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < kNumTags; ++k) row.push_back(prob(log_trans_[i][k]));
    j["transitions"].push_back(row);
    j["transition_counts"].push_back(counts_.bigram[i]);
  }
  return j;
}

TransitionModel TransitionModel::from_json(const nlohmann::json& j) {
  TransitionCounts c;
  try {
    c.start = j.at("start_counts").get<TagArray>();
    c.bigram = j.at("transition_counts").get<TagMatrix>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("transition model: ") + e.what());
  }
  return from_counts(c);
}

TransitionCounts count_transitions(std::span<const std::vector<LabelTag>> sequences) {
  TransitionCounts c;
  bool any = false;
  for (const auto& seq : sequences) {
    if (seq.empty()) continue;
    any = true;
    c.start[tag_index(seq.front())] += 1.0;
    for (std::size_t i = 1; i < seq.size(); ++i) c.bigram[tag_index(seq[i - 1])][tag_index(seq[i])] += 1.0;
  }
  if (!any) throw InputError("cannot estimate transitions from an empty corpus");
  return c;
}

TransitionModel estimate_transitions(std::span<const std::vector<LabelTag>> sequences) {
  return TransitionModel::from_counts(count_transitions(sequences));
}

double path_score(const Emissions& e, const TransitionModel& tm, std::span<const LabelTag> path) {
  if (path.size() != e.size()) throw std::invalid_argument("path_score: length mismatch");
  if (path.empty()) return 0.0;
  // Summed right to left, the association order of the decoder's recursion,
  // so equal-scoring paths compare equal in floating point too.
  const std::size_t n = path.size();
  double suffix = e[n - 1][tag_index(path[n - 1])];
  for (std::size_t i = n - 1; i-- > 0;) {
    suffix = e[i][tag_index(path[i])] + (tm.log_trans()[tag_index(path[i])][tag_index(path[i + 1])] + suffix);
  }
  return tm.log_start()[tag_index(path[0])] + suffix;
}

std::vector<LabelTag> viterbi_decode(const Emissions& e, const TransitionModel& tm) {
  const std::size_t n = e.size();
  if (n == 0) return {};
  // Suffix recursion: best[i][y] is the best score of positions i..n-1 given
  // tag y at i; next[i][y] the smallest successor tag attaining it. Decoding
  // then runs front to back, so every tie resolves to the smallest tag at the
  // earliest position.
  std::vector<TagArray> best(n);
  std::vector<std::array<std::size_t, kNumTags>> next(n);
  best[n - 1] = e[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t y = 0; y < kNumTags; ++y) {
      double top = kNegInf;
      std::size_t arg = 0;
      for (std::size_t z = 0; z < kNumTags; ++z) {
        const double s = tm.log_trans()[y][z] + best[i + 1][z];
        if (s > top) {
          top = s;
          arg = z;
        }
      }
      best[i][y] = e[i][y] + top;
      next[i][y] = arg;
    }
  }
  double top = kNegInf;
  std::size_t y = 0;
  for (std::size_t z = 0; z < kNumTags; ++z) {
    const double s = tm.log_start()[z] + best[0][z];
    if (s > top) {
      top = s;
      y = z;
    }
  }
  if (top == kNegInf) throw std::runtime_error("viterbi_decode: every tag path has zero probability");
  std::vector<LabelTag> path(n);
  for (std::size_t i = 0; i < n; ++i) {
    path[i] = tag_from_index(y);
    if (i + 1 < n) y = next[i][y];
  }
  return path;
}

std::vector<LabelTag> brute_force_decode(const Emissions& e, const TransitionModel& tm) {
  const std::size_t n = e.size();
  if (n > kMaxBruteForceLength) {
    throw std::invalid_argument("brute_force_decode: length " + std::to_string(n) + " exceeds " +
                                std::to_string(kMaxBruteForceLength));
  }
  if (n == 0) return {};
  std::vector<LabelTag> current(n, tag_from_index(0));
  std::vector<LabelTag> best_path;
  double best = kNegInf;
  // Odometer enumeration in lexicographic order; strict improvement keeps the
  // earliest maximizer.
  while (true) {
    const double s = path_score(e, tm, current);
    if (s > best) {
      best = s;
      best_path = current;
    }
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      const auto v = tag_index(current[pos]) + 1;
      if (v < kNumTags) {
        current[pos] = tag_from_index(v);
        break;
      }
      current[pos] = tag_from_index(0);
      if (pos == 0) {
        pos = n + 1;
        break;
      }
    }
    if (pos == n + 1) break;
  }
  if (best_path.empty()) throw std::runtime_error("brute_force_decode: every tag path has zero probability");
  return best_path;
}

}  // namespace ces
