#include <doctest.h>

#include <cmath>

#include "ces/error.hpp"
#include "ces/viterbi.hpp"
#include "support.hpp"

using namespace ces;

namespace {

constexpr auto BC = LabelTag::kBeginCause;
constexpr auto IC = LabelTag::kInsideCause;
constexpr auto BE = LabelTag::kBeginEffect;
constexpr auto IE = LabelTag::kInsideEffect;
constexpr auto O = LabelTag::kOutside;

constexpr double kInf = std::numeric_limits<double>::infinity();

TagArray row(double bc, double ic, double be, double ie, double o) { return {bc, ic, be, ie, o}; }

TransitionModel uniform_model() { return TransitionModel::from_counts({}); }

}  // namespace

TEST_CASE("structural mask") {
  CHECK_FALSE(transition_allowed(O, IC));
  CHECK_FALSE(transition_allowed(O, IE));
  CHECK_FALSE(transition_allowed(BC, IE));
  CHECK_FALSE(transition_allowed(IC, IE));
  CHECK_FALSE(transition_allowed(BE, IC));
  CHECK_FALSE(transition_allowed(IE, IC));
  CHECK(transition_allowed(BC, IC));
  CHECK(transition_allowed(IE, IE));
  CHECK(transition_allowed(IC, BE));
  CHECK(transition_allowed(O, BC));
  CHECK_FALSE(start_allowed(IC));
  CHECK_FALSE(start_allowed(IE));
}

TEST_CASE("estimate_transitions") {
  SUBCASE("single O sequence") {
    const std::vector<std::vector<LabelTag>> seqs{{O}};
    const auto tm = estimate_transitions(seqs);
    CHECK(std::exp(tm.log_start()[tag_index(O)]) == doctest::Approx(2.0 / 4.0));
    CHECK(std::exp(tm.log_start()[tag_index(BC)]) == doctest::Approx(1.0 / 4.0));
    CHECK(tm.log_start()[tag_index(IC)] == -kInf);
  }
  SUBCASE("cause pair gives 2/5 for I-C after B-C") {
    const std::vector<std::vector<LabelTag>> seqs{{BC, IC}};
    const auto tm = estimate_transitions(seqs);
    CHECK(std::exp(tm.log_trans()[tag_index(BC)][tag_index(IC)]) == doctest::Approx(0.4));
    CHECK(std::exp(tm.log_trans()[tag_index(BC)][tag_index(O)]) == doctest::Approx(0.2));
    CHECK(tm.log_trans()[tag_index(BC)][tag_index(IE)] == -kInf);
    CHECK(tm.log_trans()[tag_index(O)][tag_index(IC)] == -kInf);
  }
  SUBCASE("rows normalize over allowed cells") {
    nd::Rng rng(1, "estimate");
    std::vector<std::vector<LabelTag>> seqs;
    for (int k = 0; k < 20; ++k) {
      std::vector<LabelTag> s;
      for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) s.push_back(tag_from_index(rng.below(5)));
      seqs.push_back(s);
    }
    const auto tm = estimate_transitions(seqs);
    double start = 0;
    for (auto v : tm.log_start()) start += std::exp(v);
    CHECK(start == doctest::Approx(1.0));
    for (const auto& r : tm.log_trans()) {
      double total = 0;
      for (auto v : r) total += std::exp(v);
      CHECK(total == doctest::Approx(1.0));
    }
    const auto back = TransitionModel::from_json(tm.to_json());
    CHECK(back.log_trans() == tm.log_trans());
  }
  SUBCASE("empty corpus") {
    const std::vector<std::vector<LabelTag>> none;
    CHECK_THROWS_AS(estimate_transitions(none), InputError);
  }
}

TEST_CASE("viterbi decode examples") {
  const auto tm = uniform_model();
  SUBCASE("peaked emissions follow the legal argmax") {
    const Emissions e{row(-9, -9, 0, -9, -9), row(-9, -9, -9, 0, -9), row(-9, -9, -9, -9, 0)};
    CHECK(viterbi_decode(e, tm) == std::vector{BE, IE, O});
  }
  SUBCASE("illegal O then I-C is repaired") {
    const Emissions e{row(-5, -5, -5, -5, -0.1), row(-2, -0.1, -5, -5, -3)};
    const auto path = viterbi_decode(e, tm);
    CHECK(testing::path_is_legal(path));
    CHECK(path == brute_force_decode(e, tm));
    CHECK(path[0] == O);
    CHECK((path[1] == BC || path[1] == O));
  }
  SUBCASE("single step") {
    const Emissions e{row(-1, 0, -3, -3, -2)};
    CHECK(viterbi_decode(e, tm) == std::vector{BC});
  }
  SUBCASE("identical rows give a constant legal path") {
    const Emissions e(4, row(-3, -3, -3, -3, -0.5));
    CHECK(viterbi_decode(e, tm) == std::vector<LabelTag>(4, O));
  }
  SUBCASE("ties resolve to the smallest tag sequence") {
    const Emissions e(3, row(0, 0, 0, 0, 0));
    TransitionCounts flat;
    const auto path = viterbi_decode(e, TransitionModel::from_counts(flat));
    CHECK(path == brute_force_decode(e, TransitionModel::from_counts(flat)));
  }
  SUBCASE("brute force rejects long inputs") {
    const Emissions e(11, row(0, 0, 0, 0, 0));
    CHECK_THROWS(brute_force_decode(e, tm));
  }
}

TEST_CASE("viterbi matches enumeration on random instances") {
  nd::Rng rng(31, "viterbi-unit");
  for (int k = 0; k < 150; ++k) {
    const std::size_t n = 1 + rng.below(6);
    const bool ties = k % 2 == 0;
    auto [e, tm] = testing::random_decode_instance(rng, n, ties);
    const auto dp = viterbi_decode(e, tm);
    const auto bf = brute_force_decode(e, tm);
    CHECK(dp == bf);
    CHECK(testing::path_is_legal(dp));
    CHECK(path_score(e, tm, dp) == path_score(e, tm, bf));

    // Shifting a row by a constant leaves the path unchanged.
    auto shifted = e;
    const double c = rng.uniform(-3, 3);
    for (auto& v : shifted[rng.below(n)]) v += c;
    if (!ties) CHECK(viterbi_decode(shifted, tm) == dp);
  }
}
