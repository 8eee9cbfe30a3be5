#include <random>

#include "doctest.h"
#include "s2da/metrics/metrics.hpp"
#include "support/metric_oracles.hpp"

using namespace s2da::metrics;
using s2da::testing::direct_ser_distance;
using s2da::testing::random_boundaries;
using s2da::testing::random_sequence;
using s2da::testing::recursive_edit_distance;
using Words = std::vector<std::string>;

TEST_CASE("edit distance basics") {
  const Words x{"a", "b", "c"};
  CHECK(edit_distance(x, x) == 0);
  CHECK(edit_distance(x, Words{"a", "x", "c"}) == 1);
  CHECK(edit_distance(Words{}, x) == 3);
  CHECK(edit_distance(x, Words{}) == 3);
  CHECK(edit_distance(Words{"k", "i", "t", "t", "e", "n"},
                      Words{"s", "i", "t", "t", "i", "n", "g"}) == 3);
}

TEST_CASE("edit distance agrees with the recursive oracle") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_sequence(rng, 10, 4);
    const auto b = random_sequence(rng, 10, 4);
    REQUIRE(edit_distance(a, b) == recursive_edit_distance(a, b));
  }
}

TEST_CASE("edit distance is a metric") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_sequence(rng, 8, 3);
    const auto b = random_sequence(rng, 8, 3);
    const auto c = random_sequence(rng, 8, 3);
    CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
    CHECK((edit_distance(a, b) == 0) == (a == b));
    CHECK(edit_distance(a, b) == edit_distance(b, a));
  }
}

TEST_CASE("word error rate") {
  const Words ref{"i", "am", "a", "student"};
  CHECK(wer(ref, ref) == 0.0);
  CHECK(wer(ref, Words{"i", "the", "student"}) == 50.0);
  CHECK(wer(Words{"a", "<da_end>", "b", "<da_end>"}, Words{"a", "b"}) == 0.0);
  CHECK(wer(Words{"a"}, Words{"b", "c", "d"}) == 300.0);
  CHECK_THROWS_AS(wer(Words{"<da_end>"}, Words{"a"}), std::invalid_argument);

  SUBCASE("corpus WER is the ratio of summed distances to summed lengths") {
    std::mt19937_64 rng(3);
    MetricReport report;
    double dist = 0, len = 0;
    for (int i = 0; i < 50; ++i) {
      auto ri = random_sequence(rng, 9, 5);
      ri.push_back(0);
      const auto hi = random_sequence(rng, 10, 5);
      Words r, h;
      for (int v : ri) r.push_back(std::to_string(v));
      for (int v : hi) h.push_back(std::to_string(v));
      report.add_wer(r, h);
      dist += static_cast<double>(recursive_edit_distance(ri, hi));
      len += static_cast<double>(ri.size());
    }
    CHECK(report.wer->numerator == dist);
    CHECK(report.wer->denominator == len);
    CHECK(report.wer->percent() == 100.0 * dist / len);
  }
}

TEST_CASE("label error rate") {
  CHECK(ler(Words{"sd", "b"}, Words{"sd", "b"}) == 0.0);
  CHECK(ler(Words{"sd", "b", "qy", "sv"}, Words{"sd", "b", "qy", "sd"}) == 25.0);
  CHECK_THROWS_AS(ler(Words{"sd"}, Words{"sd", "b"}), std::invalid_argument);
}

TEST_CASE("segmentation distance") {
  CHECK(ser_distance({2, 5}, {2, 5}) == 0.0);
  CHECK(ser_distance({2, 5}, {3, 5}) == 1.0);
  CHECK(ser_distance({4}, {0, 4}) == 2.0);
  CHECK_THROWS_AS(ser_distance({}, {1}), std::invalid_argument);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto g = random_boundaries(rng, 12);
    const auto p = random_boundaries(rng, 12);
    REQUIRE(ser_distance(g, p) == direct_ser_distance(g, p));
    CHECK(ser_distance(g, p) == ser_distance(p, g));
    CHECK((ser_distance(g, p) == 0.0) == (g == p));
  }
}

TEST_CASE("segment count error rate") {
  CHECK(nser(4, 4) == 0.0);
  CHECK(nser(4, 3) == 25.0);
  CHECK(nser(2, 5) == 150.0);
  CHECK_THROWS_AS(nser(0, 1), std::invalid_argument);

  SUBCASE("positions do not matter") {
    const TaggedTurn gold{{{"a", "b"}, "x"}, {{"c"}, "y"}, {{"d", "e"}, "x"}};
    const TaggedTurn shifted{{{"a"}, "x"}, {{"b", "c", "d"}, "y"}, {{"e"}, "x"}};
    MetricReport a, b;
    a.add_turn(gold, gold);
    b.add_turn(gold, shifted);
    CHECK(a.nser->percent() == b.nser->percent());
    CHECK(b.ser->percent() > 0.0);
  }
}

TEST_CASE("dialog act error rate") {
  const TaggedTurn gold{{{"yeah"}, "ny"}, {{"i", "am", "a", "student"}, "sd"}};
  const TaggedTurn hyp{{{"yeah"}, "ny"}, {{"i", "the", "student"}, "sv"}};
  CHECK(expand_tags(gold) == Words{"ny", "sd", "sd", "sd", "sd"});
  CHECK(expand_tags(hyp) == Words{"ny", "sv", "sv", "sv"});
  CHECK(daer(gold, hyp) == 80.0);
  CHECK(daer(gold, gold) == 0.0);
  CHECK_THROWS_AS(daer(gold, TaggedTurn{{{"a"}, ""}}), std::invalid_argument);

  SUBCASE("correct words with wrong tags count the mis-tagged tokens") {
    const TaggedTurn wrong{{{"yeah"}, "b"}, {{"i", "am", "a", "student"}, "sd"}};
    CHECK(daer(gold, wrong) == 20.0);
    const TaggedTurn all_wrong{{{"yeah"}, "b"}, {{"i", "am", "a", "student"}, "sv"}};
    CHECK(daer(gold, all_wrong) == 100.0);
  }
  SUBCASE("word identity inside correctly tagged segments is irrelevant") {
    const TaggedTurn other{{{"no"}, "ny"}, {{"x", "y", "z", "w"}, "sd"}};
    CHECK(daer(gold, other) == 0.0);
  }
  SUBCASE("boundary markers are removed before expansion") {
    const TaggedTurn marked{{{"yeah", "<da_end>"}, "ny"}, {{"i", "am", "a", "student", "<da_end>"}, "sd"}};
    CHECK(daer(gold, marked) == 0.0);
  }
}

TEST_CASE("turn-level report") {
  const TaggedTurn gold{{{"yeah"}, "ny"}, {{"i", "am", "a", "student"}, "sd"}};
  const TaggedTurn hyp{{{"yeah", "i"}, "ny"}, {{"the", "student"}, "sd"}};
  MetricReport r;
  r.add_turn(gold, hyp);
  CHECK(r.wer->percent() == 40.0);
  CHECK(r.ler->percent() == 0.0);
  // G = {0, 4}, P = {1, 3}: distances 1 + 1 each way.
  CHECK(r.ser->numerator == 2.0);
  CHECK(r.ser->denominator == 5.0);
  CHECK(r.nser->percent() == 0.0);

  SUBCASE("different segment counts are left out of LER and counted") {
    MetricReport s;
    s.add_turn(gold, TaggedTurn{{{"yeah", "i", "am", "a", "student"}, "sd"}});
    CHECK(s.ler->denominator == 0.0);
    CHECK(s.ler_skipped_turns == 1);
  }
  SUBCASE("an empty hypothesis is scored rather than rejected") {
    MetricReport s;
    s.add_turn(gold, TaggedTurn{});
    CHECK(s.wer->percent() == 100.0);
    CHECK(s.daer->percent() == 100.0);
    CHECK(s.nser->percent() == 100.0);
  }
  SUBCASE("percentages are recomputable from the stored counts") {
    const auto j = to_json(r);
    const auto back = report_from_json(j);
    CHECK(back == r);
    CHECK(j["wer"]["percent"].get<double>() == 100.0 * j["wer"]["numerator"].get<double>() /
                                                   j["wer"]["denominator"].get<double>());
    CHECK(format_table(r).find("40.00") != std::string::npos);
  }
}
