#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diagcap/caption.hpp"
#include "diagcap/metrics.hpp"
#include "oracles.hpp"

using namespace diagcap;
using metrics::TokenSeq;

namespace {

TokenSeq toks(std::initializer_list<const char*> words) { return TokenSeq(words.begin(), words.end()); }

TokenSeq random_seq(Rng& rng, std::size_t max_len, std::size_t vocab) {
  TokenSeq out(rng.index(max_len + 1));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + rng.index(vocab)));
  return out;
}

/// 200 single and 100 multi items with fixed keys.
struct Fixture {
  std::vector<vqa::QaItem> items;
  vqa::AnswerKey key;

  Fixture(std::size_t singles = 200, std::size_t multis = 100) {
    for (std::size_t i = 0; i < singles + multis; ++i) {
      vqa::QaItem q;
      q.item_id = "it" + std::to_string(1000 + i);
      q.diagram_id = "d";
      q.kind = i < singles ? vqa::Kind::Single : vqa::Kind::Multi;
      const std::size_t n = q.kind == vqa::Kind::Single ? 4 : 5;
      for (std::size_t k = 0; k < n; ++k) q.options.push_back({static_cast<char>('A' + k), "opt" + std::to_string(k)});
      if (q.kind == vqa::Kind::Single)
        q.correct = {static_cast<char>('A' + i % 4)};
      else
        q.correct = {'B', static_cast<char>('C' + i % 3)};
      items.push_back(q);
    }
    key = vqa::make_key(items);
  }

  /// Correct answers for the first `s` singles and `m` multis, wrong for the rest.
  std::map<std::string, std::string> responses(std::size_t s, std::size_t m) const {
    std::map<std::string, std::string> out;
    std::size_t si = 0, mi = 0;
    for (const auto& q : items) {
      const bool single = q.kind == vqa::Kind::Single;
      const bool right = single ? si++ < s : mi++ < m;
      if (right) {
        out[q.item_id] = vqa::answer_text(q.correct);
      } else {
        char wrong = 'A';
        while (q.correct.count(wrong)) ++wrong;
        out[q.item_id] = std::string("Answer: ") + wrong;
      }
    }
    return out;
  }
};

}  // namespace

TEST_CASE("tokenizer") {
  CHECK(metrics::tokenize("Step 1: UE sends 'Attach Request'.") ==
        toks({"step", "1", ":", "ue", "sends", "'", "attach", "request", "'", "."}));
  CHECK(metrics::tokenize("").empty());
  CHECK(metrics::tokenize("  \t\n ").empty());
  CHECK(metrics::tokenize("a\xC2\xA0" "b\xE2\x80\x83" "c\xE3\x80\x80" "d") == toks({"a", "b", "c", "d"}));
  CHECK(metrics::tokenize("(x,y);z!\"w\"?") == toks({"(", "x", ",", "y", ")", ";", "z", "!", "\"", "w", "\"", "?"}));
  CHECK(metrics::tokenize("\xC3\x89" "COLE Ab") == toks({"\xC3\x89" "cole", "ab"}));  // only ASCII is lowercased

  for (std::size_t i = 0; i < 100; ++i) {
    const auto text = caption::caption(oracle::sample_diagram(81, i)).full_text;
    const auto t = metrics::tokenize(text);
    for (const auto& tok : t) CHECK_FALSE(tok.empty());
    std::string joined;
    for (const auto& tok : t) joined += (joined.empty() ? "" : " ") + tok;
    CHECK(metrics::tokenize(joined) == t);
  }
}

TEST_CASE("BLEU examples") {
  const auto ref = metrics::tokenize("the cat sat on the mat today");
  const std::vector<TokenSeq> refs{ref};
  CHECK(metrics::bleu(ref, refs) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(metrics::bleu(toks({"x", "y", "z", "w"}), refs) < 0.01);
  CHECK(metrics::bleu({}, refs) == 0.0);
  CHECK_THROWS_AS(metrics::bleu(ref, std::vector<TokenSeq>{}), Error);

  const auto cand = toks({"the", "cat", "sat"});
  const std::vector<TokenSeq> r2{toks({"the", "cat", "sat", "down"})};
  CHECK(std::abs(metrics::bleu(cand, r2) - oracle::bleu(cand, r2)) <= 1e-12);
  // hand value: p1 = p2 = p3 = 1, p4 = 1/1 (no 4-grams), BP = exp(1 - 4/3)
  CHECK(metrics::bleu(cand, r2) == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("BLEU agrees with the brute-force counter on random pairs") {
  Rng rng(2024);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto cand = random_seq(rng, 10, 5);
    std::vector<TokenSeq> refs;
    const auto nrefs = 1 + rng.index(3);
    for (std::size_t k = 0; k < nrefs; ++k) refs.push_back(random_seq(rng, 10, 5));
    const double a = metrics::bleu(cand, refs);
    const double b = oracle::bleu(cand, refs);
    worst = std::max(worst, std::abs(a - b));
    REQUIRE(std::abs(a - b) <= 1e-12);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0 + 1e-12);
  }
  MESSAGE("max |delta| = " << worst);
}

TEST_CASE("METEOR-lite") {
  TokenSeq ten;
  for (int i = 0; i < 10; ++i) ten.push_back("w" + std::to_string(i));
  CHECK(metrics::meteor_lite(ten, ten) == doctest::Approx(0.9995).epsilon(1e-12));
  CHECK(metrics::meteor_lite(toks({"a", "b"}), toks({"c", "d"})) == 0.0);

  const auto al = metrics::align(toks({"b", "a"}), toks({"a", "b"}));
  CHECK(al.matches == 2);
  CHECK(al.chunks == 2);
  // P = R = 1, penalty = 0.5 * (2/2)^3
  CHECK(metrics::meteor_lite(toks({"b", "a"}), toks({"a", "b"})) == doctest::Approx(0.5).epsilon(1e-12));

  // hand value: P = 2/3, R = 2/4, one chunk
  const double p = 2.0 / 3, r = 0.5, f = p * r / (0.9 * p + 0.1 * r);
  CHECK(metrics::meteor_lite(toks({"a", "b", "x"}), toks({"a", "b", "c", "d"})) ==
        doctest::Approx(f * (1 - 0.5 * std::pow(0.5, 3))).epsilon(1e-12));

  const std::vector<TokenSeq> refs{toks({"c", "d"}), ten};
  CHECK(metrics::meteor_lite(ten, refs) == doctest::Approx(0.9995).epsilon(1e-12));
  CHECK(metrics::meteor_lite(ten, std::vector<TokenSeq>{}) == 0.0);
}

TEST_CASE("CIDEr") {
  const auto a = metrics::tokenize("ue sends attach request to enb");
  const auto b = metrics::tokenize("mme replies with attach accept");

  const std::vector<std::vector<TokenSeq>> one{{a}};
  CHECK(metrics::cider(a, std::vector<TokenSeq>{a}, one) == 0.0);  // every n-gram in every document

  const auto c = metrics::tokenize("hss stores subscriber profile data");
  const std::vector<std::vector<TokenSeq>> two{{a}, {c}};
  CHECK(metrics::cider(a, std::vector<TokenSeq>{a}, two) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(metrics::cider(c, std::vector<TokenSeq>{a}, two) == 0.0);

  CHECK_THROWS_AS(metrics::CiderIdf(std::vector<std::vector<TokenSeq>>{}), Error);

  const metrics::CiderIdf idf(std::vector<std::vector<TokenSeq>>{{a}, {b}, {c}});
  CHECK(idf.idf("attach") == doctest::Approx(std::log(3.0) - std::log(2.0)));
  CHECK(idf.idf("never seen") == doctest::Approx(std::log(3.0)));
}

TEST_CASE("metrics are invariant under renaming tokens") {
  Rng rng(5);
  const std::vector<std::string> to{"zz", "q", "hello", "7", ":"};
  auto rename = [&](const TokenSeq& s) {
    TokenSeq out;
    for (const auto& t : s) out.push_back(to[t[0] - 'a']);
    return out;
  };
  for (int i = 0; i < 500; ++i) {
    const auto cand = random_seq(rng, 10, 5);
    const auto ref = random_seq(rng, 10, 5);
    const auto other = random_seq(rng, 10, 5);
    const std::vector<TokenSeq> refs{ref}, refs2{rename(ref)};
    const std::vector<std::vector<TokenSeq>> corpus{{ref}, {other}}, corpus2{{rename(ref)}, {rename(other)}};
    CHECK(metrics::bleu(cand, refs) == metrics::bleu(rename(cand), refs2));
    CHECK(metrics::meteor_lite(cand, ref) == metrics::meteor_lite(rename(cand), rename(ref)));
    CHECK(metrics::cider(cand, refs, corpus) == doctest::Approx(metrics::cider(rename(cand), refs2, corpus2)).epsilon(1e-12));
  }
}

TEST_CASE("corpus scoring") {
  std::map<std::string, std::vector<std::string>> refs;
  std::map<std::string, std::string> cands;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto doc = caption::caption(oracle::sample_diagram(91, i));
    refs[doc.diagram_id] = {doc.full_text};
    cands[doc.diagram_id] = doc.full_text;
  }
  const auto same = metrics::score_corpus(cands, refs);
  CHECK(same.mean.bleu == doctest::Approx(1.0));
  CHECK(same.mean.meteor > 0.99);
  CHECK(same.mean.cider > 0.0);

  // two items: one exact, one disjoint
  std::map<std::string, std::vector<std::string>> r2{{"x", {"ue sends attach request to the enb now"}},
                                                     {"y", {"mme replies with attach accept message"}}};
  std::map<std::string, std::string> c2{{"x", "ue sends attach request to the enb now"}, {"y", "zz qq ww"}};
  const auto half = metrics::score_corpus(c2, r2);
  CHECK(std::abs(half.mean.bleu - 0.5) <= 0.01);

  // relabeling ids so the map order flips leaves each score unchanged
  std::map<std::string, std::vector<std::string>> r3{{"b", r2["x"]}, {"a", r2["y"]}};
  std::map<std::string, std::string> c3{{"b", c2["x"]}, {"a", c2["y"]}};
  const auto flipped = metrics::score_corpus(c3, r3);
  CHECK(flipped.items.at("b").bleu == half.items.at("x").bleu);
  CHECK(flipped.items.at("a").cider == half.items.at("y").cider);
  CHECK(flipped.mean.bleu == half.mean.bleu);
  CHECK(flipped.mean.cider == doctest::Approx(half.mean.cider).epsilon(1e-12));

  c2.erase("y");
  c2["zzz"] = "extra";
  try {
    metrics::score_corpus(c2, r2);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("y") != std::string::npos);
    CHECK(msg.find("zzz") != std::string::npos);
  }
}

TEST_CASE("accuracy arithmetic") {
  const auto r = metrics::AccuracyReport::from_counts(165, 200, 52, 100);
  CHECK(metrics::round1(r.prec_s) == 82.5);
  CHECK(metrics::round1(r.prec_m) == 52.0);
  CHECK(metrics::round1(r.prec_a) == 72.3);
  CHECK(r.prec_a == doctest::Approx(72.3333333333));

  const auto q = metrics::AccuracyReport::from_counts(146, 200, 40, 100);
  CHECK(metrics::round1(q.prec_s) == 73.0);
  CHECK(metrics::round1(q.prec_m) == 40.0);
  CHECK(metrics::round1(q.prec_a) == 62.0);

  CHECK_THROWS_AS(metrics::AccuracyReport::from_counts(201, 200, 0, 100), Error);
  const auto zero = metrics::AccuracyReport::from_counts(0, 0, 0, 0);
  CHECK(zero.prec_a == 0.0);

  CHECK(metrics::round1(0.05) == 0.1);
  CHECK(metrics::round1(66.66666) == 66.7);
  CHECK(metrics::round1(65.65) == doctest::Approx(65.7));

  Rng rng(17);
  for (int i = 0; i < 5000; ++i) {
    const auto st = rng.index(400), mt = rng.index(400);
    const auto sr = st ? rng.index(st + 1) : 0, mr = mt ? rng.index(mt + 1) : 0;
    const auto x = metrics::AccuracyReport::from_counts(sr, st, mr, mt);
    CHECK(x.prec_a * (st + mt) == doctest::Approx(x.prec_s * st + x.prec_m * mt).epsilon(1e-12));
  }
}

TEST_CASE("letter extraction") {
  CHECK(metrics::extract_letters("The answer is B and D.") == std::vector<char>{'B', 'D'});
  CHECK(metrics::extract_letters("answer: c") == std::vector<char>{'C'});
  CHECK(metrics::extract_letters("B, B, b") == std::vector<char>{'B'});
  CHECK(metrics::extract_letters("ABC").empty());
  CHECK(metrics::extract_letters("F G").empty());
  CHECK(metrics::extract_letters("(A) or [E]") == std::vector<char>{'A', 'E'});
  CHECK(metrics::extract_letters("").empty());
}

TEST_CASE("answer scoring") {
  const Fixture fx;

  SUBCASE("reference row counts") {
    const auto s = metrics::score_answers(fx.responses(165, 52), fx.key, fx.items);
    CHECK(s.report.a_s_r == 165);
    CHECK(s.report.a_m_r == 52);
    CHECK(metrics::round1(s.report.prec_s) == 82.5);
    CHECK(metrics::round1(s.report.prec_m) == 52.0);
    CHECK(metrics::round1(s.report.prec_a) == 72.3);
  }
  SUBCASE("empty responses") {
    std::map<std::string, std::string> empty;
    for (const auto& q : fx.items) empty[q.item_id] = "";
    const auto s = metrics::score_answers(empty, fx.key, fx.items);
    CHECK(s.report.prec_s == 0.0);
    CHECK(s.report.prec_m == 0.0);
    CHECK(s.report.prec_a == 0.0);
    CHECK(metrics::score_answers({}, fx.key, fx.items).report.prec_a == 0.0);
  }
  SUBCASE("free-form multi answer") {
    vqa::QaItem q = fx.items[200];
    q.correct = {'B', 'D'};
    const std::vector<vqa::QaItem> one{q};
    const auto key = vqa::make_key(one);
    const auto s = metrics::score_answers({{q.item_id, "The answer is B and D."}}, key, one);
    CHECK(s.report.a_m_r == 1);
  }
  SUBCASE("no partial credit") {
    for (std::size_t i = 200; i < 300; ++i) {
      const auto& q = fx.items[i];
      const std::vector<vqa::QaItem> one{q};
      const auto key = vqa::make_key(one);
      CHECK(metrics::score_answers({{q.item_id, vqa::answer_text(q.correct)}}, key, one).report.a_m_r == 1);
      for (char flip = 'A'; flip <= 'E'; ++flip) {
        auto letters = q.correct;
        if (!letters.erase(flip)) letters.insert(flip);
        CHECK(metrics::score_answers({{q.item_id, vqa::answer_text(letters)}}, key, one).report.a_m_r == 0);
      }
    }
  }
  SUBCASE("single item answered with two letters is wrong") {
    const auto& q = fx.items[0];
    const std::vector<vqa::QaItem> one{q};
    const auto key = vqa::make_key(one);
    char other = *q.correct.begin() == 'A' ? 'B' : 'A';
    const std::string both = std::string("Answer: ") + *q.correct.begin() + " or " + other;
    CHECK(metrics::score_answers({{q.item_id, both}}, key, one).report.a_s_r == 0);
  }
  SUBCASE("unknown ids warn, key mismatch throws") {
    auto resp = fx.responses(200, 100);
    resp["stranger"] = "A";
    const auto s = metrics::score_answers(resp, fx.key, fx.items);
    CHECK(s.report.prec_a == 100.0);
    CHECK(s.warnings.size() == 1);

    auto fewer = fx.items;
    fewer.pop_back();
    CHECK_THROWS_AS(metrics::score_answers(resp, fx.key, fewer), Error);
  }
}

TEST_CASE("random-guess baseline") {
  CHECK(metrics::random_guess_prec_a(200, 100) == doctest::Approx(18.0));
  CHECK(metrics::random_guess_prec_a(4, 0) == doctest::Approx(25.0));
  CHECK(metrics::random_guess_prec_a(0, 0) == 0.0);
}
