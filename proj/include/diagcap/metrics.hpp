#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diagcap/vqa.hpp"

namespace diagcap::metrics {

using TokenSeq = std::vector<std::string>;

/// Lowercases ASCII letters, splits on ASCII and Unicode (UTF-8) whitespace,
/// and emits each of . , : ; ! ? ' " ( ) as its own token.
TokenSeq tokenize(std::string_view text);

/// Sentence-level BLEU with add-one smoothing for zero higher-order counts
/// and a closest-reference-length brevity penalty. Empty candidate -> 0.
/// Throws Error if `references` is empty.
double bleu(const TokenSeq& candidate, std::span<const TokenSeq> references, int max_n = 4);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Exact-match unigram alignment: every matchable token is matched; chunks are
/// reduced by tiling the longest common runs first.
Alignment align(const TokenSeq& candidate, const TokenSeq& reference);

double meteor_lite(const TokenSeq& candidate, const TokenSeq& reference, const MeteorParams& p = {});
/// Maximum over references; 0 if there are none.
double meteor_lite(const TokenSeq& candidate, std::span<const TokenSeq> references, const MeteorParams& p = {});

/// Document frequencies over a reference corpus (one entry per image, each a
/// list of reference captions). Read-only after construction.
class CiderIdf {
 public:
  explicit CiderIdf(std::span<const std::vector<TokenSeq>> corpus_refs, int max_n = 4);

  /// Plain CIDEr: mean over n of the mean cosine against each reference, x10.
  double score(const TokenSeq& candidate, std::span<const TokenSeq> references) const;

  double idf(const std::string& ngram_key) const;
  int max_n() const { return max_n_; }

 private:
  int max_n_;
  double log_n_;
  std::map<std::string, std::size_t> df_;
};

double cider(const TokenSeq& candidate, std::span<const TokenSeq> references,
             std::span<const std::vector<TokenSeq>> corpus_refs, int max_n = 4);

struct MetricScores {
  double bleu = 0;
  double meteor = 0;
  double cider = 0;
};

struct CorpusScores {
  std::map<std::string, MetricScores> items;
  MetricScores mean;
};

/// Throws Error listing ids present on only one side.
CorpusScores score_corpus(const std::map<std::string, std::string>& candidates,
                          const std::map<std::string, std::vector<std::string>>& references);

struct AccuracyReport {
  std::size_t a_s_r = 0, a_s_t = 0, a_m_r = 0, a_m_t = 0;
  double prec_s = 0, prec_m = 0, prec_a = 0;  // percentages, unrounded

  static AccuracyReport from_counts(std::size_t a_s_r, std::size_t a_s_t, std::size_t a_m_r, std::size_t a_m_t);
};

/// Percentage rounded half away from zero to one decimal.
double round1(double percent);

/// Standalone letters A-E (case-insensitive), deduplicated in order of first
/// appearance, returned uppercase.
std::vector<char> extract_letters(std::string_view response);

struct AnswerScoring {
  AccuracyReport report;
  std::map<std::string, bool> correct;  // per key item
  std::vector<std::string> warnings;
};

/// Exact-set grading; missing responses are incorrect. Throws Error if the key
/// and the items disagree.
AnswerScoring score_answers(const std::map<std::string, std::string>& responses, const vqa::AnswerKey& key,
                            std::span<const vqa::QaItem> items);

/// Expected Prec_a (percent) of a uniform random guesser: 1 in 4 for single
/// items, 1 in 25 (the 2-4 letter subsets of 5 options) for multi items.
double random_guess_prec_a(std::size_t single_total, std::size_t multi_total);

}  // namespace diagcap::metrics
