#include "diagcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace diagcap::metrics {

namespace {

constexpr std::string_view kPunct = ".,:;!?'\"()";

/// Byte length of a UTF-8 whitespace sequence starting at s[i], or 0.
std::size_t whitespace_at(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u; };
  const unsigned c = b(0);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  if (c == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;
  if (c == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && b(1) == 0x80 && ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF))
    return 3;
  if (c == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;  // U+3000
  return 0;
}

std::string ngram_key(const TokenSeq& t, std::size_t pos, std::size_t n) {
  std::string key;
  for (std::size_t k = 0; k < n; ++k) {
    if (k) key += '\x1f';
    key += t[pos + k];
  }
  return key;
}

std::unordered_map<std::string, std::size_t> ngram_counts(const TokenSeq& t, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[ngram_key(t, i, n)];
  return counts;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (auto ws = whitespace_at(text, i)) {
      flush();
      i += ws;
      continue;
    }
    const char c = text[i++];
    if (kPunct.find(c) != std::string_view::npos) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    }
  }
  flush();
  return out;
}

double bleu(const TokenSeq& candidate, std::span<const TokenSeq> references, int max_n) {
  if (references.empty()) throw Error("bleu: no references");
  if (candidate.empty() || max_n < 1) return 0.0;

  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = ngram_counts(candidate, static_cast<std::size_t>(n));
    std::unordered_map<std::string, std::size_t> max_ref;
    for (const auto& r : references)
      for (const auto& [g, c] : ngram_counts(r, static_cast<std::size_t>(n))) max_ref[g] = std::max(max_ref[g], c);
    std::size_t matched = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (matched > 0) {
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else if (n == 1) {
      return 0.0;
    } else {
      p = 1.0 / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }

  const double c = static_cast<double>(candidate.size());
  double r = static_cast<double>(references[0].size());
  for (const auto& ref : references) {
    const double len = static_cast<double>(ref.size());
    const double d = std::abs(len - c), best = std::abs(r - c);
    if (d < best || (d == best && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / max_n);
}

Alignment align(const TokenSeq& candidate, const TokenSeq& reference) {
  const std::size_t nc = candidate.size(), nr = reference.size();
  std::vector<bool> used_c(nc, false), used_r(nr, false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  for (;;) {
    // Longest run of equal, unused tokens; earliest candidate then reference position on ties.
    std::size_t best_len = 0, best_i = 0, best_j = 0;
    std::vector<std::size_t> prev(nr + 1, 0), row(nr + 1, 0);
    for (std::size_t i = 1; i <= nc; ++i) {
      for (std::size_t j = 1; j <= nr; ++j) {
        if (!used_c[i - 1] && !used_r[j - 1] && candidate[i - 1] == reference[j - 1]) {
          row[j] = prev[j - 1] + 1;
          const std::size_t len = row[j];
          const std::size_t si = i - len, sj = j - len;
          if (len > best_len || (len == best_len && (si < best_i || (si == best_i && sj < best_j)))) {
            best_len = len;
            best_i = si;
            best_j = sj;
          }
        } else {
          row[j] = 0;
        }
      }
      std::swap(prev, row);
    }
    if (best_len == 0) break;
    for (std::size_t k = 0; k < best_len; ++k) {
      used_c[best_i + k] = used_r[best_j + k] = true;
      pairs.emplace_back(best_i + k, best_j + k);
    }
  }

  std::sort(pairs.begin(), pairs.end());
  Alignment a;
  a.matches = pairs.size();
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (k == 0 || pairs[k].first != pairs[k - 1].first + 1 || pairs[k].second != pairs[k - 1].second + 1) ++a.chunks;
  return a;
}

double meteor_lite(const TokenSeq& candidate, const TokenSeq& reference, const MeteorParams& p) {
  const Alignment a = align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double precision = m / static_cast<double>(candidate.size());
  const double recall = m / static_cast<double>(reference.size());
  const double f_mean = precision * recall / (p.alpha * precision + (1 - p.alpha) * recall);
  const double penalty = p.gamma * std::pow(static_cast<double>(a.chunks) / m, p.beta);
  return f_mean * (1 - penalty);
}

double meteor_lite(const TokenSeq& candidate, std::span<const TokenSeq> references, const MeteorParams& p) {
  double best = 0;
  for (const auto& r : references) best = std::max(best, meteor_lite(candidate, r, p));
  return best;
}

CiderIdf::CiderIdf(std::span<const std::vector<TokenSeq>> corpus_refs, int max_n) : max_n_(max_n) {
  if (corpus_refs.empty()) throw Error("cider: empty reference corpus");
  log_n_ = std::log(static_cast<double>(corpus_refs.size()));
  for (const auto& refs : corpus_refs) {
    std::set<std::string> seen;
    for (const auto& r : refs)
      for (int n = 1; n <= max_n_; ++n)
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= r.size(); ++i)
          seen.insert(ngram_key(r, i, static_cast<std::size_t>(n)));
    for (const auto& g : seen) ++df_[g];
  }
}

double CiderIdf::idf(const std::string& ngram_key) const {
  auto it = df_.find(ngram_key);
  const double df = it == df_.end() ? 1.0 : static_cast<double>(std::max<std::size_t>(1, it->second));
  return log_n_ - std::log(df);
}

double CiderIdf::score(const TokenSeq& candidate, std::span<const TokenSeq> references) const {
  if (references.empty()) return 0.0;
  double total = 0;
  for (int n = 1; n <= max_n_; ++n) {
    auto weigh = [&](const TokenSeq& t) {
      auto counts = ngram_counts(t, static_cast<std::size_t>(n));
      std::map<std::string, double> vec;
      for (const auto& [g, c] : counts) vec[g] = static_cast<double>(c) * idf(g);
      return vec;
    };
    auto norm = [](const std::map<std::string, double>& v) {
      double s = 0;
      for (const auto& [g, w] : v) s += w * w;
      return std::sqrt(s);
    };
    const auto cv = weigh(candidate);
    const double cn = norm(cv);
    double sum = 0;
    for (const auto& r : references) {
      const auto rv = weigh(r);
      const double rn = norm(rv);
      if (cn == 0 || rn == 0) continue;
      double dot = 0;
      for (const auto& [g, w] : cv)
        if (auto it = rv.find(g); it != rv.end()) dot += w * it->second;
      sum += dot / (cn * rn);
    }
    total += sum / static_cast<double>(references.size());
  }
  return 10.0 * total / max_n_;
}

double cider(const TokenSeq& candidate, std::span<const TokenSeq> references,
             std::span<const std::vector<TokenSeq>> corpus_refs, int max_n) {
  return CiderIdf(corpus_refs, max_n).score(candidate, references);
}

CorpusScores score_corpus(const std::map<std::string, std::string>& candidates,
                          const std::map<std::string, std::vector<std::string>>& references) {
  std::vector<std::string> missing;
  for (const auto& [id, _] : references)
    if (!candidates.count(id)) missing.push_back("no candidate for " + id);
  for (const auto& [id, _] : candidates)
    if (!references.count(id)) missing.push_back("no reference for " + id);
  if (!missing.empty()) {
    std::string msg = "caption id mismatch:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw Error(msg);
  }

  std::vector<std::vector<TokenSeq>> corpus;
  for (const auto& [id, refs] : references) {
    std::vector<TokenSeq> toks;
    for (const auto& r : refs) toks.push_back(tokenize(r));
    corpus.push_back(std::move(toks));
  }
  CorpusScores out;
  if (corpus.empty()) return out;
  const CiderIdf idf(corpus);

  std::size_t k = 0;
  for (const auto& [id, refs] : references) {
    const auto cand = tokenize(candidates.at(id));
    const auto& rt = corpus[k++];
    MetricScores s{bleu(cand, rt), meteor_lite(cand, rt), idf.score(cand, rt)};
    out.mean.bleu += s.bleu;
    out.mean.meteor += s.meteor;
    out.mean.cider += s.cider;
    out.items[id] = s;
  }
  const double n = static_cast<double>(out.items.size());
  out.mean.bleu /= n;
  out.mean.meteor /= n;
  out.mean.cider /= n;
  return out;
}

AccuracyReport AccuracyReport::from_counts(std::size_t a_s_r, std::size_t a_s_t, std::size_t a_m_r,
                                           std::size_t a_m_t) {
  if (a_s_r > a_s_t || a_m_r > a_m_t) throw Error("accuracy counts exceed totals");
  AccuracyReport r{a_s_r, a_s_t, a_m_r, a_m_t, 0, 0, 0};
  auto pct = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  r.prec_s = pct(a_s_r, a_s_t);
  r.prec_m = pct(a_m_r, a_m_t);
  r.prec_a = pct(a_s_r + a_m_r, a_s_t + a_m_t);
  if (a_s_t > 0 && a_m_t > 0) {
    const double lhs = r.prec_a * static_cast<double>(a_s_t + a_m_t);
    const double rhs = r.prec_s * static_cast<double>(a_s_t) + r.prec_m * static_cast<double>(a_m_t);
    if (std::abs(lhs - rhs) > 1e-9 * std::max(1.0, std::abs(rhs))) throw Error("pooled accuracy identity violated");
  }
  return r;
}

double round1(double percent) { return std::round(percent * 10.0) / 10.0; }

std::vector<char> extract_letters(std::string_view response) {
  auto word = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           static_cast<unsigned char>(c) >= 0x80;
  };
  std::vector<char> out;
  for (std::size_t i = 0; i < response.size(); ++i) {
    char c = response[i];
    if (c >= 'a' && c <= 'e') c = static_cast<char>(c - 'a' + 'A');
    if (c < 'A' || c > 'E') continue;
    if (i > 0 && word(response[i - 1])) continue;
    if (i + 1 < response.size() && word(response[i + 1])) continue;
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

AnswerScoring score_answers(const std::map<std::string, std::string>& responses, const vqa::AnswerKey& key,
                            std::span<const vqa::QaItem> items) {
  std::map<std::string, const vqa::QaItem*> by_id;
  for (const auto& item : items) by_id[item.item_id] = &item;
  for (const auto& [id, _] : key.answers)
    if (!by_id.count(id)) throw Error("answer key item '" + id + "' is not among the questions");
  for (const auto& [id, _] : by_id)
    if (!key.answers.count(id)) throw Error("question '" + id + "' has no answer key entry");

  AnswerScoring out;
  std::size_t s_r = 0, s_t = 0, m_r = 0, m_t = 0;
  for (const auto& [id, truth] : key.answers) {
    const bool single = by_id.at(id)->kind == vqa::Kind::Single;
    bool ok = false;
    if (auto it = responses.find(id); it != responses.end()) {
      const auto letters = extract_letters(it->second);
      ok = std::set<char>(letters.begin(), letters.end()) == truth && letters.size() == truth.size();
    }
    out.correct[id] = ok;
    (single ? s_t : m_t)++;
    if (ok) (single ? s_r : m_r)++;
  }
  for (const auto& [id, _] : responses)
    if (!key.answers.count(id)) out.warnings.push_back("ignoring response for unknown item '" + id + "'");
  out.report = AccuracyReport::from_counts(s_r, s_t, m_r, m_t);
  return out;
}

double random_guess_prec_a(std::size_t single_total, std::size_t multi_total) {
  const std::size_t total = single_total + multi_total;
  if (total == 0) return 0.0;
  return 100.0 * (static_cast<double>(single_total) / 4.0 + static_cast<double>(multi_total) / 25.0) /
         static_cast<double>(total);
}

}  // namespace diagcap::metrics
