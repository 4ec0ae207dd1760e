#include "oversmooth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>

#include "oversmooth/vocab.hpp"

namespace oversmooth {

namespace {

constexpr int kMaxOrder = 4;

// Tokens excluding a terminal <eos> if present.
size_t content_len(const TokenSeq& seq) {
  size_t n = seq.size();
  if (n > 0 && seq.back() == Vocabulary::kEos) --n;
  return n;
}

using NgramCounts = std::map<std::vector<int>, long>;

NgramCounts count_ngrams(const TokenSeq& seq, size_t len, int order) {
  NgramCounts counts;
  if (len >= static_cast<size_t>(order))
    for (size_t i = 0; i + order <= len; ++i)
      ++counts[std::vector<int>(seq.begin() + i, seq.begin() + i + order)];
  return counts;
}

void check_pairs(const std::vector<TokenSeq>& refs, const std::vector<TokenSeq>& hyps, const char* op) {
  if (refs.empty()) throw std::invalid_argument(std::string(op) + ": empty corpus");
  if (refs.size() != hyps.size())
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(refs.size()) + " references vs " +
                                std::to_string(hyps.size()) + " hypotheses");
}

}  // namespace

double corpus_bleu(const std::vector<TokenSeq>& references, const std::vector<TokenSeq>& hypotheses) {
  check_pairs(references, hypotheses, "corpus_bleu");

  long ref_len = 0, hyp_len = 0;
  long matched[kMaxOrder] = {0}, total[kMaxOrder] = {0};

  for (size_t i = 0; i < references.size(); ++i) {
    const size_t rlen = content_len(references[i]);
    const size_t hlen = content_len(hypotheses[i]);
    ref_len += static_cast<long>(rlen);
    hyp_len += static_cast<long>(hlen);
    for (int n = 1; n <= kMaxOrder; ++n) {
      const NgramCounts ref_counts = count_ngrams(references[i], rlen, n);
      for (const auto& [ngram, count] : count_ngrams(hypotheses[i], hlen, n)) {
        total[n - 1] += count;
        auto it = ref_counts.find(ngram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched[n]) / total[n]);
  }
  const double bp = hyp_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / hyp_len) : 1.0;
  return 100.0 * bp * std::exp(log_precision / kMaxOrder);
}

double length_ratio(const std::vector<TokenSeq>& references, const std::vector<TokenSeq>& hypotheses) {
  check_pairs(references, hypotheses, "length_ratio");
  double sum = 0.0;
  for (size_t i = 0; i < references.size(); ++i) {
    const double r = std::max<size_t>(1, content_len(references[i]));
    const double h = std::max<size_t>(1, content_len(hypotheses[i]));
    sum += r / h;
  }
  return sum / references.size();
}

}  // namespace oversmooth
