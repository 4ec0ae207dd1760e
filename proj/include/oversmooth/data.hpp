#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oversmooth/types.hpp"
#include "oversmooth/vocab.hpp"

namespace oversmooth {

// Synthetic translation task: tokenwise bijection of random source
// sentences, with target-length jitter and (train only) truncation noise
// that plants genuine premature-<eos> mass.
struct TaskConfig {
  int vocab_src = 64;  // includes the 4 reserved tokens
  int vocab_tgt = 64;
  int min_len = 4;     // content tokens, excluding <eos>
  int max_len = 16;
  double truncation_rate = 0.15;  // train-only probability of target truncation
  double jitter_p = 0.3;          // geometric parameter for 0-2 extra target tokens
  int train_size = 10000;
  int dev_size = 500;
  int test_size = 1000;
  uint64_t seed = 1;

  void validate() const;
};

struct Corpus {
  std::vector<SentencePair> pairs;
  std::string split;  // train / dev / test
  uint64_t fingerprint = 0;

  void refingerprint();
};

struct CorpusSet {
  Corpus train, dev, test;
  Vocabulary src_vocab, tgt_vocab;
  int train_truncated = 0;  // pairs whose target was truncation-noised
};

uint64_t corpus_fingerprint(const std::vector<SentencePair>& pairs);

CorpusSet generate_corpus(const TaskConfig& config);

// One pair per line, two tab-separated fields of space-separated surface
// forms; <eos> implicit (stripped on save, appended on load).
void save_corpus(const Corpus& corpus, const Vocabulary& src, const Vocabulary& tgt, const std::string& path);
Corpus load_corpus(const std::string& path, const Vocabulary& src, const Vocabulary& tgt,
                   const std::string& split);

// Convenience: writes train.tsv/dev.tsv/test.tsv plus vocab files into a
// directory; load_corpus_dir reads them back.
void save_corpus_dir(const CorpusSet& set, const std::string& dir);
CorpusSet load_corpus_dir(const std::string& dir);

// Deterministic epoch shuffle derived from (seed, epoch). Every index
// appears exactly once; batches of `batch_size` with a final partial batch.
std::vector<std::vector<int>> epoch_batches(size_t corpus_size, int batch_size, uint64_t seed, int epoch);

}  // namespace oversmooth
