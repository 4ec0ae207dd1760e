#include "oversmooth/data.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "oversmooth/rng.hpp"

namespace oversmooth {

void TaskConfig::validate() const {
  if (min_len < 1 || max_len < min_len) throw std::invalid_argument("TaskConfig: need 1 <= min_len <= max_len");
  if (truncation_rate < 0.0 || truncation_rate >= 1.0)
    throw std::invalid_argument("TaskConfig: truncation_rate must be in [0,1)");
  if (jitter_p < 0.0 || jitter_p >= 1.0) throw std::invalid_argument("TaskConfig: jitter_p must be in [0,1)");
  if (train_size < 1 || dev_size < 1 || test_size < 1) throw std::invalid_argument("TaskConfig: empty split");
  const int content_src = vocab_src - Vocabulary::kNumReserved;
  const int content_tgt = vocab_tgt - Vocabulary::kNumReserved;
  if (content_src < 1 || content_tgt < content_src)
    throw std::invalid_argument("TaskConfig: target content vocabulary too small for a bijection from source");
}

uint64_t corpus_fingerprint(const std::vector<SentencePair>& pairs) {
  // FNV-1a over token ids with side/pair separators.
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](uint64_t x) {
    h ^= x;
    h *= 1099511628211ull;
  };
  for (const SentencePair& p : pairs) {
    for (int t : p.source) mix(static_cast<uint64_t>(t) + 1);
    mix(0xfffe);
    for (int t : p.target) mix(static_cast<uint64_t>(t) + 1);
    mix(0xffff);
  }
  return h;
}

void Corpus::refingerprint() { fingerprint = corpus_fingerprint(pairs); }

namespace {

SentencePair generate_pair(const TaskConfig& cfg, const std::vector<int>& bijection, bool allow_truncation,
                           Rng& rng, bool* truncated_out) {
  const int content_src = cfg.vocab_src - Vocabulary::kNumReserved;
  const int L = rng.uniform_int(cfg.min_len, cfg.max_len);

  SentencePair p;
  for (int i = 0; i < L; ++i) p.source.push_back(Vocabulary::kNumReserved + rng.uniform_int(0, content_src - 1));

  for (int tok : p.source) p.target.push_back(bijection[tok - Vocabulary::kNumReserved]);
  // Length jitter: 0-2 extra mapped tokens, truncated-geometric(jitter_p).
  int extra = 0;
  while (extra < 2 && rng.bernoulli(cfg.jitter_p)) {
    p.target.push_back(bijection[rng.uniform_int(0, content_src - 1)]);
    ++extra;
  }

  bool truncated = false;
  if (allow_truncation && rng.bernoulli(cfg.truncation_rate) && p.target.size() >= 2) {
    const int cut = rng.uniform_int(1, static_cast<int>(p.target.size()) - 1);
    p.target.resize(cut);
    truncated = true;
  }
  if (truncated_out) *truncated_out = truncated;

  p.source.push_back(Vocabulary::kEos);
  p.target.push_back(Vocabulary::kEos);
  return p;
}

}  // namespace

CorpusSet generate_corpus(const TaskConfig& config) {
  config.validate();
  CorpusSet set;
  set.src_vocab = Vocabulary::synthetic("s", config.vocab_src);
  set.tgt_vocab = Vocabulary::synthetic("t", config.vocab_tgt);

  Rng rng(config.seed);
  const int content_src = config.vocab_src - Vocabulary::kNumReserved;
  const int content_tgt = config.vocab_tgt - Vocabulary::kNumReserved;

  // Fixed random bijection: source content token -> target content token,
  // from a Fisher-Yates shuffle of the target content ids.
  std::vector<int> bijection(content_tgt);
  for (int i = 0; i < content_tgt; ++i) bijection[i] = Vocabulary::kNumReserved + i;
  for (int i = content_tgt - 1; i > 0; --i) std::swap(bijection[i], bijection[rng.uniform_int(0, i)]);
  bijection.resize(content_src);

  auto fill = [&](Corpus& c, const std::string& split, int n, bool noisy) {
    c.split = split;
    c.pairs.reserve(n);
    for (int i = 0; i < n; ++i) {
      bool truncated = false;
      c.pairs.push_back(generate_pair(config, bijection, noisy, rng, &truncated));
      if (truncated) ++set.train_truncated;
    }
    c.refingerprint();
  };
  fill(set.train, "train", config.train_size, true);
  fill(set.dev, "dev", config.dev_size, false);
  fill(set.test, "test", config.test_size, false);
  return set;
}

void save_corpus(const Corpus& corpus, const Vocabulary& src, const Vocabulary& tgt, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_corpus: cannot write " + path);
  for (const SentencePair& p : corpus.pairs) {
    for (size_t i = 0; i + 1 < p.source.size(); ++i) f << (i ? " " : "") << src.surface(p.source[i]);
    f << "\t";
    for (size_t i = 0; i + 1 < p.target.size(); ++i) f << (i ? " " : "") << tgt.surface(p.target[i]);
    f << "\n";
  }
}

namespace {

TokenSeq parse_tokens(const std::string& field, const Vocabulary& vocab, const std::string& path, int line_no) {
  TokenSeq seq;
  std::istringstream ss(field);
  std::string tok;
  while (ss >> tok) {
    const int id = vocab.lookup_strict(tok);
    if (id < 0)
      throw std::runtime_error("load_corpus: " + path + ":" + std::to_string(line_no) + ": unknown token '" +
                               tok + "'");
    if (id < Vocabulary::kNumReserved)
      throw std::runtime_error("load_corpus: " + path + ":" + std::to_string(line_no) +
                               ": reserved token '" + tok + "' in sentence body");
    seq.push_back(id);
  }
  if (seq.empty())
    throw std::runtime_error("load_corpus: " + path + ":" + std::to_string(line_no) + ": empty sentence");
  seq.push_back(Vocabulary::kEos);
  return seq;
}

}  // namespace

Corpus load_corpus(const std::string& path, const Vocabulary& src, const Vocabulary& tgt,
                   const std::string& split) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_corpus: cannot read " + path);
  Corpus c;
  c.split = split;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab1 = line.find('\t');
    if (tab1 == std::string::npos || line.find('\t', tab1 + 1) != std::string::npos)
      throw std::runtime_error("load_corpus: " + path + ":" + std::to_string(line_no) +
                               ": expected exactly two tab-separated fields");
    SentencePair p;
    p.source = parse_tokens(line.substr(0, tab1), src, path, line_no);
    p.target = parse_tokens(line.substr(tab1 + 1), tgt, path, line_no);
    c.pairs.push_back(std::move(p));
  }
  c.refingerprint();
  return c;
}

void save_corpus_dir(const CorpusSet& set, const std::string& dir) {
  std::filesystem::create_directories(dir);
  set.src_vocab.save(dir + "/vocab.src");
  set.tgt_vocab.save(dir + "/vocab.tgt");
  save_corpus(set.train, set.src_vocab, set.tgt_vocab, dir + "/train.tsv");
  save_corpus(set.dev, set.src_vocab, set.tgt_vocab, dir + "/dev.tsv");
  save_corpus(set.test, set.src_vocab, set.tgt_vocab, dir + "/test.tsv");
}

CorpusSet load_corpus_dir(const std::string& dir) {
  CorpusSet set;
  set.src_vocab = Vocabulary::load(dir + "/vocab.src");
  set.tgt_vocab = Vocabulary::load(dir + "/vocab.tgt");
  set.train = load_corpus(dir + "/train.tsv", set.src_vocab, set.tgt_vocab, "train");
  set.dev = load_corpus(dir + "/dev.tsv", set.src_vocab, set.tgt_vocab, "dev");
  set.test = load_corpus(dir + "/test.tsv", set.src_vocab, set.tgt_vocab, "test");
  return set;
}

std::vector<std::vector<int>> epoch_batches(size_t corpus_size, int batch_size, uint64_t seed, int epoch) {
  if (corpus_size == 0) throw std::invalid_argument("epoch_batches: empty corpus");
  if (batch_size < 1) throw std::invalid_argument("epoch_batches: batch_size must be >= 1");
  std::vector<int> order(corpus_size);
  for (size_t i = 0; i < corpus_size; ++i) order[i] = static_cast<int>(i);
  Rng rng(Rng::mix(seed, static_cast<uint64_t>(epoch)));
  for (int i = static_cast<int>(corpus_size) - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);

  std::vector<std::vector<int>> batches;
  for (size_t start = 0; start < corpus_size; start += batch_size) {
    const size_t end = std::min(corpus_size, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace oversmooth
