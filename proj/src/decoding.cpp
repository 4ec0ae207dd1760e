#include "oversmooth/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oversmooth/vocab.hpp"

namespace oversmooth {

void DecodeConfig::validate() const {
  if (beam_width < 1) throw std::invalid_argument("DecodeConfig: beam_width must be >= 1");
  if (max_len_slope <= 0.0) throw std::invalid_argument("DecodeConfig: max_len_slope must be > 0");
  if (max_len_offset < 0) throw std::invalid_argument("DecodeConfig: max_len_offset must be >= 0");
}

int max_decode_length(const DecodeConfig& config, size_t source_len) {
  return static_cast<int>(std::floor(config.max_len_slope * static_cast<double>(source_len))) +
         config.max_len_offset;
}

Stepper make_model_stepper(const ModelParams& params, const TokenSeq& source) {
  if (source.empty()) throw std::invalid_argument("decode: empty source");
  Stepper s;
  s.vocab_size = params.config.vocab_tgt;
  Tensor enc = encode(params, source);
  s.init_state = initial_decoder_state(enc);
  s.step = [&params, enc = std::move(enc)](const Tensor& state, int prev) {
    return decode_step(params, enc, state, prev);
  };
  return s;
}

namespace {

bool lex_less(const TokenSeq& a, const TokenSeq& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Ranking used everywhere: higher score first, then lexicographic tokens.
bool better(double sa, const TokenSeq& ta, double sb, const TokenSeq& tb) {
  if (sa != sb) return sa > sb;
  return lex_less(ta, tb);
}

struct Live {
  TokenSeq tokens;
  double log_prob = 0.0;
  Tensor state;
};

}  // namespace

std::vector<Hypothesis> beam_search(const Stepper& stepper, int max_len, const DecodeConfig& config) {
  config.validate();
  if (max_len < 1) throw std::invalid_argument("beam_search: max_len must be >= 1");
  const int k = config.beam_width;
  const int V = stepper.vocab_size;

  std::vector<Live> live;
  live.push_back(Live{{}, 0.0, stepper.init_state});
  std::vector<Hypothesis> pool;

  auto sort_pool = [&pool] {
    std::sort(pool.begin(), pool.end(), [](const Hypothesis& a, const Hypothesis& b) {
      return better(a.log_prob, a.tokens, b.log_prob, b.tokens);
    });
  };

  while (!live.empty()) {
    const int cur_len = static_cast<int>(live.front().tokens.size());
    if (cur_len == max_len - 1) {
      // Length bound: the only legal continuation is <eos>.
      for (Live& h : live) {
        const int prev = h.tokens.empty() ? Vocabulary::kBos : h.tokens.back();
        StepResult r = stepper.step(h.state, prev);
        Hypothesis fin;
        fin.tokens = std::move(h.tokens);
        fin.tokens.push_back(Vocabulary::kEos);
        fin.log_prob = h.log_prob + r.log_probs.v[Vocabulary::kEos];
        fin.finished = true;
        fin.force_finished = true;
        pool.push_back(std::move(fin));
      }
      live.clear();
      break;
    }

    struct Candidate {
      int parent;
      int token;
      double score;
      TokenSeq tokens;
    };
    std::vector<Candidate> cands;
    std::vector<Tensor> new_states(live.size());
    for (size_t i = 0; i < live.size(); ++i) {
      const Live& h = live[i];
      const int prev = h.tokens.empty() ? Vocabulary::kBos : h.tokens.back();
      StepResult r = stepper.step(h.state, prev);
      new_states[i] = std::move(r.state);
      for (int tok = 0; tok < V; ++tok) {
        if (tok == Vocabulary::kPad || tok == Vocabulary::kBos) continue;
        Candidate c;
        c.parent = static_cast<int>(i);
        c.token = tok;
        c.score = h.log_prob + r.log_probs.v[tok];
        c.tokens = h.tokens;
        c.tokens.push_back(tok);
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return better(a.score, a.tokens, b.score, b.tokens);
    });
    if (static_cast<int>(cands.size()) > k) cands.resize(k);

    std::vector<Live> next;
    for (Candidate& c : cands) {
      if (c.token == Vocabulary::kEos) {
        Hypothesis fin;
        fin.tokens = std::move(c.tokens);
        fin.log_prob = c.score;
        fin.finished = true;
        pool.push_back(std::move(fin));
      } else {
        next.push_back(Live{std::move(c.tokens), c.score, new_states[c.parent]});
      }
    }
    live = std::move(next);

    // Safe early stop: scores only decrease with length, so once the
    // k-th best finished score beats every survivor the pool is final.
    if (static_cast<int>(pool.size()) >= k && !live.empty()) {
      sort_pool();
      const double kth = pool[k - 1].log_prob;
      double best_live = live.front().log_prob;
      for (const Live& h : live) best_live = std::max(best_live, h.log_prob);
      if (best_live <= kth) break;
    }
  }

  sort_pool();
  return pool;
}

std::vector<Hypothesis> beam_search(const ModelParams& params, const TokenSeq& source,
                                    const DecodeConfig& config) {
  Stepper s = make_model_stepper(params, source);
  return beam_search(s, max_decode_length(config, source.size()), config);
}

namespace {

void exhaustive_visit(const Stepper& stepper, int max_len, TokenSeq& prefix, const Tensor& state,
                      double log_prob, Hypothesis& best) {
  const int prev = prefix.empty() ? Vocabulary::kBos : prefix.back();
  StepResult r = stepper.step(state, prev);

  TokenSeq finished = prefix;
  finished.push_back(Vocabulary::kEos);
  const double fin_score = log_prob + r.log_probs.v[Vocabulary::kEos];
  if (best.tokens.empty() || better(fin_score, finished, best.log_prob, best.tokens)) {
    best.tokens = finished;
    best.log_prob = fin_score;
    best.finished = true;
  }

  if (static_cast<int>(prefix.size()) + 1 >= max_len) return;
  for (int tok = 0; tok < stepper.vocab_size; ++tok) {
    if (tok == Vocabulary::kPad || tok == Vocabulary::kBos || tok == Vocabulary::kEos) continue;
    prefix.push_back(tok);
    exhaustive_visit(stepper, max_len, prefix, r.state, log_prob + r.log_probs.v[tok], best);
    prefix.pop_back();
  }
}

}  // namespace

Hypothesis exhaustive_map(const Stepper& stepper, int max_len) {
  if (max_len < 1) throw std::invalid_argument("exhaustive_map: max_len must be >= 1");
  const double branch = stepper.vocab_size - 3;  // pad/bos never emitted, eos terminates
  double count = 0.0, level = 1.0;
  for (int l = 1; l <= max_len; ++l) {
    count += level;
    level *= branch;
  }
  if (count > 1e6)
    throw std::invalid_argument("exhaustive_map: " + std::to_string(static_cast<long long>(count)) +
                                " candidate sequences exceed the 1e6 guard; use a smaller instance");

  Hypothesis best;
  TokenSeq prefix;
  exhaustive_visit(stepper, max_len, prefix, stepper.init_state, 0.0, best);
  return best;
}

Hypothesis exhaustive_map(const ModelParams& params, const TokenSeq& source, int max_len) {
  Stepper s = make_model_stepper(params, source);
  return exhaustive_map(s, max_len);
}

}  // namespace oversmooth
