#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oversmooth/checkpoint.hpp"
#include "oversmooth/model.hpp"

using namespace oversmooth;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_embed = 8;
  c.d_hidden = 8;
  c.vocab_src = 16;
  c.vocab_tgt = 16;
  c.dropout_rate = 0.0;
  c.seed = 1;
  return c;
}

std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("osmooth_test_" + name)).string();
}

}  // namespace

TEST_CASE("init_params is deterministic in the seed") {
  ModelConfig c = tiny_config();
  ModelParams a = init_params(c), b = init_params(c);
  for (const auto& [name, t] : a.tensors) CHECK(t == b.t(name));

  c.seed = 2;
  ModelParams d = init_params(c);
  bool any_diff = false;
  for (const auto& [name, t] : a.tensors) any_diff = any_diff || !(t == d.t(name));
  CHECK(any_diff);
}

TEST_CASE("parameter count matches the hand-counted architecture") {
  // embeddings 2*16*8, two GRU sides 2*3*(8*8+8*8+8), projection 16*16+16
  const long expected = 128 + 128 + 816 + 256 + 16;
  ModelParams p = init_params(tiny_config());
  long total = 0;
  for (const auto& [name, t] : p.tensors) total += static_cast<long>(t.size());
  CHECK(total == expected);
}

TEST_CASE("encode") {
  ModelParams p = init_params(tiny_config());
  SUBCASE("single-token source") {
    Tensor s = encode(p, {Vocabulary::kEos});
    CHECK(s.rows == 1);
    CHECK(s.cols == 8);
    CHECK(s.all_finite());
  }
  SUBCASE("determinism") {
    TokenSeq src = {4, 5, 6, Vocabulary::kEos};
    CHECK(encode(p, src) == encode(p, src));
  }
  SUBCASE("prefix property of the unidirectional recurrence") {
    TokenSeq longer = {4, 5, 6, 7, Vocabulary::kEos};
    TokenSeq shorter(longer.begin(), longer.begin() + 3);
    Tensor sl = encode(p, longer), ss = encode(p, shorter);
    for (int r = 0; r < ss.rows; ++r)
      for (int c = 0; c < ss.cols; ++c) CHECK(sl.at(r, c) == ss.at(r, c));
  }
  SUBCASE("out-of-vocabulary token") {
    CHECK_THROWS_AS(encode(p, {99}), std::out_of_range);
  }
}

TEST_CASE("decode_step") {
  ModelParams p = init_params(tiny_config());
  Tensor enc = encode(p, {4, 5, Vocabulary::kEos});
  Tensor h0 = initial_decoder_state(enc);
  SUBCASE("rows are normalized distributions") {
    StepResult r = decode_step(p, enc, h0, Vocabulary::kBos);
    double s = 0.0;
    for (double lp : r.log_probs.v) s += std::exp(lp);
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  SUBCASE("repeat call identical") {
    StepResult a = decode_step(p, enc, h0, 7), b = decode_step(p, enc, h0, 7);
    CHECK(a.log_probs == b.log_probs);
    CHECK(a.state == b.state);
  }
  SUBCASE("out-of-range token") {
    CHECK_THROWS_AS(decode_step(p, enc, h0, 16), std::out_of_range);
  }
}

TEST_CASE("sequence_log_probs") {
  ModelParams p = init_params(tiny_config());
  SentencePair pair{{4, 5, Vocabulary::kEos}, {6, 7, 8, Vocabulary::kEos}};

  SUBCASE("minimal target") {
    Tensor slp = sequence_log_probs(p, SentencePair{{4, Vocabulary::kEos}, {Vocabulary::kEos}});
    CHECK(slp.rows == 1);
    CHECK(slp.cols == 16);
  }
  SUBCASE("empty target rejected") {
    CHECK_THROWS_AS(sequence_log_probs(p, SentencePair{{4, Vocabulary::kEos}, {}}), std::invalid_argument);
  }
  SUBCASE("chaining decode_step reproduces rows bit-exactly") {
    Tensor slp = sequence_log_probs(p, pair);
    Tensor enc = encode(p, pair.source);
    Tensor state = initial_decoder_state(enc);
    int prev = Vocabulary::kBos;
    double chained_lp = 0.0;
    for (size_t t = 0; t < pair.target.size(); ++t) {
      StepResult r = decode_step(p, enc, state, prev);
      for (int v = 0; v < slp.cols; ++v) CHECK(slp.at(static_cast<int>(t), v) == r.log_probs.v[v]);
      chained_lp += r.log_probs.v[pair.target[t]];
      state = std::move(r.state);
      prev = pair.target[t];
    }
    double gold_sum = 0.0;
    for (size_t t = 0; t < pair.target.size(); ++t) gold_sum += slp.at(static_cast<int>(t), pair.target[t]);
    CHECK(gold_sum == doctest::Approx(chained_lp).epsilon(1e-15));
  }
  SUBCASE("inference mode twice is bit-identical") {
    CHECK(sequence_log_probs(p, pair) == sequence_log_probs(p, pair));
  }
  SUBCASE("taped forward without dropout matches the raw path") {
    Tensor raw = sequence_log_probs(p, pair);
    Tape tape;
    TapedModel model(tape, p, /*train=*/false, nullptr);
    const Tensor& taped = tape.value(model.sequence_log_probs(pair));
    REQUIRE(taped.rows == raw.rows);
    for (size_t i = 0; i < raw.v.size(); ++i) CHECK(std::abs(raw.v[i] - taped.v[i]) <= 1e-12);
  }
  SUBCASE("every row has logsumexp zero") {
    Tensor slp = sequence_log_probs(p, pair);
    for (int r = 0; r < slp.rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < slp.cols; ++c) s += std::exp(slp.at(r, c));
      CHECK(std::abs(std::log(s)) <= 1e-9);
    }
  }
}

TEST_CASE("checkpoint round-trip and failure modes") {
  ModelParams p = init_params(tiny_config());
  p.update_count = 123;
  p.alpha = 0.45;
  const std::string path = tmp_path("ckpt.bin");
  save_checkpoint(p, path);

  SUBCASE("round-trip is bit-exact including metadata") {
    ModelParams q = load_checkpoint(path);
    CHECK(q.config == p.config);
    CHECK(q.update_count == 123);
    CHECK(q.alpha == 0.45);
    for (const auto& [name, t] : p.tensors) CHECK(t == q.t(name));
  }
  SUBCASE("truncated file") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string short_path = tmp_path("ckpt_short.bin");
    std::ofstream(short_path, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(load_checkpoint(short_path), CheckpointCorrupt);
  }
  SUBCASE("corrupt header") {
    const std::string bad = tmp_path("ckpt_bad.bin");
    std::ofstream(bad) << "notackpt version=1\n";
    CHECK_THROWS_AS(load_checkpoint(bad), CheckpointCorrupt);
  }
  SUBCASE("unknown version") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string vpath = tmp_path("ckpt_v9.bin");
    std::string mutated = bytes;
    mutated.replace(mutated.find("version=1"), 9, "version=9");
    std::ofstream(vpath, std::ios::binary) << mutated;
    CHECK_THROWS_AS(load_checkpoint(vpath), CheckpointVersion);
  }
  SUBCASE("vocabulary size mismatch names both sizes") {
    Vocabulary big = Vocabulary::synthetic("s", 20);
    Vocabulary tgt = Vocabulary::synthetic("t", 16);
    CHECK_THROWS_WITH_AS(load_checkpoint(path, big, tgt), doctest::Contains("16"), CheckpointShape);
    try {
      load_checkpoint(path, big, tgt);
    } catch (const CheckpointShape& e) {
      CHECK(std::string(e.what()).find("20") != std::string::npos);
    }
  }
}
