#include <cmath>

#include "doctest.h"
#include "oversmooth/objectives.hpp"
#include "oversmooth/rng.hpp"
#include "oversmooth/vocab.hpp"

using namespace oversmooth;

namespace {

// The three-step worked example used throughout: gold log-probs
// (-0.5, -1.0, -0.1) with a configurable <eos> column at the two
// premature positions. V=4, target (3, 3, <eos>).
Tensor worked_example(double eos0, double eos1) {
  Tensor slp = Tensor::full(3, 4, -20.0);
  slp.at(0, 3) = -0.5;
  slp.at(1, 3) = -1.0;
  slp.at(2, Vocabulary::kEos) = -0.1;
  slp.at(0, Vocabulary::kEos) = eos0;
  slp.at(1, Vocabulary::kEos) = eos1;
  return slp;
}

const TokenSeq kWorkedTarget = {3, 3, Vocabulary::kEos};

Tensor uniform_slp(int T, int V) { return Tensor::full(T, V, -std::log(static_cast<double>(V))); }

// Rows where the gold token has log-prob ~0 and everything else is deeply
// improbable; stands in for a one-hot-correct model.
Tensor onehot_slp(const TokenSeq& target, int V) {
  Tensor slp = Tensor::full(static_cast<int>(target.size()), V, -1e4);
  for (size_t t = 0; t < target.size(); ++t) slp.at(static_cast<int>(t), target[t]) = 0.0;
  return slp;
}

Tensor random_slp(Rng& rng, int T, int V) {
  Tensor logits(T, V);
  for (double& x : logits.v) x = rng.uniform_symmetric(3.0);
  return kernel::log_softmax(logits);
}

TokenSeq random_target(Rng& rng, int T, int V) {
  TokenSeq target(T);
  // interior tokens may be <unk> or content, never pad/bos/eos
  for (int t = 0; t + 1 < T; ++t) target[t] = rng.uniform_int(Vocabulary::kUnk, V - 1);
  target[T - 1] = Vocabulary::kEos;
  return target;
}

}  // namespace

TEST_CASE("nll_loss") {
  SUBCASE("uniform rows, V=4, length 2, no smoothing") {
    CHECK(nll_loss(uniform_slp(2, 4), {0, 2}, 0.0) == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("one-hot-correct rows give zero loss") {
    TokenSeq target = {3, 1, 2};
    CHECK(nll_loss(onehot_slp(target, 5), target, 0.0) == 0.0);
  }
  SUBCASE("smoothed 2x3 oracle by direct formula") {
    Tensor slp(2, 3,
               {std::log(0.7), std::log(0.2), std::log(0.1), std::log(0.1), std::log(0.1), std::log(0.8)});
    TokenSeq target = {0, 2};
    const double eps = 0.1;
    double expected = 0.0;
    for (int t = 0; t < 2; ++t) {
      expected -= (1.0 - eps) * slp.at(t, target[t]);
      for (int v = 0; v < 3; ++v) expected -= eps / 3.0 * slp.at(t, v);
    }
    CHECK(nll_loss(slp, target, eps) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(nll_loss(uniform_slp(2, 4), {0}, 0.0), std::invalid_argument);
  }
  SUBCASE("bad epsilon") {
    CHECK_THROWS_AS(nll_loss(uniform_slp(1, 4), {0}, 1.0), std::invalid_argument);
  }
}

TEST_CASE("suffix_log_probs") {
  SUBCASE("worked example cumulative sums") {
    std::vector<double> s = suffix_log_probs(worked_example(-3.0, -1.2), kWorkedTarget);
    REQUIRE(s.size() == 3);
    CHECK(s[0] == doctest::Approx(-1.6).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(-1.1).epsilon(1e-12));
    CHECK(s[2] == doctest::Approx(-0.1).epsilon(1e-12));
  }
  SUBCASE("length one") {
    Tensor slp = uniform_slp(1, 4);
    std::vector<double> s = suffix_log_probs(slp, {Vocabulary::kEos});
    REQUIRE(s.size() == 1);
    CHECK(s[0] == slp.at(0, Vocabulary::kEos));
  }
  SUBCASE("first entry is the total sequence log-probability") {
    Rng rng(9);
    Tensor slp = random_slp(rng, 6, 8);
    TokenSeq target = random_target(rng, 6, 8);
    double total = 0.0;
    for (int t = 0; t < 6; ++t) total += slp.at(t, target[t]);
    CHECK(suffix_log_probs(slp, target)[0] == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("oversmoothing_rate") {
  SUBCASE("no violations") {
    OversmoothingReport r = oversmoothing_rate(worked_example(-3.0, -1.2), kWorkedTarget);
    CHECK(r.rate == 0.0);
    CHECK(r.violations == std::vector<bool>{false, false});
    CHECK(!r.degenerate_length);
  }
  SUBCASE("one violation of two premature positions") {
    OversmoothingReport r = oversmoothing_rate(worked_example(-3.0, -0.9), kWorkedTarget);
    CHECK(r.rate == 0.5);
    CHECK(r.violations == std::vector<bool>{false, true});
  }
  SUBCASE("one-hot-correct model never violates") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      TokenSeq target = random_target(rng, rng.uniform_int(2, 9), 12);
      CHECK(oversmoothing_rate(onehot_slp(target, 12), target).rate == 0.0);
    }
  }
  SUBCASE("length-one target is degenerate with rate 0") {
    OversmoothingReport r = oversmoothing_rate(uniform_slp(1, 4), {Vocabulary::kEos});
    CHECK(r.rate == 0.0);
    CHECK(r.degenerate_length);
  }
  SUBCASE("target must end in eos") {
    CHECK_THROWS_AS(oversmoothing_rate(uniform_slp(2, 4), {3, 3}), std::invalid_argument);
  }
  SUBCASE("lowering the eos column never raises the rate") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
      const int T = rng.uniform_int(2, 11), V = rng.uniform_int(5, 24);
      Tensor slp = random_slp(rng, T, V);
      TokenSeq target = random_target(rng, T, V);
      const double before = oversmoothing_rate(slp, target).rate;
      Tensor shifted = slp;
      for (int t = 0; t + 1 < T; ++t) shifted.at(t, Vocabulary::kEos) -= rng.uniform() * 3.0;
      CHECK(oversmoothing_rate(shifted, target).rate <= before);
    }
  }
}

TEST_CASE("oversmoothing_loss") {
  SUBCASE("worked example with margin 1: terms (0, 1.2, 1)/3") {
    CHECK(oversmoothing_loss(worked_example(-3.0, -0.9), kWorkedTarget, 1.0) ==
          doctest::Approx(2.2 / 3.0).epsilon(1e-12));
  }
  SUBCASE("one-hot-correct model with zero margin") {
    TokenSeq target = {4, 5, Vocabulary::kEos};
    CHECK(oversmoothing_loss(onehot_slp(target, 6), target, 0.0) == 0.0);
  }
  SUBCASE("final-position term vanishes at zero margin") {
    // With m=0, position T contributes max(0, eos - eos) = 0 exactly, so
    // the loss of a length-one target is identically zero.
    Rng rng(21);
    Tensor slp = random_slp(rng, 1, 6);
    CHECK(oversmoothing_loss(slp, {Vocabulary::kEos}, 0.0) == 0.0);
  }
  SUBCASE("negative margin rejected") {
    CHECK_THROWS_AS(oversmoothing_loss(uniform_slp(1, 4), {Vocabulary::kEos}, -0.1), std::invalid_argument);
  }
  SUBCASE("upper-bounds the rate for margin >= 1 on 1000 random instances") {
    Rng rng(2024);
    const double margins[] = {1.0, 2.0, 5.0};
    for (int i = 0; i < 1000; ++i) {
      const int T = rng.uniform_int(2, 30), V = rng.uniform_int(4, 64);
      Tensor slp = random_slp(rng, T, V);
      TokenSeq target = random_target(rng, T, V);
      const double rate = oversmoothing_rate(slp, target).rate;
      const double m = margins[rng.uniform_int(0, 2)];
      CHECK(oversmoothing_loss(slp, target, m) >= rate);
    }
  }
}

TEST_CASE("mixed_loss") {
  Rng rng(33);
  Tensor slp = random_slp(rng, 5, 8);
  TokenSeq target = random_target(rng, 5, 8);

  SUBCASE("alpha 0 is bit-equal to plain NLL") {
    LossConfig cfg;
    cfg.alpha = 0.0;
    CHECK(mixed_loss(slp, target, cfg) == nll_loss(slp, target, 0.0));
  }
  SUBCASE("alpha 0.5 is the arithmetic mean of the components") {
    LossConfig cfg;
    cfg.alpha = 0.5;
    cfg.margin = 1.0;
    const double mean = 0.5 * (nll_loss(slp, target, 0.0) + oversmoothing_loss(slp, target, 1.0));
    CHECK(mixed_loss(slp, target, cfg) == doctest::Approx(mean).epsilon(1e-14));
  }
  SUBCASE("affine in alpha") {
    const double l_nll = nll_loss(slp, target, 0.0);
    const double l_os = oversmoothing_loss(slp, target, 1e-4);
    for (double a : {0.0, 0.25, 0.5, 0.75}) {
      LossConfig cfg;
      cfg.alpha = a;
      CHECK(mixed_loss(slp, target, cfg) == doctest::Approx(l_nll + a * (l_os - l_nll)).epsilon(1e-12));
    }
  }
  SUBCASE("config validation") {
    LossConfig cfg;
    cfg.alpha = 1.0;
    CHECK_THROWS_AS(mixed_loss(slp, target, cfg), std::invalid_argument);
    cfg.alpha = 0.5;
    cfg.label_smoothing = 0.1;
    CHECK_THROWS_AS(mixed_loss(slp, target, cfg), std::invalid_argument);
  }
}

TEST_CASE("eos_prefix_stats") {
  SUBCASE("eos strictly smallest in a V=3 row gives normalized rank 1") {
    Tensor slp(2, 3, {std::log(0.5), std::log(0.4), std::log(0.1), -0.1, -2.0, -4.0});
    EosPrefixStats s = eos_prefix_stats(slp, {0, Vocabulary::kEos});
    CHECK(s.mean_normalized_rank == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("uniform rows, V=4: ties put eos (index 2) at rank 3 -> 0.75") {
    EosPrefixStats s = eos_prefix_stats(uniform_slp(3, 4), {3, 3, Vocabulary::kEos});
    CHECK(s.mean_normalized_rank == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("mean eos log-prob over premature rows") {
    EosPrefixStats s = eos_prefix_stats(worked_example(-3.0, -1.2), kWorkedTarget);
    CHECK(s.mean_eos_logprob == doctest::Approx(-2.1).epsilon(1e-12));
  }
  SUBCASE("degenerate below two positions") {
    CHECK(eos_prefix_stats(uniform_slp(1, 4), {Vocabulary::kEos}).degenerate);
  }
}

TEST_CASE("perplexity") {
  SUBCASE("uniform model over V=50") {
    Tensor slp = uniform_slp(3, 50);
    TokenSeq target = {10, 20, Vocabulary::kEos};
    CHECK(perplexity({{&slp, &target}}) == doctest::Approx(50.0).epsilon(1e-9));
  }
  SUBCASE("one-hot-correct model") {
    TokenSeq target = {4, Vocabulary::kEos};
    Tensor slp = onehot_slp(target, 6);
    CHECK(perplexity({{&slp, &target}}) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two-sequence corpus by direct formula") {
    Tensor a = Tensor::full(2, 4, -20.0), b = Tensor::full(3, 4, -20.0);
    TokenSeq ta = {3, Vocabulary::kEos}, tb = {3, 3, Vocabulary::kEos};
    a.at(0, 3) = -0.4;
    a.at(1, 2) = -0.6;
    b.at(0, 3) = -1.0;
    b.at(1, 3) = -0.5;
    b.at(2, 2) = -0.2;
    const double expected = std::exp((0.4 + 0.6 + 1.0 + 0.5 + 0.2) / 5.0);
    CHECK(perplexity({{&a, &ta}, {&b, &tb}}) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("empty corpus rejected") {
    CHECK_THROWS_AS(perplexity({}), std::invalid_argument);
  }
}

TEST_CASE("taped objectives agree with the raw versions and pass grad_check") {
  Rng rng(55);
  Tensor logits(4, 8);
  for (double& x : logits.v) x = rng.uniform_symmetric(2.0);
  TokenSeq target = random_target(rng, 4, 8);

  SUBCASE("values match within 1e-12") {
    Tensor slp_raw = kernel::log_softmax(logits);
    LossConfig cfg;
    cfg.alpha = 0.5;
    cfg.margin = 1e-4;

    Tape tape;
    Var slp = tape.log_softmax(tape.constant(logits));
    CHECK(std::abs(tape.value(taped_nll_loss(tape, slp, target, 0.1)).v[0] -
                   nll_loss(slp_raw, target, 0.1)) <= 1e-12);
    CHECK(std::abs(tape.value(taped_oversmoothing_loss(tape, slp, target, 1e-4)).v[0] -
                   oversmoothing_loss(slp_raw, target, 1e-4)) <= 1e-12);
    CHECK(std::abs(tape.value(taped_mixed_loss(tape, slp, target, cfg)).v[0] -
                   mixed_loss(slp_raw, target, cfg)) <= 1e-12);
  }
  SUBCASE("gradient through logits matches finite differences") {
    for (double a : {0.0, 0.5, 0.9}) {
      LossConfig cfg;
      cfg.alpha = a;
      cfg.margin = 1.0;
      auto build = [&](Tape& t, const std::vector<Var>& p) {
        return taped_mixed_loss(t, t.log_softmax(p[0]), target, cfg);
      };
      CHECK(grad_check(build, {logits}, 1e-6) <= 1e-6);
    }
  }
}
