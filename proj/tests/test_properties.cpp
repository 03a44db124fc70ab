// Randomized invariants driven by the xorshift generator in oracles.hpp.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "smile/checkpoint.hpp"
#include "smile/losses.hpp"
#include "smile/metrics.hpp"
#include "smile/self_paced.hpp"
#include "smile/trainer.hpp"

using namespace smile;

namespace {

std::vector<double> random_values(oracle::Gen& g, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = g.range(lo, hi);
  return v;
}

std::u32string random_word(oracle::Gen& g, std::size_t max_len) {
  std::u32string s(g.below(max_len + 1), U'a');
  for (auto& c : s) c = static_cast<char32_t>(U'a' + g.below(4));
  return s;
}

}  // namespace

TEST(Property, EntropyWithinBounds) {
  oracle::Gen g(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 2 + g.below(30);
    const auto p = g.simplex(k);
    const double h = step_entropy(Tensor::constant({k}, p), EntropyVariant::shannon).item();
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(k)) + 1e-12);
    EXPECT_NEAR(h, oracle::shannon(p), 1e-12);
    const double nll = step_entropy(Tensor::constant({k}, p), EntropyVariant::pseudo_nll).item();
    EXPECT_NEAR(nll, oracle::pseudo_nll(p), 1e-12);
  }
}

TEST(Property, SoftmaxIsShiftInvariantAndNormalized) {
  oracle::Gen g(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t r = 1 + g.below(4), k = 2 + g.below(10);
    auto x = random_values(g, r * k, -30, 30);
    const double shift = g.range(-500, 500);
    auto y = x;
    for (double& v : y) v += shift;
    const Tensor a = softmax(Tensor::constant({r, k}, x));
    const Tensor b = softmax(Tensor::constant({r, k}, y));
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        s += a[i * k + j];
        EXPECT_NEAR(a[i * k + j], b[i * k + j], 1e-9);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Property, MatmulDistributesOverAddition) {
  oracle::Gen g(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + g.below(5), n = 1 + g.below(5), p = 1 + g.below(5);
    const Tensor a = Tensor::constant({m, n}, random_values(g, m * n, -2, 2));
    const Tensor b = Tensor::constant({n, p}, random_values(g, n * p, -2, 2));
    const Tensor c = Tensor::constant({n, p}, random_values(g, n * p, -2, 2));
    const Tensor lhs = matmul(a, add(b, c));
    const Tensor rhs = add(matmul(a, b), matmul(a, c));
    for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
  }
}

TEST(Property, EditDistanceIsAMetric) {
  oracle::Gen g(14);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_word(g, 6), b = random_word(g, 6), c = random_word(g, 6);
    const auto ab = edit_distance(a, b);
    EXPECT_EQ(ab, edit_distance(b, a));
    EXPECT_EQ(edit_distance(a, a), 0u);
    EXPECT_LE(edit_distance(a, c), ab + edit_distance(b, c));
    EXPECT_LE(ab, std::max(a.size(), b.size()));
    EXPECT_GE(ab, a.size() > b.size() ? a.size() - b.size() : b.size() - a.size());
  }
}

TEST(Property, SelectionGrowsWithPortion) {
  oracle::Gen g(15);
  for (int trial = 0; trial < 300; ++trial) {
    PredictionPool pool;
    const std::size_t n = 1 + g.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = std::round(g.unit() * 8) / 8;
      pool.entries.push_back({i / 3, i % 3, g.below(4), h, Tensor::scalar(h)});
    }
    const double lo = g.unit(), hi = std::min(1.0, lo + g.unit());
    const auto small = select(pool, PacingSchedule{lo, 0.0}, 0);
    const auto large = select(pool, PacingSchedule{hi, 0.0}, 0);
    const std::set<std::size_t> big(large.chosen.begin(), large.chosen.end());
    for (auto i : small.chosen) EXPECT_TRUE(big.count(i));
    for (const auto& c : large.classes) {
      EXPECT_EQ(c.quota, static_cast<std::size_t>(std::ceil(static_cast<double>(c.pool_size) * hi)));
      // Every chosen entry is at least as confident as every unchosen one.
      double worst_chosen = -1.0;
      for (auto i : c.chosen) worst_chosen = std::max(worst_chosen, pool.entries[i].entropy_value);
      for (std::size_t i = 0; i < n; ++i) {
        if (pool.entries[i].pseudo_class == c.pseudo_class && !big.count(i)) {
          EXPECT_GE(pool.entries[i].entropy_value, worst_chosen);
        }
      }
    }
  }
}

TEST(Property, PortionIsMonotoneAndCapped) {
  oracle::Gen g(16);
  for (int trial = 0; trial < 1000; ++trial) {
    const PacingSchedule s{g.unit(), g.unit() * 1e-3};
    const std::size_t t = g.below(100000);
    EXPECT_LE(portion_at(s, t), portion_at(s, t + 1 + g.below(1000)));
    EXPECT_LE(portion_at(s, t), 1.0);
    EXPECT_GE(portion_at(s, t), s.p_init);
  }
}

TEST(Property, BatchEpochsArePermutations) {
  oracle::Gen g(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + g.below(30), b = 1 + g.below(n);
    const std::uint64_t seed = g.next();
    std::vector<std::size_t> stream;
    for (std::uint64_t t = 1; stream.size() < 3 * n; ++t) {
      const auto idx = batch_indices(seed, n, b, t);
      stream.insert(stream.end(), idx.begin(), idx.end());
    }
    for (std::size_t e = 0; e < 3; ++e) {
      std::vector<std::size_t> epoch(stream.begin() + static_cast<long>(e * n),
                                     stream.begin() + static_cast<long>((e + 1) * n));
      std::sort(epoch.begin(), epoch.end());
      for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(epoch[i], i);
    }
  }
}

TEST(Property, CorpusRoundTripsForRandomOptions) {
  oracle::Gen g(18);
  const Preset p = preset("glyph12");
  const auto templates = GlyphTemplates::for_vocab(p.vocab);
  for (int trial = 0; trial < 20; ++trial) {
    CorpusOptions o;
    o.count = 1 + g.below(20);
    o.l_max = 1 + g.below(6);
    o.max_length = 1 + g.below(o.l_max);
    o.min_length = 1 + g.below(o.max_length);
    o.keep_labels = g.below(2) == 0;
    if (g.below(2)) o.shift = p.target_shift;
    o.seed = g.next();
    const Corpus c = generate_corpus(p.vocab, templates, o);
    const auto bytes = serialize_corpus(c);
    const Corpus back = deserialize_corpus(bytes);
    // The file carries no generator seed.
    EXPECT_EQ(back.vocab, c.vocab);
    EXPECT_EQ(back.images, c.images);
    EXPECT_EQ(serialize_corpus(back), bytes);
  }
}

TEST(Property, CheckpointRoundTripsForRandomArchitectures) {
  oracle::Gen g(19);
  const Preset p = preset("glyph12");
  for (int trial = 0; trial < 10; ++trial) {
    RecognizerConfig arch;
    arch.d_feat = 2 + g.below(6);
    arch.dec_hidden = 2 + g.below(6);
    arch.embed = 1 + g.below(4);
    arch.l_max = 1 + g.below(5);
    arch.bidirectional = g.below(2) == 0;
    arch.num_classes = p.vocab.num_classes();
    Checkpoint ck = Checkpoint::from_model(Recognizer(p.vocab, arch, g.next()), g.below(1000));
    ck.state.push_back({"opt/test/x", {3}, random_values(g, 3, -1, 1)});
    const auto bytes = serialize_checkpoint(ck);
    const Checkpoint back = deserialize_checkpoint(bytes);
    EXPECT_EQ(back, ck);
    EXPECT_EQ(serialize_checkpoint(back), bytes);
  }
}
