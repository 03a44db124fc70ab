#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "smile/error.hpp"
#include "smile/self_paced.hpp"

using namespace smile;

namespace {

PredictionPool make_pool(const std::vector<oracle::Entry>& entries) {
  PredictionPool pool;
  for (const auto& e : entries) {
    pool.entries.push_back({e.sample, e.timestep, e.cls, e.entropy, Tensor::scalar(e.entropy)});
  }
  return pool;
}

DecoderOutput greedy_like(std::size_t k, const std::vector<std::vector<double>>& rows) {
  DecoderOutput out;
  std::vector<double> flat;
  for (const auto& r : rows) {
    flat.insert(flat.end(), r.begin(), r.end());
    out.pseudo_labels.push_back(static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin()));
  }
  out.probs = Tensor::constant({rows.size(), k}, flat);
  return out;
}

}  // namespace

TEST(Schedule, DefaultCellValues) {
  const PacingSchedule def{0.0, 5e-5};
  EXPECT_EQ(portion_at(def, 0), 0.0);
  EXPECT_EQ(portion_at(def, 20000), 1.0);
  EXPECT_EQ(portion_at(PacingSchedule{0.3, 1e-4}, 7000), 1.0);
  EXPECT_EQ(portion_at(PacingSchedule{0.5, 1e-4}, 1000000), 1.0);
  EXPECT_EQ(portion_at(PacingSchedule{1.0, 0.0}, 0), 1.0);
}

TEST(Schedule, InvalidParametersRejected) {
  EXPECT_THROW((PacingSchedule{-0.1, 0.0}.validate()), ContractError);
  EXPECT_THROW((PacingSchedule{1.5, 0.0}.validate()), ContractError);
  EXPECT_THROW((PacingSchedule{0.0, -1e-5}.validate()), ContractError);
}

TEST(Pool, CountsEveryEmittedStep) {
  const DecoderOutput outs[] = {greedy_like(3, {{.8, .1, .1}, {.1, .8, .1}, {.1, .1, .8}}),
                                greedy_like(3, {{.6, .3, .1}, {.2, .2, .6}})};
  const PredictionPool pool = build_pool(outs, EntropyVariant::shannon);
  ASSERT_EQ(pool.size(), 5u);
  EXPECT_EQ(pool.entries[3].sample, 1u);
  EXPECT_EQ(pool.entries[3].timestep, 0u);
  EXPECT_NEAR(pool.entries[3].entropy_value, oracle::shannon({.6, .3, .1}), 1e-12);
}

TEST(Pool, OneHotOnOneClass) {
  std::vector<double> row(10, 0.0);
  row[7] = 1.0;
  const DecoderOutput outs[] = {greedy_like(10, {row, row}), greedy_like(10, {row})};
  const PredictionPool pool = build_pool(outs, EntropyVariant::shannon);
  const auto groups = pool.by_class();
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].first, 7u);
  for (const auto& e : pool.entries) EXPECT_EQ(e.entropy_value, 0.0);
}

TEST(Select, FullPortionTakesEverything) {
  const PredictionPool pool = make_pool({{0, 0, 1, .3}, {0, 1, 2, .1}, {1, 0, 1, .9}});
  const SelectionResult sel = select(pool, PacingSchedule{1.0, 0.0}, 17);
  EXPECT_EQ(sel.chosen.size(), 3u);
  EXPECT_EQ(sel.realized_portion(), 1.0);
}

TEST(Select, CeilingQuotaExample) {
  const PredictionPool pool = make_pool({{0, 0, 4, 0.9}, {1, 0, 4, 0.1}, {2, 0, 4, 0.5}});
  const SelectionResult sel = select(pool, PacingSchedule{0.34, 0.0}, 0);
  ASSERT_EQ(sel.classes.size(), 1u);
  EXPECT_EQ(sel.classes[0].quota, 2u);
  EXPECT_EQ(sel.classes[0].chosen, (std::vector<std::size_t>{1, 2}));
}

TEST(Select, TiesBrokenBySampleThenTimestep) {
  const PredictionPool pool = make_pool({{2, 0, 0, 0.2}, {1, 3, 0, 0.2}, {1, 1, 0, 0.2}, {0, 5, 0, 0.3}});
  const SelectionResult sel = select(pool, PacingSchedule{0.5, 0.0}, 0);
  EXPECT_EQ(sel.classes[0].chosen, (std::vector<std::size_t>{2, 1}));
}

TEST(Select, ZeroPortionSelectsNothing) {
  const PredictionPool pool = make_pool({{0, 0, 0, 0.2}, {0, 1, 1, 0.3}});
  const SelectionResult sel = select(pool, PacingSchedule{0.0, 5e-5}, 0);
  EXPECT_TRUE(sel.chosen.empty());
  EXPECT_FALSE(selected_entropy_loss(pool, sel).has_value());
  EXPECT_EQ(sel.mean_chosen_entropy(pool), 0.0);
}

TEST(Select, EmptyPoolRejected) { EXPECT_THROW(select(PredictionPool{}, PacingSchedule{}, 1), ContractError); }

TEST(Select, MatchesBruteForceOnRandomPools) {
  oracle::Gen g(1234);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<oracle::Entry> entries;
    const std::size_t n = 1 + g.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse entropies make ties common.
      entries.push_back({g.below(8), g.below(5), g.below(4), std::round(g.range(0, 2) * 4) / 4});
    }
    const double portion = g.range(0, 1);
    const PredictionPool pool = make_pool(entries);
    const SelectionResult sel = select(pool, PacingSchedule{portion, 0.0}, 0);
    std::vector<std::size_t> classes;
    const auto expected = oracle::brute_force_select(entries, portion, &classes);
    ASSERT_EQ(sel.classes.size(), expected.size());
    for (std::size_t c = 0; c < expected.size(); ++c) {
      EXPECT_EQ(sel.classes[c].pseudo_class, classes[c]);
      EXPECT_EQ(sel.classes[c].chosen, expected[c]);
    }
  }
}

TEST(EntropyLoss, MeanOfChosen) {
  const PredictionPool one = make_pool({{0, 0, 0, 0.4}});
  EXPECT_NEAR(selected_entropy_loss(one, select(one, PacingSchedule{1.0, 0.0}, 0))->item(), 0.4, 1e-15);
  const PredictionPool two = make_pool({{0, 0, 0, 0.2}, {0, 1, 1, 0.4}});
  EXPECT_NEAR(selected_entropy_loss(two, select(two, PacingSchedule{1.0, 0.0}, 0))->item(), 0.3, 1e-15);
}

TEST(EntropyLoss, UnchosenRowsGetNoGradient) {
  // Two rows of class 0; only the more confident one is chosen at P = 0.5.
  Tensor logits = Tensor::parameter({2, 3}, {3.0, 0.0, 0.0, 1.0, 0.5, 0.0});
  auto loss_value = [&]() {
    const Tensor probs = softmax(logits);
    DecoderOutput out;
    out.probs = probs;
    out.pseudo_labels = {0, 0};
    const DecoderOutput outs[] = {out};
    const PredictionPool pool = build_pool(outs, EntropyVariant::shannon);
    const SelectionResult sel = select(pool, PacingSchedule{0.5, 0.0}, 0);
    EXPECT_EQ(sel.chosen, (std::vector<std::size_t>{0}));
    return *selected_entropy_loss(pool, sel);
  };
  {
    Tape tape;
    tape.backward(loss_value());
  }
  const auto g = logits.grad();
  for (std::size_t i = 3; i < 6; ++i) EXPECT_EQ(g[i], 0.0);
  const double before = loss_value().item();
  logits.mutable_data()[4] += 1e-3;
  EXPECT_NEAR(loss_value().item(), before, 1e-9);
}
