// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Expect roughly ten minutes on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "oracles.hpp"
#include "smile/checkpoint.hpp"
#include "smile/error.hpp"
#include "smile/gradcheck.hpp"
#include "smile/losses.hpp"
#include "smile/self_paced.hpp"
#include "smile/trainer.hpp"

using namespace smile;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const Outcome& o) {
  std::printf("%s %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void guarded(const char* id, const char* title, const std::function<Outcome()>& body) {
  try {
    report(id, title, body());
  } catch (const std::exception& e) {
    report(id, title, {false, std::string("exception: ") + e.what()});
  }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Shared state of the experimental criteria.
struct Experiment {
  PresetCorpora data;
  UnlabeledImages target;
  Checkpoint base;
  bool base_ready = false;
  EvalResult baseline;
  // Per seed, for the default cell.
  std::vector<EvalResult> adapted;
  bool adapted_ready = false;
};

constexpr std::size_t kSteps = 3000;
// Adaptation rate; the source phase uses adam at 1e-3.
constexpr double kAdaptLr = 1e-4;

TrainConfig adapt_config(std::uint64_t seed, PacingSchedule pacing) {
  TrainConfig c;
  c.mode = TrainMode::smile;
  c.lambda = 1.0;
  c.variant = EntropyVariant::shannon;
  c.pacing = pacing;
  c.steps = kSteps;
  c.batch_source = 32;
  c.batch_target = 32;
  c.optimizer.lr = kAdaptLr;
  c.seed = seed;
  c.eval_every = kSteps;
  return c;
}

TrainData adapt_data(const Experiment& ex) {
  TrainData d;
  d.source = &ex.data.source;
  d.target = &ex.target;
  d.test = &ex.data.target_test;
  return d;
}

// ------------------------------------------------------------------ A1

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto cases = run_gradcheck(GradcheckOptions{});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::size_t failed = 0, coords = 0;
  for (const auto& c : cases) {
    worst = std::max(worst, c.max_rel_error);
    coords += c.checked;
    failed += c.passed ? 0 : 1;
  }
  Outcome o;
  o.pass = failed == 0 && secs < 60.0;
  o.detail = std::to_string(cases.size()) + " cases, " + std::to_string(coords) + " coordinates, " +
             std::to_string(failed) + " failed" + fmt(", max rel err %.2e, %.1fs", worst, secs);
  return o;
}

// ------------------------------------------------------------------ A2

double entropy_of(const std::vector<double>& p) {
  return step_entropy(Tensor::constant({p.size()}, p), EntropyVariant::shannon).item();
}

Outcome entropy_properties() {
  oracle::Gen g(2024);
  const std::size_t ks[] = {5, 15, 30};
  std::size_t bound_violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = ks[i % 3];
    const double h = entropy_of(g.simplex(k));
    if (!(h >= 0.0 && h <= std::log(static_cast<double>(k)))) ++bound_violations;
  }
  double uniform_err = 0.0, onehot_err = 0.0;
  for (std::size_t k : ks) {
    uniform_err = std::max(uniform_err, std::fabs(entropy_of(std::vector<double>(k, 1.0 / static_cast<double>(k))) -
                                                  std::log(static_cast<double>(k))));
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> p(k, 0.0);
      p[j] = 1.0;
      onehot_err = std::max(onehot_err, std::fabs(entropy_of(p)));
    }
  }
  // One gradient step on the logits of a non-degenerate row.
  std::size_t decreased = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = ks[i % 3];
    std::vector<double> z(k);
    for (double& v : z) v = g.range(-3, 3);
    Tensor logits = Tensor::parameter({1, k}, z);
    double before = 0.0;
    {
      Tape tape;
      const Tensor h = step_entropy(softmax(logits), EntropyVariant::shannon);
      before = h.item();
      tape.backward(h);
    }
    const auto grad = logits.grad();
    for (std::size_t j = 0; j < k; ++j) z[j] -= 0.05 * grad[j];
    const double after = step_entropy(softmax(Tensor::constant({1, k}, z)), EntropyVariant::shannon).item();
    decreased += after < before ? 1 : 0;
  }
  Outcome o;
  o.pass = bound_violations == 0 && uniform_err <= 1e-9 && onehot_err <= 1e-9 && decreased == 100;
  o.detail = std::to_string(bound_violations) + "/10000 bound violations" +
             fmt(", |H(uniform)-lnK| %.1e, |H(one-hot)| %.1e", uniform_err, onehot_err) + ", " +
             std::to_string(decreased) + "/100 rows decreased";
  return o;
}

// ------------------------------------------------------------------ A3

Outcome selection_oracle() {
  const auto t0 = Clock::now();
  oracle::Gen g(77);
  std::size_t mismatches = 0, quota_errors = 0, order_errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<oracle::Entry> entries;
    const std::size_t classes = 1 + g.below(6);
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t n = 1 + g.below(40);
      for (std::size_t i = 0; i < n; ++i) {
        // Distinct (sample, timestep) per entry; coarse entropies force ties.
        const std::size_t id = entries.size();
        entries.push_back({id / 5, id % 5, c * 3 + 1, std::round(g.range(0, 3) * 4) / 4});
      }
    }
    // Pool order is shuffled so tie-breaks cannot lean on insertion order.
    for (std::size_t i = entries.size(); i > 1; --i) std::swap(entries[i - 1], entries[g.below(i)]);
    const double portion = g.unit();

    PredictionPool pool;
    for (const auto& e : entries) pool.entries.push_back({e.sample, e.timestep, e.cls, e.entropy, Tensor::scalar(e.entropy)});
    const SelectionResult sel = select(pool, PacingSchedule{portion, 0.0}, 0);
    std::vector<std::size_t> cls;
    const auto expected = oracle::brute_force_select(entries, portion, &cls);
    if (sel.classes.size() != expected.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t c = 0; c < expected.size(); ++c) {
      const auto& got = sel.classes[c];
      if (got.pseudo_class != cls[c] || got.chosen != expected[c]) ++mismatches;
      const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(got.pool_size) * portion));
      if (got.quota != k) ++quota_errors;
    }
    if (select(pool, PacingSchedule{portion, 0.0}, 0).chosen != sel.chosen) ++order_errors;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && quota_errors == 0 && order_errors == 0 && secs < 10.0;
  o.detail = std::to_string(mismatches) + " selection mismatches, " + std::to_string(quota_errors) +
             " quota errors, " + std::to_string(order_errors) + " nondeterministic reruns" + fmt(", %.2fs", secs);
  return o;
}

// ------------------------------------------------------------------ A4

Outcome schedule() {
  const std::size_t ts[] = {0, 1, 1000, 20000, 1000000};
  std::size_t wrong = 0, checked = 0;
  for (const auto& cell : sensitivity_grid()) {
    for (std::size_t t : ts) {
      const double expected = std::min(cell.p_init + cell.p_add * static_cast<double>(t), 1.0);
      wrong += portion_at(cell, t) == expected ? 0 : 1;
      ++checked;
    }
  }
  oracle::Gen g(4);
  std::size_t partial = 0;
  for (std::size_t t = 1; t <= 200; ++t) {
    PredictionPool pool;
    const std::size_t n = 1 + g.below(50);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = g.unit();
      pool.entries.push_back({i, 0, g.below(6), h, Tensor::scalar(h)});
    }
    const auto sel = select(pool, PacingSchedule{1.0, 0.0}, t);
    partial += sel.chosen.size() == n ? 0 : 1;
  }
  Outcome o;
  o.pass = sensitivity_grid().size() == 7 && wrong == 0 && partial == 0;
  o.detail = std::to_string(checked - wrong) + "/" + std::to_string(checked) + " exact portions over " +
             std::to_string(sensitivity_grid().size()) + " cells; (1, 0) took the full pool on " +
             std::to_string(200 - partial) + "/200 steps";
  return o;
}

// ------------------------------------------------------------------ A5

Outcome source_training(Experiment& ex) {
  TrainConfig c;
  c.mode = TrainMode::base;
  c.steps = kSteps;
  c.batch_source = 32;
  c.optimizer.lr = 1e-3;
  c.seed = 1;
  c.eval_every = 500;
  TrainData d;
  d.source = &ex.data.source;
  d.test = &ex.data.source_val;
  const auto t0 = Clock::now();
  const TrainResult r = train(c, d, nullptr);
  const double secs = seconds_since(t0);
  ex.base = r.checkpoint;
  ex.base_ready = true;

  std::uint64_t first = 0;
  double final_acc = 0.0;
  for (const auto& row : r.log.rows) {
    if (!row.eval) continue;
    if (first == 0 && row.eval->word_accuracy >= 0.99) first = row.step;
    final_acc = row.eval->word_accuracy;
  }
  Outcome o;
  o.pass = final_acc >= 0.99 && secs < 600.0;
  o.detail = fmt("source val word acc %.4f after %.0f steps", final_acc, static_cast<double>(kSteps)) +
             (first ? " (first >= 0.99 at step " + std::to_string(first) + ")" : std::string()) +
             fmt(", %.0fs", secs);
  return o;
}

// ------------------------------------------------------------------ A6

Outcome adaptation_gain(Experiment& ex) {
  if (!ex.base_ready) return {false, "no source checkpoint"};
  ex.baseline = evaluate(ex.base, ex.data.target_test);
  std::string detail = fmt("baseline %.4f; adapted", ex.baseline.word_accuracy);
  double slowest = 0.0;
  std::vector<double> acc;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto t0 = Clock::now();
    const TrainResult r = train(adapt_config(seed, PacingSchedule{0.0, 5e-5}), adapt_data(ex), &ex.base);
    slowest = std::max(slowest, seconds_since(t0));
    ex.adapted.push_back(*r.log.rows.back().eval);
    acc.push_back(ex.adapted.back().word_accuracy);
    detail += fmt(" %.4f", acc.back());
  }
  ex.adapted_ready = true;
  std::vector<double> sorted = acc;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[1];
  const double gain = 100.0 * (median - ex.baseline.word_accuracy);
  const double worst = 100.0 * (sorted[0] - ex.baseline.word_accuracy);
  Outcome o;
  o.pass = gain >= 2.0 && worst >= -0.5 && slowest < 900.0;
  o.detail = detail + fmt(" (seeds 1-3); median gain %+.1f pts, worst seed %+.1f pts, slowest seed %.0fs", gain,
                          worst, slowest);
  return o;
}

// ------------------------------------------------------------------ A7

Outcome sharpening(const Experiment& ex) {
  if (!ex.adapted_ready) return {false, "no adapted runs"};
  const double h0 = ex.baseline.mean_entropy;
  double weakest = 1.0;
  std::string per_seed;
  for (const auto& r : ex.adapted) {
    const double drop = 1.0 - r.mean_entropy / h0;
    weakest = std::min(weakest, drop);
    per_seed += fmt(" %.4f", r.mean_entropy);
  }
  Outcome o;
  o.pass = weakest >= 0.30;
  o.detail = fmt("target mean entropy %.4f before, after", h0) + per_seed +
             fmt("; smallest relative drop %.1f%%", 100.0 * weakest);
  return o;
}

// ------------------------------------------------------------------ A8

Outcome self_paced_ablation(const Experiment& ex) {
  if (!ex.adapted_ready) return {false, "no adapted runs"};
  const TrainResult r = train(adapt_config(1, PacingSchedule{1.0, 0.0}), adapt_data(ex), &ex.base);
  const double paced = ex.adapted[0].word_accuracy;
  const double full = r.log.rows.back().eval->word_accuracy;
  Outcome o;
  o.pass = paced >= full;
  o.detail = fmt("seed 1, %.0f steps: (0.0, 5e-5) %.4f vs (1.0, 0.0) %.4f, margin %+.1f pts",
                 static_cast<double>(kSteps), paced, full, 100.0 * (paced - full));
  return o;
}

// ------------------------------------------------------------------ A9

Outcome reproducibility(const Experiment& ex) {
  if (!ex.base_ready) return {false, "no source checkpoint"};
  const fs::path dir = fs::temp_directory_path() / ("smile_acceptance_" + std::to_string(getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_corpus(ex.data.source, dir / "source.smc");
  save_corpus(ex.data.target, dir / "target.smc");
  save_corpus(ex.data.target_test, dir / "test.smc");
  save_checkpoint(ex.base, dir / "base.ck");

  auto config = [&](std::size_t steps, const fs::path& start, const fs::path& out) {
    TrainConfig c = adapt_config(5, PacingSchedule{0.0, 5e-5});
    c.steps = steps;
    c.eval_every = 25;
    c.source_path = (dir / "source.smc").string();
    c.target_path = (dir / "target.smc").string();
    c.test_path = (dir / "test.smc").string();
    c.checkpoint_path = start.string();
    c.out_path = out.string();
    return c;
  };
  train(config(50, dir / "base.ck", dir / "a.ck"));
  train(config(50, dir / "base.ck", dir / "b.ck"));
  train(config(25, dir / "base.ck", dir / "half.ck"));
  train(config(25, dir / "half.ck", dir / "resumed.ck"));

  const bool ck_same = slurp(dir / "a.ck") == slurp(dir / "b.ck");
  const bool csv_same = slurp(dir / "a.ck.metrics.csv") == slurp(dir / "b.ck.metrics.csv") &&
                        slurp(dir / "a.ck.selection.csv") == slurp(dir / "b.ck.selection.csv");
  const bool resume_same = slurp(dir / "a.ck") == slurp(dir / "resumed.ck");
  fs::remove_all(dir);
  Outcome o;
  o.pass = ck_same && csv_same && resume_same;
  o.detail = std::string("rerun checkpoint ") + (ck_same ? "identical" : "DIFFERS") + ", rerun CSVs " +
             (csv_same ? "identical" : "DIFFER") + ", 25+25 resume vs 50 uninterrupted " +
             (resume_same ? "identical" : "DIFFERS");
  return o;
}

// ------------------------------------------------------------------ A10

template <typename F>
std::string format_error_of(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  } catch (const std::exception& e) {
    return std::string("wrong exception: ") + e.what();
  }
  return "no error";
}

Outcome format_round_trips(const Experiment& ex) {
  const fs::path dir = fs::temp_directory_path() / ("smile_formats_" + std::to_string(getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::size_t identical = 0, total = 0;
  for (const Corpus* c : {&ex.data.source, &ex.data.target, &ex.data.target_test}) {
    save_corpus(*c, dir / "c1.smc");
    save_corpus(load_corpus(dir / "c1.smc"), dir / "c2.smc");
    identical += slurp(dir / "c1.smc") == slurp(dir / "c2.smc") ? 1 : 0;
    ++total;
  }
  if (ex.base_ready) {
    save_checkpoint(ex.base, dir / "k1.ck");
    save_checkpoint(load_checkpoint(dir / "k1.ck"), dir / "k2.ck");
    identical += slurp(dir / "k1.ck") == slurp(dir / "k2.ck") ? 1 : 0;
    ++total;
  }
  fs::remove_all(dir);

  const auto corpus = serialize_corpus(ex.data.target_test);
  const auto ck = serialize_checkpoint(ex.base);
  auto corrupt = [](std::vector<std::uint8_t> b) {
    b[0] ^= 0xff;
    return b;
  };
  auto cut = [](std::vector<std::uint8_t> b, std::size_t n) {
    b.resize(n);
    return b;
  };
  const std::string errors[] = {
      format_error_of([&] { deserialize_corpus(corrupt(corpus)); }),
      format_error_of([&] { deserialize_corpus(cut(corpus, corpus.size() / 2)); }),
      format_error_of([&] { deserialize_checkpoint(corrupt(ck)); }),
      format_error_of([&] { deserialize_checkpoint(cut(ck, ck.size() - 3)); }),
  };
  std::size_t good_errors = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const bool is_magic = i % 2 == 0;
    const bool ok = is_magic ? errors[i].find("magic") != std::string::npos
                             : errors[i].find("truncated at offset") != std::string::npos;
    good_errors += ok ? 1 : 0;
  }
  Outcome o;
  o.pass = identical == total && total == 4 && good_errors == 4;
  o.detail = std::to_string(identical) + "/" + std::to_string(total) + " byte-identical round trips, " +
             std::to_string(good_errors) + "/4 corruptions raised the expected format error (e.g. \"" + errors[3] +
             "\")";
  return o;
}

}  // namespace

int main() {
  std::printf("acceptance: glyph12 preset, seed 1, %zu-step phases, adaptation lr %g\n", kSteps, kAdaptLr);
  guarded("A1", "gradient fidelity", gradient_fidelity);
  guarded("A2", "entropy properties", entropy_properties);
  guarded("A3", "selection oracle", selection_oracle);
  guarded("A4", "schedule", schedule);

  Experiment ex;
  ex.data = generate_preset(preset("glyph12"), 1);
  ex.target = UnlabeledImages(ex.data.target);
  guarded("A5", "source training", [&] { return source_training(ex); });
  guarded("A6", "directional adaptation gain", [&] { return adaptation_gain(ex); });
  guarded("A7", "sharpening", [&] { return sharpening(ex); });
  guarded("A8", "self-paced ablation", [&] { return self_paced_ablation(ex); });
  guarded("A9", "reproducibility", [&] { return reproducibility(ex); });
  guarded("A10", "format round trips", [&] { return format_round_trips(ex); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
