#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "smile/losses.hpp"
#include "smile/recognizer.hpp"
#include "smile/self_paced.hpp"
#include "smile/tensor.hpp"

using namespace smile;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

struct Model {
  VocabSpec vocab = preset("glyph12").vocab;
  Recognizer net;
  TextImage sample;

  Model() : net(vocab, config(vocab), 1) {
    const Label label = {1, 2, 3, 4};
    sample = render_string(label, vocab, GlyphTemplates::for_vocab(vocab), 4);
  }
  static RecognizerConfig config(const VocabSpec& v) {
    RecognizerConfig c;
    c.num_classes = v.num_classes();
    return c;
  }
};

Model& model() {
  static Model m;
  return m;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = Tensor::constant({n, n}, random_values(n * n, 1));
  const Tensor b = Tensor::constant({n, n}, random_values(n * n, 2));
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

static void BM_GreedyDecode(benchmark::State& state) {
  const Model& m = model();
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(m.net.decode(m.sample.image).pseudo_labels.size());
}
BENCHMARK(BM_GreedyDecode);

static void BM_TeacherForcedForwardBackward(benchmark::State& state) {
  Model& m = model();
  const Label label = *m.sample.label;
  for (auto _ : state) {
    Tape tape;
    const DecoderOutput outs[] = {m.net.decode_teacher_forced(m.net.encode(m.sample.image), label)};
    const Label labels[] = {label};
    tape.backward(decoder_loss(outs, labels, m.vocab.eos()));
  }
}
BENCHMARK(BM_TeacherForcedForwardBackward);

static void BM_Select(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  PredictionPool pool;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = std::ldexp(static_cast<double>(rng() >> 11), -53);
    pool.entries.push_back({i / 5, i % 5, static_cast<std::size_t>(rng() % 12), h, Tensor::scalar(h)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(select(pool, PacingSchedule{0.3, 0.0}, 0).chosen.size());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Select)->Arg(128)->Arg(4096);
BENCHMARK_MAIN();
