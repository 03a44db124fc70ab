#include "smile/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "smile/glyph_data.hpp"
#include "smile/losses.hpp"
#include "smile/recognizer.hpp"
#include "smile/rng.hpp"
#include "smile/self_paced.hpp"

namespace smile {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradcheckCase check_gradients(const std::string& name, std::vector<Tensor> leaves,
                              const std::function<Tensor()>& loss, const GradcheckOptions& opts,
                              std::size_t coords) {
  for (auto& l : leaves) l.zero_grad();
  {
    Tape tape;
    const Tensor value = loss();
    tape.backward(value);
  }
  GradcheckCase result;
  result.name = name;
  Rng rng(derive_seed(opts.seed, leaves.size()));
  NoGradGuard no_grad;
  for (auto& leaf : leaves) {
    const auto analytic = leaf.grad();
    auto data = leaf.mutable_data();
    std::vector<std::size_t> which(data.size());
    for (std::size_t i = 0; i < which.size(); ++i) which[i] = i;
    if (coords > 0 && coords < which.size()) {
      for (std::size_t k = 0; k < coords; ++k) std::swap(which[k], which[k + rng.below(which.size() - k)]);
      which.resize(coords);
    }
    for (auto i : which) {
      const double saved = data[i];
      auto at = [&](double offset) {
        data[i] = saved + offset;
        return loss().item();
      };
      const double h = opts.step;
      double numeric = 0.0;
      if (opts.five_point) {
        numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      } else {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      }
      data[i] = saved;
      const double rel = relative_error(analytic[i], numeric);
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.checked;
    }
  }
  result.passed = result.max_rel_error <= opts.tolerance;
  return result;
}

namespace {

Tensor random_param(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::parameter(std::move(shape), std::move(v));
}

// Values bounded away from zero so relu's kink is never straddled.
Tensor away_from_zero(Rng& rng, Shape shape) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return Tensor::parameter(std::move(shape), std::move(v));
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck(const GradcheckOptions& opts) {
  std::vector<GradcheckCase> out;
  Rng rng(opts.seed);

  {
    Tensor a = random_param(rng, {3, 4}), b = random_param(rng, {4, 2}), w = random_param(rng, {3, 2});
    out.push_back(check_gradients("matmul", {a, b}, [=] { return sum(mul(matmul(a, b), w)); }, opts));
  }
  {
    Tensor a = random_param(rng, {2, 3}), b = random_param(rng, {2, 3}), s = random_param(rng, {1});
    out.push_back(check_gradients("add/sub/mul", {a, b, s},
                                  [=] { return sum(mul(add(a, mul(b, s)), sub(b, s))); }, opts));
  }
  {
    Tensor x = random_param(rng, {2, 5}, -2.0, 2.0);
    out.push_back(check_gradients("tanh", {x}, [=] { return sum(mul(tanh(x), x)); }, opts));
    out.push_back(check_gradients("sigmoid", {x}, [=] { return sum(mul(sigmoid(x), x)); }, opts));
    out.push_back(check_gradients("exp", {x}, [=] { return sum(exp(x)); }, opts));
  }
  {
    Tensor x = away_from_zero(rng, {2, 5});
    out.push_back(check_gradients("relu", {x}, [=] { return sum(mul(relu(x), x)); }, opts));
  }
  {
    Tensor x = random_param(rng, {2, 5}, 0.2, 3.0);
    out.push_back(check_gradients("log", {x}, [=] { return sum(log(x)); }, opts));
  }
  {
    Tensor x = random_param(rng, {1, 5}, -2.0, 2.0), w = random_param(rng, {1, 5});
    out.push_back(check_gradients("softmax", {x}, [=] { return sum(mul(softmax(x), w)); }, opts));
  }
  {
    Tensor x = random_param(rng, {3, 4}), w = random_param(rng, {4});
    out.push_back(check_gradients("sum/mean", {x}, [=] {
      const Tensor rows = sum(x, 1);
      return add(sum(mul(mean(x, 0), w)), sum(mul(rows, rows)));
    }, opts));
  }
  {
    Tensor table = random_param(rng, {5, 3}), w = random_param(rng, {4, 3});
    const std::vector<std::size_t> idx = {1, 4, 1, 0};
    out.push_back(check_gradients("gather_rows", {table}, [=] { return sum(mul(gather_rows(table, idx), w)); }, opts));
  }
  {
    Tensor m = random_param(rng, {3, 4}), v = random_param(rng, {1, 2});
    const std::vector<std::size_t> cols = {2, 0, 3};
    out.push_back(check_gradients("structural", {m, v}, [=] {
      const Tensor a = sum(mul(pick(m, cols), pick(m, cols)));
      const Tensor b = sum(mul(slice_cols(m, 1, 2), repeat_rows(v, 3)));
      const Tensor rows[2] = {row(m, 2), concat_cols(v, v)};
      const Tensor stacked = concat_rows(rows);
      const Tensor c = sum(mul(stacked, reshape(stacked, {2, 4})));
      return add(add(a, b), add(c, element(m, 5)));
    }, opts));
  }

  // Recognizer cases on a two-sample batch.
  const VocabSpec vocab(std::vector<char32_t>{U'0', U'1', U'2', U'3', U'4', U'5', U'6', U'7', U'8', U'9', U'A', U'B'});
  const auto templates = GlyphTemplates::for_vocab(vocab);
  CorpusOptions co;
  co.count = 2;
  co.seed = derive_seed(opts.seed, 11);
  const Corpus src = generate_corpus(vocab, templates, co);
  DomainConfig shift;
  shift.salt_pepper_prob = 0.15;
  shift.intensity_scale = 0.7;
  shift.background_level = 0.1;
  shift.horizontal_shear = 1;
  shift.seed = derive_seed(opts.seed, 12);
  co.shift = shift;
  co.seed = derive_seed(opts.seed, 13);
  const Corpus tgt = generate_corpus(vocab, templates, co);

  RecognizerConfig cfg;
  cfg.num_classes = vocab.num_classes();
  Recognizer model(vocab, cfg, derive_seed(opts.seed, 14));
  std::vector<Tensor> leaves;
  for (auto& e : model.params().named(model.config())) leaves.push_back(*e.tensor);

  auto l_dec = [&] {
    std::vector<DecoderOutput> outs;
    std::vector<Label> labels;
    for (const auto& t : src.images) {
      outs.push_back(model.decode_teacher_forced(model.encode(t.image), *t.label));
      labels.push_back(*t.label);
    }
    return decoder_loss(outs, labels, vocab.eos());
  };
  out.push_back(check_gradients("decoder_loss", leaves, l_dec, opts, opts.coords_per_tensor));

  for (auto variant : {EntropyVariant::shannon, EntropyVariant::pseudo_nll}) {
    auto total = [&, variant] {
      std::vector<DecoderOutput> touts;
      for (const auto& t : tgt.images) touts.push_back(model.decode_greedy(model.encode(t.image)));
      const PredictionPool pool = build_pool(touts, variant);
      const SelectionResult sel = select(pool, PacingSchedule{0.5, 0.0}, 1);
      const auto l_ent = selected_entropy_loss(pool, sel);
      return smile_loss(l_dec(), *l_ent, 1.0);
    };
    out.push_back(check_gradients(std::string("smile_loss/") + to_string(variant), leaves, total, opts,
                                  opts.coords_per_tensor));
  }
  return out;
}

}  // namespace smile
