#include "smile/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "smile/error.hpp"
#include "smile/rng.hpp"

namespace smile {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;    // parameter initialization
constexpr std::uint64_t kSourceStream = 0x737263;    // supervised batch order
constexpr std::uint64_t kTargetStream = 0x746774;    // target batch order

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ContractError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw ContractError("failed writing " + path);
}

bool all_finite(const std::vector<RecognizerParams::Entry>& params) {
  for (const auto& p : params) {
    for (double g : p.tensor->mutable_grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace

const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::base: return "base";
    case TrainMode::smile: return "smile";
    case TrainMode::finetune: return "finetune";
  }
  return "?";
}

TrainMode parse_mode(std::string_view name) {
  if (name == "base") return TrainMode::base;
  if (name == "smile") return TrainMode::smile;
  if (name == "finetune") return TrainMode::finetune;
  throw ContractError("unknown mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ContractError("lambda must be >= 0");
  if (steps < 1) throw ContractError("steps must be >= 1");
  if (batch_source < 1 || batch_target < 1) throw ContractError("batch sizes must be >= 1");
  if (!(clip > 0.0)) throw ContractError("clip must be > 0");
  if (!(optimizer.lr > 0.0)) throw ContractError("lr must be > 0");
  if (eval_every < 1) throw ContractError("eval-every must be >= 1");
  pacing.validate();
}

std::string TrainConfig::describe() const {
  std::ostringstream out;
  out << "mode=" << to_string(mode) << '\n'
      << "lambda=" << fmt(lambda) << '\n'
      << "entropy-variant=" << to_string(variant) << '\n'
      << "p-init=" << fmt(pacing.p_init) << '\n'
      << "p-add=" << fmt(pacing.p_add) << '\n'
      << "steps=" << steps << '\n'
      << "batch-source=" << batch_source << '\n'
      << "batch-target=" << batch_target << '\n'
      << "seed=" << seed << '\n'
      << "optimizer=" << to_string(optimizer.kind) << '\n'
      << "lr=" << fmt(optimizer.lr) << '\n'
      << "clip=" << fmt(clip) << '\n'
      << "eval-every=" << eval_every << '\n'
      << "source=" << source_path << '\n'
      << "target=" << target_path << '\n'
      << "test=" << test_path << '\n'
      << "checkpoint=" << checkpoint_path << '\n'
      << "out=" << out_path << '\n';
  return out.str();
}

const char* MetricsLog::header() {
  return "step,mode,source_loss,entropy_loss,portion,realized_portion,selected,word_acc,char_acc,mean_entropy,n";
}

std::string MetricsLog::to_csv() const {
  std::ostringstream out;
  out << header() << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << to_string(r.mode) << ',' << fmt(r.source_loss) << ',' << fmt(r.entropy_loss) << ','
        << fmt(r.portion) << ',' << fmt(r.realized_portion) << ',' << r.selected << ',';
    if (r.eval) {
      out << fmt(r.eval->word_accuracy) << ',' << fmt(r.eval->char_accuracy) << ',' << fmt(r.eval->mean_entropy)
          << ',' << r.eval->count;
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string selection_csv(const std::vector<SelectionStat>& stats) {
  std::ostringstream out;
  out << "step,class,n_c,k_c,mean_chosen_entropy\n";
  for (const auto& s : stats) {
    out << s.step << ',' << s.pseudo_class << ',' << s.pool_size << ',' << s.quota << ','
        << fmt(s.mean_chosen_entropy) << '\n';
  }
  return out.str();
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t dataset_size, std::size_t batch,
                                       std::uint64_t t) {
  if (dataset_size == 0 || batch == 0 || t == 0) throw ContractError("batch_indices: empty dataset, batch or step 0");
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> perm(dataset_size);
  for (std::size_t i = 0; i < batch; ++i) {
    const std::uint64_t g = (t - 1) * batch + i;
    const std::uint64_t epoch = g / dataset_size;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng(derive_seed(seed, epoch));
      for (std::size_t k = dataset_size; k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
      cached_epoch = epoch;
    }
    out.push_back(perm[g % dataset_size]);
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, const TrainData& data, const Checkpoint* start) {
  cfg.validate();
  const Corpus* supervised = cfg.mode == TrainMode::finetune ? data.target_labeled : data.source;
  if (!supervised || supervised->size() == 0) {
    throw ContractError(cfg.mode == TrainMode::finetune ? "finetune needs a labeled target corpus"
                                                        : "training needs a source corpus");
  }
  if (!supervised->labeled()) throw ContractError("supervised corpus has unlabeled images");
  const VocabSpec& vocab = supervised->vocab;
  if (cfg.mode == TrainMode::smile) {
    if (!data.target || data.target->size() == 0) throw ContractError("smile mode needs a target corpus");
    if (!(data.target->vocab() == vocab)) throw ContractError("vocabulary mismatch between source and target");
    if (!start && !cfg.cold_start) {
      throw ContractError("smile mode starts from a pre-trained checkpoint (pass cold_start to override)");
    }
  }
  if (cfg.mode == TrainMode::finetune && !start) throw ContractError("finetune needs a starting checkpoint");
  if (data.test && !(data.test->vocab == vocab)) throw ContractError("vocabulary mismatch with the test corpus");

  std::optional<Recognizer> model_slot;
  if (start) {
    if (!(start->vocab == vocab)) throw ContractError("vocabulary mismatch between checkpoint and corpus");
    model_slot.emplace(start->to_model());
  } else {
    RecognizerConfig arch = cfg.arch;
    arch.num_classes = vocab.num_classes();
    model_slot.emplace(vocab, arch, derive_seed(cfg.seed, kInitStream));
  }
  Recognizer& model = *model_slot;
  auto params = model.params().named(model.config());
  Optimizer optimizer(cfg.optimizer, params);

  std::uint64_t step0 = 0;
  std::uint64_t seed = cfg.seed;
  if (start) {
    const NamedArray* mode = start->find_state("opt/train/mode");
    if (mode && mode->values.size() == 1 && mode->values[0] == static_cast<double>(cfg.mode)) {
      const NamedArray* stored_seed = start->find_state("opt/train/seed");
      if (!stored_seed || stored_seed->values.size() != 2) throw FormatError("checkpoint lacks opt/train/seed");
      seed = (static_cast<std::uint64_t>(stored_seed->values[0]) << 32) |
             static_cast<std::uint64_t>(stored_seed->values[1]);
      if (seed != cfg.seed) {
        throw ContractError("resuming a checkpoint trained with seed " + std::to_string(seed) + " under seed " +
                            std::to_string(cfg.seed));
      }
      optimizer.import_state(start->state);
      step0 = start->step;
    }
  }

  const std::uint64_t sup_seed = derive_seed(seed, kSourceStream);
  const std::uint64_t tgt_seed = derive_seed(seed, kTargetStream);
  const std::size_t threads = threads_from_env();

  TrainResult result;
  double loss_acc = 0.0, ent_acc = 0.0;
  std::size_t loss_n = 0, ent_n = 0;
  const std::uint64_t last = step0 + cfg.steps;

  for (std::uint64_t t = step0 + 1; t <= last; ++t) {
    MetricsRow row;
    row.step = t;
    row.mode = cfg.mode;
    double dec_value = 0.0, ent_value = 0.0;
    {
      Tape tape;
      const auto idx = batch_indices(sup_seed, supervised->size(), cfg.batch_source, t);
      std::vector<DecoderOutput> outs;
      std::vector<Label> labels;
      outs.reserve(idx.size());
      for (auto i : idx) {
        const auto& item = supervised->images[i];
        outs.push_back(model.decode_teacher_forced(model.encode(item.image), *item.label));
        labels.push_back(*item.label);
      }
      const Tensor l_dec = decoder_loss(outs, labels, vocab.eos());
      Tensor total = l_dec;
      dec_value = l_dec.item();

      if (cfg.mode == TrainMode::smile) {
        const auto tidx = batch_indices(tgt_seed, data.target->size(), cfg.batch_target, t);
        std::vector<DecoderOutput> touts;
        touts.reserve(tidx.size());
        for (auto i : tidx) touts.push_back(model.decode_greedy(model.encode(data.target->images()[i])));
        const PredictionPool pool = build_pool(touts, cfg.variant);
        const SelectionResult sel = select(pool, cfg.pacing, t);
        row.portion = sel.portion;
        row.realized_portion = sel.realized_portion();
        row.selected = sel.chosen.size();
        for (const auto& c : sel.classes) {
          double m = 0.0;
          for (auto i : c.chosen) m += pool.entries[i].entropy_value;
          result.selection.push_back(
              {t, c.pseudo_class, c.pool_size, c.quota, c.chosen.empty() ? 0.0 : m / static_cast<double>(c.chosen.size())});
        }
        if (auto l_ent = selected_entropy_loss(pool, sel)) {
          ent_value = l_ent->item();
          if (!std::isfinite(ent_value) || !std::isfinite(dec_value)) {
            throw NumericalError("non-finite loss at step " + std::to_string(t) + ": l_dec=" + fmt(dec_value) +
                                 " l_ent=" + fmt(ent_value) + " portion=" + fmt(sel.portion));
          }
          total = smile_loss(l_dec, *l_ent, cfg.lambda);
          ent_acc += ent_value;
          ++ent_n;
        }
      }
      if (!std::isfinite(total.item())) {
        throw NumericalError("non-finite loss at step " + std::to_string(t) + ": l_dec=" + fmt(dec_value) +
                             " l_ent=" + fmt(ent_value) + " total=" + fmt(total.item()));
      }
      model.params().zero_grad(model.config());
      tape.backward(total);
    }
    if (!all_finite(params)) {
      throw NumericalError("non-finite gradient at step " + std::to_string(t) + ": l_dec=" + fmt(dec_value) +
                           " l_ent=" + fmt(ent_value));
    }
    clip_grad_norm(params, cfg.clip);
    optimizer.step(params, t);
    loss_acc += dec_value;
    ++loss_n;

    if (t % cfg.eval_every == 0 || t == last) {
      row.source_loss = loss_acc / static_cast<double>(loss_n);
      row.entropy_loss = ent_n ? ent_acc / static_cast<double>(ent_n) : 0.0;
      if (data.test) row.eval = evaluate(model, *data.test, threads);
      result.log.rows.push_back(row);
      loss_acc = ent_acc = 0.0;
      loss_n = ent_n = 0;
    }
  }

  result.checkpoint = Checkpoint::from_model(model, last);
  result.checkpoint.state = optimizer.export_state();
  result.checkpoint.state.push_back({"opt/train/mode", {1}, {static_cast<double>(cfg.mode)}});
  result.checkpoint.state.push_back(
      {"opt/train/seed", {2}, {static_cast<double>(seed >> 32), static_cast<double>(seed & 0xffffffffULL)}});
  return result;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  std::optional<Corpus> source, target_labeled, test;
  std::optional<UnlabeledImages> target;
  std::optional<Checkpoint> start;
  if (cfg.mode != TrainMode::finetune) {
    if (cfg.source_path.empty()) throw ContractError("train: --source is required");
    source = load_corpus(cfg.source_path);
  }
  if (cfg.mode == TrainMode::smile) {
    if (cfg.target_path.empty()) throw ContractError("train: --target is required in smile mode");
    target.emplace(load_corpus(cfg.target_path));
  }
  if (cfg.mode == TrainMode::finetune) {
    if (cfg.target_path.empty()) throw ContractError("train: --target (labeled) is required in finetune mode");
    target_labeled = load_corpus(cfg.target_path);
  }
  if (!cfg.test_path.empty()) test = load_corpus(cfg.test_path);
  if (!cfg.checkpoint_path.empty()) start = load_checkpoint(cfg.checkpoint_path);

  TrainData data;
  data.source = source ? &*source : nullptr;
  data.target = target ? &*target : nullptr;
  data.target_labeled = target_labeled ? &*target_labeled : nullptr;
  data.test = test ? &*test : nullptr;
  TrainResult r = train(cfg, data, start ? &*start : nullptr);
  if (!cfg.out_path.empty()) {
    save_checkpoint(r.checkpoint, cfg.out_path);
    write_text(cfg.out_path + ".metrics.csv", r.log.to_csv());
    if (cfg.mode == TrainMode::smile) write_text(cfg.out_path + ".selection.csv", selection_csv(r.selection));
  }
  return r;
}

std::vector<PacingSchedule> sensitivity_grid() {
  return {{0.0, 1e-4}, {0.3, 1e-4}, {0.5, 1e-4}, {0.0, 5e-5}, {0.3, 5e-5}, {0.5, 5e-5}, {1.0, 0.0}};
}

SweepReport sweep(std::span<const PacingSchedule> grid, const TrainConfig& base, const TrainData& data,
                  const Checkpoint& pretrained) {
  if (grid.empty()) throw ContractError("sweep: empty grid");
  if (!data.test) throw ContractError("sweep: a test corpus is required");
  SweepReport report;
  for (const auto& cell : grid) {
    TrainConfig cfg = base;
    cfg.mode = TrainMode::smile;
    cfg.pacing = cell;
    const TrainResult r = train(cfg, data, &pretrained);
    const auto& final_row = r.log.rows.back();
    report.rows.push_back({cell, final_row.eval ? *final_row.eval : evaluate(r.checkpoint, *data.test, threads_from_env())});
  }
  return report;
}

std::string SweepReport::csv() const {
  std::ostringstream out;
  out << "p_init,p_add,word_acc,char_acc,mean_entropy,n\n";
  for (const auto& r : rows) {
    out << fmt(r.pacing.p_init) << ',' << fmt(r.pacing.p_add) << ',' << fmt(r.result.word_accuracy) << ','
        << fmt(r.result.char_accuracy) << ',' << fmt(r.result.mean_entropy) << ',' << r.result.count << '\n';
  }
  return out.str();
}

std::string SweepReport::text() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s  %9s  %9s  %12s  %6s\n", "(p_init, p_add)", "word_acc", "char_acc",
                "mean_entropy", "n");
  out << buf;
  for (const auto& r : rows) {
    char cell[48];
    std::snprintf(cell, sizeof cell, "(%g, %g)", r.pacing.p_init, r.pacing.p_add);
    std::snprintf(buf, sizeof buf, "%-16s  %9.4f  %9.4f  %12.4f  %6zu\n", cell, r.result.word_accuracy,
                  r.result.char_accuracy, r.result.mean_entropy, r.result.count);
    out << buf;
  }
  return out.str();
}

}  // namespace smile
