#pragma once

// Training regimes:
//   base     - decoder loss on labeled source batches
//   smile    - decoder loss on source plus lambda times the mean entropy of
//              the self-paced selection over a greedy-decoded target batch
//   finetune - decoder loss on labeled target batches, from a checkpoint

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smile/checkpoint.hpp"
#include "smile/glyph_data.hpp"
#include "smile/losses.hpp"
#include "smile/metrics.hpp"
#include "smile/optimizer.hpp"
#include "smile/recognizer.hpp"
#include "smile/self_paced.hpp"

namespace smile {

enum class TrainMode { base, smile, finetune };

const char* to_string(TrainMode m);
TrainMode parse_mode(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::base;
  double lambda = 1.0;
  EntropyVariant variant = EntropyVariant::shannon;
  PacingSchedule pacing{0.0, 5e-5};
  OptimizerConfig optimizer;
  std::size_t steps = 1000;
  std::size_t batch_source = 32;
  std::size_t batch_target = 32;
  double clip = 5.0;
  std::uint64_t seed = 1;
  std::size_t eval_every = 500;
  // Allows smile mode without a pre-trained starting checkpoint.
  bool cold_start = false;
  RecognizerConfig arch;  // num_classes is taken from the data

  std::string source_path;
  std::string target_path;
  std::string test_path;
  std::string checkpoint_path;  // starting point (required for finetune)
  std::string out_path;         // final checkpoint; metrics go to <out>.metrics.csv

  void validate() const;
  // One key=value line per setting, in a fixed order.
  std::string describe() const;
};

struct MetricsRow {
  std::uint64_t step = 0;
  TrainMode mode = TrainMode::base;
  double source_loss = 0.0;   // mean decoder loss since the previous row
  double entropy_loss = 0.0;  // mean selected-entropy loss since the previous row
  double portion = 0.0;       // P_t at this step
  double realized_portion = 0.0;
  std::size_t selected = 0;
  std::optional<EvalResult> eval;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;

  static const char* header();
  std::string to_csv() const;
};

// Per-class selection statistics of one smile step.
struct SelectionStat {
  std::uint64_t step = 0;
  std::size_t pseudo_class = 0;
  std::size_t pool_size = 0;
  std::size_t quota = 0;
  double mean_chosen_entropy = 0.0;
};

std::string selection_csv(const std::vector<SelectionStat>& stats);

// In-memory inputs of a run. Target-domain training images arrive only as
// UnlabeledImages; the labeled target corpus is used by finetune alone.
struct TrainData {
  const Corpus* source = nullptr;
  const UnlabeledImages* target = nullptr;
  const Corpus* target_labeled = nullptr;
  const Corpus* test = nullptr;
};

struct TrainResult {
  Checkpoint checkpoint;
  MetricsLog log;
  std::vector<SelectionStat> selection;
};

// Runs `cfg.steps` optimizer steps. A starting checkpoint written by the
// same mode resumes its step counter and optimizer state; one from another
// mode starts a new phase from its parameters.
TrainResult train(const TrainConfig& cfg, const TrainData& data, const Checkpoint* start);

// Loads corpora and the starting checkpoint from the configured paths and,
// when out_path is set, writes the checkpoint, metrics CSV and selection CSV.
TrainResult train(const TrainConfig& cfg);

// Indices of the batch used at 1-based step t: consecutive slices of a
// sequence of per-epoch permutations, a pure function of (seed, t).
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t dataset_size, std::size_t batch,
                                       std::uint64_t t);

// Per-cell adaptation runs sharing seed and starting checkpoint.
struct SweepRow {
  PacingSchedule pacing;
  EvalResult result;
};

struct SweepReport {
  std::vector<SweepRow> rows;

  std::string csv() const;
  std::string text() const;
};

// The seven (p_init, p_add) cells, ending with the no-self-paced (1, 0) cell.
std::vector<PacingSchedule> sensitivity_grid();

SweepReport sweep(std::span<const PacingSchedule> grid, const TrainConfig& base, const TrainData& data,
                  const Checkpoint& pretrained);

}  // namespace smile
