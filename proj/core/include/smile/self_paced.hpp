#pragma once

// Class-balanced self-paced selection of confident target predictions.
//
// Every emitted target timestep is grouped by its pseudo class. Each class
// contributes its ceil(n_c * P_t) lowest-entropy predictions, where
// P_t = min(p_init + p_add * t, 1) grows with the optimizer step t.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "smile/losses.hpp"
#include "smile/recognizer.hpp"
#include "smile/tensor.hpp"

namespace smile {

struct PacingSchedule {
  double p_init = 0.0;
  double p_add = 5e-5;

  void validate() const;
};

double portion_at(const PacingSchedule& s, std::size_t t);

struct PoolEntry {
  std::size_t sample = 0;
  std::size_t timestep = 0;
  std::size_t pseudo_class = 0;
  double entropy_value = 0.0;
  Tensor entropy;  // scalar, still attached to the step's tape
};

struct PredictionPool {
  std::vector<PoolEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  // Entry indices per pseudo class, classes ascending, entries in pool order.
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> by_class() const;
};

PredictionPool build_pool(std::span<const DecoderOutput> outputs, EntropyVariant variant);

struct ClassSelection {
  std::size_t pseudo_class = 0;
  std::size_t pool_size = 0;   // n_c
  std::size_t quota = 0;       // k_c
  std::vector<std::size_t> chosen;  // pool entry indices, ascending (entropy, sample, timestep)
};

struct SelectionResult {
  double portion = 0.0;  // P_t
  std::vector<ClassSelection> classes;
  std::vector<std::size_t> chosen;  // all chosen entry indices, class by class
  std::size_t pool_size = 0;

  double realized_portion() const;
  // Mean entropy value of the chosen entries, 0 when nothing was chosen.
  double mean_chosen_entropy(const PredictionPool& pool) const;
};

SelectionResult select(const PredictionPool& pool, const PacingSchedule& s, std::size_t t);

// Mean of the chosen entropy tensors; nullopt when nothing was chosen, in
// which case the caller drops the entropy term for that step.
std::optional<Tensor> selected_entropy_loss(const PredictionPool& pool, const SelectionResult& sel);

}  // namespace smile
