#include "smile/self_paced.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "smile/error.hpp"

namespace smile {

void PacingSchedule::validate() const {
  if (!(p_init >= 0.0 && p_init <= 1.0)) throw ContractError("p_init outside [0,1]");
  if (!(p_add >= 0.0)) throw ContractError("p_add must be >= 0");
}

double portion_at(const PacingSchedule& s, std::size_t t) {
  return std::min(s.p_init + s.p_add * static_cast<double>(t), 1.0);
}

std::vector<std::pair<std::size_t, std::vector<std::size_t>>> PredictionPool::by_class() const {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < entries.size(); ++i) groups[entries[i].pseudo_class].push_back(i);
  return {groups.begin(), groups.end()};
}

PredictionPool build_pool(std::span<const DecoderOutput> outputs, EntropyVariant variant) {
  PredictionPool pool;
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const auto& out = outputs[s];
    const Tensor ent = row_entropies(out.probs, variant);
    for (std::size_t t = 0; t < out.length(); ++t) {
      PoolEntry e;
      e.sample = s;
      e.timestep = t;
      e.pseudo_class = out.pseudo_labels[t];
      e.entropy = element(ent, t);
      e.entropy_value = e.entropy.item();
      pool.entries.push_back(std::move(e));
    }
  }
  return pool;
}

SelectionResult select(const PredictionPool& pool, const PacingSchedule& s, std::size_t t) {
  if (pool.empty()) throw ContractError("select: empty prediction pool");
  SelectionResult result;
  result.portion = portion_at(s, t);
  result.pool_size = pool.size();
  // Pool index last, so even duplicated (sample, timestep) pairs order totally.
  auto key = [&](std::size_t i) {
    const auto& e = pool.entries[i];
    return std::tuple(e.entropy_value, e.sample, e.timestep, i);
  };
  for (auto& [cls, members] : pool.by_class()) {
    ClassSelection cs;
    cs.pseudo_class = cls;
    cs.pool_size = members.size();
    const double raw = std::ceil(static_cast<double>(members.size()) * result.portion);
    cs.quota = std::min(members.size(), static_cast<std::size_t>(raw));
    std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cs.quota), members.end(),
                      [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    cs.chosen.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cs.quota));
    result.chosen.insert(result.chosen.end(), cs.chosen.begin(), cs.chosen.end());
    result.classes.push_back(std::move(cs));
  }
  return result;
}

double SelectionResult::realized_portion() const {
  return pool_size == 0 ? 0.0 : static_cast<double>(chosen.size()) / static_cast<double>(pool_size);
}

double SelectionResult::mean_chosen_entropy(const PredictionPool& pool) const {
  if (chosen.empty()) return 0.0;
  double total = 0.0;
  for (auto i : chosen) total += pool.entries[i].entropy_value;
  return total / static_cast<double>(chosen.size());
}

std::optional<Tensor> selected_entropy_loss(const PredictionPool& pool, const SelectionResult& sel) {
  if (sel.chosen.empty()) return std::nullopt;
  std::vector<Tensor> terms;
  terms.reserve(sel.chosen.size());
  for (auto i : sel.chosen) terms.push_back(pool.entries.at(i).entropy);
  return scale(add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

}  // namespace smile
