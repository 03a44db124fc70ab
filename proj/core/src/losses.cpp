#include "smile/losses.hpp"

#include <cmath>
#include <string>

#include "smile/error.hpp"

namespace smile {

const char* to_string(EntropyVariant v) { return v == EntropyVariant::shannon ? "shannon" : "pseudo_nll"; }

EntropyVariant parse_entropy_variant(std::string_view name) {
  if (name == "shannon") return EntropyVariant::shannon;
  if (name == "pseudo_nll" || name == "pseudo-nll") return EntropyVariant::pseudo_nll;
  throw ContractError("unknown entropy variant '" + std::string(name) + "'");
}

Tensor decoder_loss(std::span<const DecoderOutput> outputs, std::span<const Label> labels, std::size_t eos) {
  if (outputs.size() != labels.size() || outputs.empty()) {
    throw ContractError("decoder_loss: " + std::to_string(outputs.size()) + " outputs for " +
                        std::to_string(labels.size()) + " labels");
  }
  std::vector<Tensor> per_sample;
  per_sample.reserve(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& probs = outputs[i].probs;
    if (probs.rank() != 2 || probs.rows() != labels[i].size() + 1) {
      throw ContractError("decoder_loss: sample " + std::to_string(i) + " has " +
                          std::to_string(probs.rank() == 2 ? probs.rows() : 0) + " steps for a label of length " +
                          std::to_string(labels[i].size()));
    }
    std::vector<std::size_t> targets(labels[i].begin(), labels[i].end());
    targets.push_back(eos);
    per_sample.push_back(sum(log(pick(probs, targets))));
  }
  return scale(add_n(per_sample), -1.0 / static_cast<double>(outputs.size()));
}

Tensor row_entropies(const Tensor& probs, EntropyVariant variant) {
  if (probs.rank() != 2) throw DimensionError("row_entropies needs a T x K matrix, got " + shape_string(probs.shape()));
  const std::size_t k = probs.cols();
  const auto v = probs.data();
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += v[r * k + c];
    if (std::abs(total - 1.0) > 1e-6) {
      throw ContractError("entropy: row " + std::to_string(r) + " sums to " + std::to_string(total));
    }
  }
  if (variant == EntropyVariant::shannon) {
    return scale(sum(mul(probs, log(probs)), 1), -1.0);
  }
  std::vector<std::size_t> best(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t b = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (v[r * k + c] > v[r * k + b]) b = c;
    }
    best[r] = b;
  }
  return scale(log(pick(probs, best)), -1.0);
}

Tensor step_entropy(const Tensor& row, EntropyVariant variant) {
  if (row.rank() == 1) return row_entropies(reshape(row, {1, row.size()}), variant);
  if (row.rank() == 2 && row.rows() == 1) return row_entropies(row, variant);
  throw DimensionError("step_entropy needs a single row, got " + shape_string(row.shape()));
}

Tensor sequence_entropy(const DecoderOutput& out, EntropyVariant variant) {
  return sum(row_entropies(out.probs, variant));
}

Tensor smile_loss(const Tensor& l_dec, const Tensor& l_ent, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("smile_loss: lambda must be >= 0");
  if (!std::isfinite(l_dec.item()) || !std::isfinite(l_ent.item())) {
    throw NumericalError("smile_loss: non-finite loss term");
  }
  return add(l_dec, scale(l_ent, lambda));
}

}  // namespace smile
