#pragma once

#include <span>

#include "smile/glyph_data.hpp"
#include "smile/recognizer.hpp"
#include "smile/tensor.hpp"

namespace smile {

// Per-character confidence measure on the target domain.
//   shannon:    -sum_c p_c log p_c
//   pseudo_nll: -log p_argmax
enum class EntropyVariant { shannon, pseudo_nll };

const char* to_string(EntropyVariant v);
EntropyVariant parse_entropy_variant(std::string_view name);

// Mean over the batch of the per-sample sum of -log p(target_t), where the
// targets are the label followed by EOS.
Tensor decoder_loss(std::span<const DecoderOutput> outputs, std::span<const Label> labels, std::size_t eos);

// Entropy of one probability row (shape {K} or {1, K}).
Tensor step_entropy(const Tensor& row, EntropyVariant variant);

// Per-row entropies of a T x K probability matrix, shape {T}.
Tensor row_entropies(const Tensor& probs, EntropyVariant variant);

// Sum of step entropies over every emitted step, EOS included.
Tensor sequence_entropy(const DecoderOutput& out, EntropyVariant variant);

// l_dec + lambda * l_ent.
Tensor smile_loss(const Tensor& l_dec, const Tensor& l_ent, double lambda);

}  // namespace smile
