#pragma once

// Checkpoint file, little-endian:
//   "SMCK", u32 version = 1
//   vocabulary block: u32 count, u32 code point each
//   architecture block: u32 d_feat, dec_hidden, embed, num_classes, l_max
//   u64 step counter
//   u32 tensor count, then per tensor: u16 name length, name bytes, u8 rank,
//   u32 dims, f64 values
// Parameters come first in canonical order, followed by "opt/..." state.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "smile/glyph_data.hpp"
#include "smile/optimizer.hpp"
#include "smile/recognizer.hpp"

namespace smile {

struct Checkpoint {
  VocabSpec vocab;
  RecognizerConfig arch;
  std::uint64_t step = 0;
  std::vector<NamedArray> params;
  std::vector<NamedArray> state;  // names prefixed "opt/"

  static Checkpoint from_model(const Recognizer& model, std::uint64_t step = 0);
  // Independent parameter copy; shapes are validated against `arch`.
  Recognizer to_model() const;

  const NamedArray* find_state(std::string_view name) const;

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace smile
