#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smile/checkpoint.hpp"
#include "smile/glyph_data.hpp"
#include "smile/recognizer.hpp"

namespace smile {

// Fraction of exact matches.
double word_accuracy(std::span<const std::string> predictions, std::span<const std::string> labels);

// Levenshtein distance with unit costs, over code points.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);
// UTF-8 convenience overload.
std::size_t edit_distance_utf8(std::string_view a, std::string_view b);

struct EvalResult {
  double word_accuracy = 0.0;
  double char_accuracy = 0.0;  // 1 - sum(edit) / sum(max(len_pred, len_label))
  double mean_entropy = 0.0;   // shannon, averaged over every decoded step
  std::size_t count = 0;
};

// Greedy prediction for every labeled image. `threads` > 1 splits the
// samples across workers; aggregation order is fixed, so the result does not
// depend on it.
EvalResult evaluate(const SequenceDecoder& model, const Corpus& test, std::size_t threads = 1);
EvalResult evaluate(const Checkpoint& ck, const Corpus& test, std::size_t threads = 1);

struct NamedResult {
  std::string name;
  EvalResult result;
};

struct Report {
  std::string text;
  std::string csv;  // name,word_acc,char_acc,mean_entropy,n
};

Report compare_report(std::span<const NamedResult> results);
std::vector<NamedResult> parse_report_csv(std::string_view csv);

// Worker count from SMILE_THREADS, default 1.
std::size_t threads_from_env();

}  // namespace smile
