#include "smile/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <sstream>
#include <thread>

#include "smile/error.hpp"
#include "smile/losses.hpp"
#include "smile/utf8.hpp"

namespace smile {

double word_accuracy(std::span<const std::string> predictions, std::span<const std::string> labels) {
  if (predictions.size() != labels.size()) {
    throw ContractError("word_accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t edit_distance_utf8(std::string_view a, std::string_view b) {
  return edit_distance(from_utf8(a), from_utf8(b));
}

namespace {

struct SampleStats {
  bool exact = false;
  std::size_t edits = 0;
  std::size_t norm = 0;
  double entropy_sum = 0.0;
  std::size_t steps = 0;
};

SampleStats score(const SequenceDecoder& model, const TextImage& t) {
  const DecoderOutput out = model.decode(t.image);
  const Label pred = strip_eos(out, model.vocab(), model.max_length());
  const Label& truth = *t.label;
  SampleStats s;
  s.exact = pred == truth;
  std::u32string a, b;
  for (auto i : pred) a += static_cast<char32_t>(i);
  for (auto i : truth) b += static_cast<char32_t>(i);
  s.edits = edit_distance(a, b);
  s.norm = std::max(pred.size(), truth.size());
  const Tensor h = row_entropies(out.probs, EntropyVariant::shannon);
  for (double v : h.data()) s.entropy_sum += v;
  s.steps = h.size();
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EvalResult evaluate(const SequenceDecoder& model, const Corpus& test, std::size_t threads) {
  if (!(test.vocab == model.vocab())) throw ContractError("evaluate: corpus vocabulary differs from the model's");
  if (!test.labeled()) throw ContractError("evaluate: test corpus must be labeled");
  NoGradGuard no_grad;
  std::vector<SampleStats> stats(test.size());
  threads = std::max<std::size_t>(1, std::min(threads, test.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < test.size(); ++i) stats[i] = score(model, test.images[i]);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < test.size(); i += threads) stats[i] = score(model, test.images[i]);
      });
    }
    for (auto& th : workers) th.join();
  }
  EvalResult r;
  r.count = test.size();
  std::size_t exact = 0, edits = 0, norm = 0, steps = 0;
  double entropy = 0.0;
  for (const auto& s : stats) {
    exact += s.exact ? 1 : 0;
    edits += s.edits;
    norm += s.norm;
    entropy += s.entropy_sum;
    steps += s.steps;
  }
  if (r.count > 0) r.word_accuracy = static_cast<double>(exact) / static_cast<double>(r.count);
  r.char_accuracy = norm == 0 ? 1.0 : 1.0 - static_cast<double>(edits) / static_cast<double>(norm);
  r.mean_entropy = steps == 0 ? 0.0 : entropy / static_cast<double>(steps);
  return r;
}

EvalResult evaluate(const Checkpoint& ck, const Corpus& test, std::size_t threads) {
  return evaluate(ck.to_model(), test, threads);
}

Report compare_report(std::span<const NamedResult> results) {
  if (results.empty()) throw ContractError("compare_report: no results");
  std::ostringstream csv;
  csv << "name,word_acc,char_acc,mean_entropy,n\n";
  std::size_t width = 4;
  for (const auto& r : results) {
    if (r.name.find_first_of(",\n\"") != std::string::npos) {
      throw ContractError("compare_report: result name '" + r.name + "' contains a CSV delimiter");
    }
    width = std::max(width, r.name.size());
    csv << r.name << ',' << fmt(r.result.word_accuracy) << ',' << fmt(r.result.char_accuracy) << ','
        << fmt(r.result.mean_entropy) << ',' << r.result.count << '\n';
  }
  std::ostringstream text;
  text << std::left << std::setw(static_cast<int>(width)) << "name" << "  " << std::right << std::setw(9)
       << "word_acc" << "  " << std::setw(9) << "char_acc" << "  " << std::setw(12) << "mean_entropy" << "  "
       << std::setw(6) << "n" << '\n';
  text << std::fixed;
  for (const auto& r : results) {
    text << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << std::right << std::setprecision(4)
         << std::setw(9) << r.result.word_accuracy << "  " << std::setw(9) << r.result.char_accuracy << "  "
         << std::setw(12) << r.result.mean_entropy << "  " << std::setw(6) << r.result.count << '\n';
  }
  return {text.str(), csv.str()};
}

std::vector<NamedResult> parse_report_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "name,word_acc,char_acc,mean_entropy,n") {
    throw FormatError("report CSV: unexpected header");
  }
  std::vector<NamedResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw FormatError("report CSV: expected 5 fields in '" + line + "'");
    NamedResult r;
    r.name = f[0];
    r.result.word_accuracy = std::strtod(f[1].c_str(), nullptr);
    r.result.char_accuracy = std::strtod(f[2].c_str(), nullptr);
    r.result.mean_entropy = std::strtod(f[3].c_str(), nullptr);
    r.result.count = static_cast<std::size_t>(std::strtoull(f[4].c_str(), nullptr, 10));
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t threads_from_env() {
  if (const char* v = std::getenv("SMILE_THREADS")) {
    const long n = std::strtol(v, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

}  // namespace smile
