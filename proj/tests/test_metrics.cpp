#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "smile/error.hpp"
#include "smile/metrics.hpp"
#include "smile/utf8.hpp"

using namespace smile;

namespace {

Corpus small_corpus(std::size_t n, std::uint64_t seed) {
  const VocabSpec v = preset("glyph12").vocab;
  CorpusOptions o;
  o.count = n;
  o.seed = seed;
  return generate_corpus(v, GlyphTemplates::for_vocab(v), o);
}

// Answers from a lookup table keyed by image, emitting one-hot rows.
class OracleDecoder : public SequenceDecoder {
 public:
  explicit OracleDecoder(const Corpus& c) : vocab_(c.vocab) {
    for (const auto& t : c.images) answers_[t.image.pixels] = *t.label;
  }
  DecoderOutput decode(const Image& img) const override {
    Label seq = answers_.at(img.pixels);
    seq.push_back(vocab_.eos());
    DecoderOutput out;
    const std::size_t k = vocab_.num_classes();
    std::vector<double> flat(seq.size() * k, 0.0);
    for (std::size_t t = 0; t < seq.size(); ++t) flat[t * k + seq[t]] = 1.0;
    out.probs = Tensor::constant({seq.size(), k}, flat);
    out.pseudo_labels = seq;
    return out;
  }
  const VocabSpec& vocab() const override { return vocab_; }
  std::size_t max_length() const override { return 4; }

 private:
  VocabSpec vocab_;
  std::map<std::vector<double>, Label> answers_;
};

// Uniform rows; greedy picks EOS on the first step.
class UniformDecoder : public SequenceDecoder {
 public:
  explicit UniformDecoder(VocabSpec v) : vocab_(std::move(v)) {}
  DecoderOutput decode(const Image&) const override {
    const std::size_t k = vocab_.num_classes();
    DecoderOutput out;
    out.probs = Tensor::constant({1, k}, std::vector<double>(k, 1.0 / static_cast<double>(k)));
    out.pseudo_labels = {vocab_.eos()};
    return out;
  }
  const VocabSpec& vocab() const override { return vocab_; }
  std::size_t max_length() const override { return 4; }

 private:
  VocabSpec vocab_;
};

}  // namespace

TEST(WordAccuracy, Counting) {
  const std::vector<std::string> a = {"1", "22", "AB", "9"};
  EXPECT_EQ(word_accuracy(a, a), 1.0);
  EXPECT_EQ(word_accuracy(a, std::vector<std::string>{"0", "0", "0", "0"}), 0.0);
  EXPECT_EQ(word_accuracy(a, std::vector<std::string>{"1", "22", "AB", "8"}), 0.75);
  EXPECT_THROW(word_accuracy(a, std::vector<std::string>{"1"}), ContractError);
}

TEST(EditDistance, ReferenceCases) {
  EXPECT_EQ(edit_distance_utf8("abc", "abc"), 0u);
  EXPECT_EQ(edit_distance_utf8("abcd", ""), 4u);
  EXPECT_EQ(edit_distance_utf8("", "xy"), 2u);
  EXPECT_EQ(edit_distance_utf8("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance_utf8("kitten", "sitting"), oracle::levenshtein(U"kitten", U"sitting"));
  // Multi-byte code points count once.
  EXPECT_EQ(edit_distance_utf8("\xc3\xa9t\xc3\xa9", "ete"), 2u);
}

TEST(EditDistance, MatchesFullMatrixOracle) {
  oracle::Gen g(77);
  for (int i = 0; i < 300; ++i) {
    std::u32string a, b;
    for (std::size_t k = g.below(9); k > 0; --k) a += static_cast<char32_t>('a' + g.below(4));
    for (std::size_t k = g.below(9); k > 0; --k) b += static_cast<char32_t>('a' + g.below(4));
    EXPECT_EQ(edit_distance(a, b), oracle::levenshtein(a, b));
  }
}

TEST(Evaluate, PerfectStub) {
  const Corpus c = small_corpus(50, 2);
  const EvalResult r = evaluate(OracleDecoder(c), c);
  EXPECT_EQ(r.word_accuracy, 1.0);
  EXPECT_EQ(r.char_accuracy, 1.0);
  EXPECT_EQ(r.mean_entropy, 0.0);
  EXPECT_EQ(r.count, 50u);
}

TEST(Evaluate, UniformStub) {
  const Corpus c = small_corpus(20, 3);
  const EvalResult r = evaluate(UniformDecoder(c.vocab), c);
  EXPECT_NEAR(r.mean_entropy, std::log(15.0), 1e-9);
  EXPECT_EQ(r.word_accuracy, 0.0);
  EXPECT_EQ(r.char_accuracy, 0.0);
}

TEST(Evaluate, ThreadCountDoesNotChangeResult) {
  const Corpus c = small_corpus(30, 4);
  RecognizerConfig cfg;
  cfg.num_classes = c.vocab.num_classes();
  const Recognizer m(c.vocab, cfg, 9);
  const EvalResult a = evaluate(m, c, 1), b = evaluate(m, c, 3);
  EXPECT_EQ(a.word_accuracy, b.word_accuracy);
  EXPECT_EQ(a.char_accuracy, b.char_accuracy);
  EXPECT_EQ(a.mean_entropy, b.mean_entropy);
}

TEST(Evaluate, RejectsUnlabeledOrMismatchedCorpora) {
  Corpus c = small_corpus(5, 5);
  const OracleDecoder d(c);
  Corpus unlabeled = c;
  unlabeled.images[0].label.reset();
  EXPECT_THROW(evaluate(d, unlabeled), ContractError);
  Corpus other = c;
  other.vocab = VocabSpec({U'x', U'y'});
  EXPECT_THROW(evaluate(d, other), ContractError);
}

TEST(Report, RowsCsvAndRoundTrip) {
  const NamedResult one[] = {{"base", {0.5, 0.75, 0.125, 10}}};
  const Report r1 = compare_report(one);
  EXPECT_EQ(r1.csv, "name,word_acc,char_acc,mean_entropy,n\nbase,0.5,0.75,0.125,10\n");

  const NamedResult many[] = {{"zeta", {0.1, 0.2, 0.3, 7}}, {"alpha", {1.0 / 3.0, 0.9, 1e-9, 7}}};
  const Report r2 = compare_report(many);
  const auto back = parse_report_csv(r2.csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "zeta");
  EXPECT_EQ(back[1].name, "alpha");
  EXPECT_EQ(back[1].result.word_accuracy, 1.0 / 3.0);
  EXPECT_EQ(back[1].result.mean_entropy, 1e-9);
  EXPECT_LT(r2.text.find("zeta"), r2.text.find("alpha"));
  EXPECT_THROW(compare_report(std::span<const NamedResult>{}), ContractError);
  EXPECT_THROW(parse_report_csv("bogus\n"), FormatError);
}

TEST(Utf8, RoundTripAndRejection) {
  const std::u32string s = U"aé中\U0001F600";
  EXPECT_EQ(from_utf8(to_utf8(s)), s);
  EXPECT_THROW(from_utf8("\xc3"), ContractError);
  EXPECT_THROW(from_utf8("\xff"), ContractError);
}
