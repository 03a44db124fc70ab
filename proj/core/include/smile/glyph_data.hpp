#pragma once

// Rendered text-line corpora for the two domains: clean labeled source images
// and distribution-shifted target images.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace smile {

inline constexpr std::size_t kGlyphSize = 8;
inline constexpr std::size_t kImageHeight = kGlyphSize;

// Character indices of one text line; never contains special tokens.
using Label = std::vector<std::size_t>;

// Ordered character set plus three trailing special tokens GO, EOS, PAD.
class VocabSpec {
 public:
  VocabSpec() = default;
  explicit VocabSpec(std::vector<char32_t> characters);

  const std::vector<char32_t>& characters() const { return characters_; }
  std::size_t num_characters() const { return characters_.size(); }
  std::size_t num_classes() const { return characters_.size() + 3; }
  std::size_t go() const { return characters_.size(); }
  std::size_t eos() const { return characters_.size() + 1; }
  std::size_t pad() const { return characters_.size() + 2; }
  bool is_character(std::size_t index) const { return index < characters_.size(); }

  std::optional<std::size_t> index_of(char32_t symbol) const;
  // UTF-8 text of a sequence of character indices.
  std::string text(std::span<const std::size_t> indices) const;
  Label encode(std::u32string_view text) const;

  bool operator==(const VocabSpec&) const = default;

 private:
  std::vector<char32_t> characters_;
};

using GlyphBitmap = std::array<std::uint8_t, kGlyphSize * kGlyphSize>;

// One 8x8 binary bitmap per vocabulary character.
class GlyphTemplates {
 public:
  explicit GlyphTemplates(std::vector<GlyphBitmap> bitmaps);

  // Built-in bitmaps for digits and A-Z; other symbols get seeded random
  // bitmaps that keep the set distinct.
  static GlyphTemplates for_vocab(const VocabSpec& vocab, std::uint64_t seed = 0);

  // Throws ContractError unless the set matches the vocabulary size, every
  // bitmap lights 8..40 pixels, and no two bitmaps coincide.
  void validate(const VocabSpec& vocab) const;

  const GlyphBitmap& at(std::size_t index) const { return bitmaps_.at(index); }
  std::size_t size() const { return bitmaps_.size(); }

 private:
  std::vector<GlyphBitmap> bitmaps_;
};

enum class DomainTag : std::uint8_t { source = 0, target = 1 };

struct DomainConfig {
  double salt_pepper_prob = 0.0;
  bool invert = false;
  double intensity_scale = 1.0;
  int horizontal_shear = 0;
  double background_level = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Grayscale bitmap in [0,1], row-major, height kImageHeight.
struct Image {
  std::size_t height = kImageHeight;
  std::size_t width = 0;
  std::vector<double> pixels;

  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  bool operator==(const Image&) const = default;
};

struct TextImage {
  Image image;
  std::optional<Label> label;
  DomainTag domain = DomainTag::source;

  bool operator==(const TextImage&) const = default;
};

struct Corpus {
  VocabSpec vocab;
  std::vector<TextImage> images;
  std::uint64_t seed = 0;

  std::size_t size() const { return images.size(); }
  bool labeled() const;
  bool operator==(const Corpus&) const = default;
};

// Pixel-only view of a corpus. This is the only form in which target-domain
// training data reaches the adaptation loop, so no label is reachable from it.
class UnlabeledImages {
 public:
  UnlabeledImages() = default;
  explicit UnlabeledImages(const Corpus& corpus);

  const VocabSpec& vocab() const { return vocab_; }
  std::span<const Image> images() const { return images_; }
  std::size_t size() const { return images_.size(); }

 private:
  VocabSpec vocab_;
  std::vector<Image> images_;
};

// Horizontal concatenation of templates (lit = 1, background = 0), right
// padded to width 8 * l_max.
TextImage render_string(std::span<const std::size_t> label, const VocabSpec& vocab,
                        const GlyphTemplates& templates, std::size_t l_max);

// Shear, intensity scale, background lift, inversion, salt-and-pepper, in
// that order. Deterministic in (cfg.seed, sample_seed); the label is kept.
TextImage apply_domain_shift(const TextImage& img, const DomainConfig& cfg, std::uint64_t sample_seed);

// Rounds every pixel to the nearest multiple of 1/255, the stored precision.
void quantize(Image& image);

enum class CharSampler { uniform, zipf };

struct CorpusOptions {
  std::size_t count = 1;
  std::size_t min_length = 1;
  std::size_t max_length = 4;
  std::size_t l_max = 4;
  std::optional<DomainConfig> shift;
  CharSampler sampler = CharSampler::uniform;
  double zipf_exponent = 1.0;
  // Labels are still drawn (they select the glyphs) but dropped from the
  // output when false.
  bool keep_labels = true;
  std::uint64_t seed = 0;
};

Corpus generate_corpus(const VocabSpec& vocab, const GlyphTemplates& templates, const CorpusOptions& options);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_corpus(const Corpus& corpus);
Corpus deserialize_corpus(std::span<const std::uint8_t> bytes);

// Named benchmark configuration.
struct Preset {
  std::string name;
  VocabSpec vocab;
  std::size_t min_length = 1;
  std::size_t max_length = 4;
  std::size_t l_max = 4;
  std::size_t source_count = 0;
  std::size_t source_val_count = 0;
  std::size_t target_count = 0;
  std::size_t target_test_count = 0;
  DomainConfig target_shift;
};

Preset preset(const std::string& name);

struct PresetCorpora {
  Corpus source;          // labeled, clean
  Corpus source_val;      // labeled, clean, disjoint seed
  Corpus target;          // unlabeled, shifted
  Corpus target_labeled;  // the same images as `target` with labels, for finetuning
  Corpus target_test;     // sealed labeled shifted test section
};

PresetCorpora generate_preset(const Preset& p, std::uint64_t seed);

}  // namespace smile
