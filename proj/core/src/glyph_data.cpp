#include "smile/glyph_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "smile/error.hpp"
#include "smile/rng.hpp"
#include "smile/utf8.hpp"

namespace smile {

// ---------------------------------------------------------------- vocab

VocabSpec::VocabSpec(std::vector<char32_t> characters) : characters_(std::move(characters)) {
  std::set<char32_t> seen;
  for (char32_t c : characters_) {
    if (!seen.insert(c).second) throw ContractError("vocabulary contains duplicate symbol '" + to_utf8(c) + "'");
  }
  if (characters_.size() > 250) throw ContractError("vocabulary larger than 250 symbols");
}

std::optional<std::size_t> VocabSpec::index_of(char32_t symbol) const {
  auto it = std::find(characters_.begin(), characters_.end(), symbol);
  if (it == characters_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - characters_.begin());
}

std::string VocabSpec::text(std::span<const std::size_t> indices) const {
  std::u32string out;
  for (auto i : indices) {
    if (!is_character(i)) throw IndexError("index " + std::to_string(i) + " is not a character");
    out += characters_[i];
  }
  return to_utf8(out);
}

Label VocabSpec::encode(std::u32string_view text) const {
  Label out;
  for (char32_t c : text) {
    auto i = index_of(c);
    if (!i) throw ContractError("symbol '" + to_utf8(c) + "' is not in the vocabulary");
    out.push_back(*i);
  }
  return out;
}

// ---------------------------------------------------------------- templates

namespace {

struct FontGlyph {
  char32_t symbol;
  std::array<const char*, 8> rows;
};

// clang-format off
const FontGlyph kFont[] = {
  {U'0', {"..XXXX..", ".XX..XX.", ".XX.XXX.", ".XXXXXX.", ".XXX.XX.", ".XX..XX.", "..XXXX..", "........"}},
  {U'1', {"...XX...", "..XXX...", "...XX...", "...XX...", "...XX...", "...XX...", ".XXXXXX.", "........"}},
  {U'2', {"..XXXX..", ".XX..XX.", ".....XX.", "....XX..", "...XX...", "..XX....", ".XXXXXX.", "........"}},
  {U'3', {"..XXXX..", ".XX..XX.", ".....XX.", "...XXX..", ".....XX.", ".XX..XX.", "..XXXX..", "........"}},
  {U'4', {"....XX..", "...XXX..", "..XXXX..", ".XX.XX..", ".XXXXXX.", "....XX..", "....XX..", "........"}},
  {U'5', {".XXXXXX.", ".XX.....", ".XXXXX..", ".....XX.", ".....XX.", ".XX..XX.", "..XXXX..", "........"}},
  {U'6', {"...XXX..", "..XX....", ".XX.....", ".XXXXX..", ".XX..XX.", ".XX..XX.", "..XXXX..", "........"}},
  {U'7', {".XXXXXX.", ".....XX.", "....XX..", "...XX...", "..XX....", "..XX....", "..XX....", "........"}},
  {U'8', {"..XXXX..", ".XX..XX.", ".XX..XX.", "..XXXX..", ".XX..XX.", ".XX..XX.", "..XXXX..", "........"}},
  {U'9', {"..XXXX..", ".XX..XX.", ".XX..XX.", "..XXXXX.", ".....XX.", "....XX..", "..XXX...", "........"}},
  {U'A', {"...XX...", "..XXXX..", ".XX..XX.", ".XX..XX.", ".XXXXXX.", ".XX..XX.", ".XX..XX.", "........"}},
  {U'B', {".XXXXX..", ".XX..XX.", ".XX..XX.", ".XXXXX..", ".XX..XX.", ".XX..XX.", ".XXXXX..", "........"}},
  {U'C', {"..XXXX..", ".XX..XX.", ".XX.....", ".XX.....", ".XX.....", ".XX..XX.", "..XXXX..", "........"}},
  {U'D', {".XXXX...", ".XX.XX..", ".XX..XX.", ".XX..XX.", ".XX..XX.", ".XX.XX..", ".XXXX...", "........"}},
  {U'E', {".XXXXXX.", ".XX.....", ".XX.....", ".XXXXX..", ".XX.....", ".XX.....", ".XXXXXX.", "........"}},
  {U'F', {".XXXXXX.", ".XX.....", ".XX.....", ".XXXXX..", ".XX.....", ".XX.....", ".XX.....", "........"}},
};
// clang-format on

std::size_t lit_count(const GlyphBitmap& b) {
  return static_cast<std::size_t>(std::count(b.begin(), b.end(), std::uint8_t{1}));
}

GlyphBitmap from_font(const FontGlyph& g) {
  GlyphBitmap b{};
  for (std::size_t r = 0; r < kGlyphSize; ++r) {
    for (std::size_t c = 0; c < kGlyphSize; ++c) b[r * kGlyphSize + c] = g.rows[r][c] == 'X' ? 1 : 0;
  }
  return b;
}

GlyphBitmap random_bitmap(Rng& rng) {
  for (;;) {
    GlyphBitmap b{};
    // Keep a one-pixel border so neighbouring glyphs stay separated.
    for (std::size_t r = 1; r + 1 < kGlyphSize; ++r) {
      for (std::size_t c = 1; c + 1 < kGlyphSize; ++c) b[r * kGlyphSize + c] = rng.uniform() < 0.45 ? 1 : 0;
    }
    const auto n = lit_count(b);
    if (n >= 8 && n <= 40) return b;
  }
}

}  // namespace

GlyphTemplates::GlyphTemplates(std::vector<GlyphBitmap> bitmaps) : bitmaps_(std::move(bitmaps)) {}

GlyphTemplates GlyphTemplates::for_vocab(const VocabSpec& vocab, std::uint64_t seed) {
  std::vector<GlyphBitmap> out;
  std::set<GlyphBitmap> used;
  Rng rng(derive_seed(seed, 0x676c797068ULL));
  for (char32_t c : vocab.characters()) {
    const auto* it = std::find_if(std::begin(kFont), std::end(kFont), [c](const FontGlyph& g) { return g.symbol == c; });
    GlyphBitmap b{};
    if (it != std::end(kFont)) {
      b = from_font(*it);
    } else {
      do {
        b = random_bitmap(rng);
      } while (used.count(b) || std::any_of(std::begin(kFont), std::end(kFont),
                                            [&](const FontGlyph& g) { return from_font(g) == b; }));
    }
    used.insert(b);
    out.push_back(b);
  }
  return GlyphTemplates(std::move(out));
}

void GlyphTemplates::validate(const VocabSpec& vocab) const {
  if (bitmaps_.size() != vocab.num_characters()) {
    throw ContractError("glyph templates: " + std::to_string(bitmaps_.size()) + " bitmaps for " +
                        std::to_string(vocab.num_characters()) + " characters");
  }
  std::set<GlyphBitmap> seen;
  for (std::size_t i = 0; i < bitmaps_.size(); ++i) {
    const auto n = lit_count(bitmaps_[i]);
    if (n < 8 || n > 40) {
      throw ContractError("glyph template " + std::to_string(i) + " lights " + std::to_string(n) + " pixels");
    }
    for (auto v : bitmaps_[i]) {
      if (v > 1) throw ContractError("glyph template " + std::to_string(i) + " is not binary");
    }
    if (!seen.insert(bitmaps_[i]).second) {
      throw ContractError("glyph template " + std::to_string(i) + " duplicates an earlier one");
    }
  }
}

// ---------------------------------------------------------------- images

void DomainConfig::validate() const {
  if (!(salt_pepper_prob >= 0.0 && salt_pepper_prob <= 1.0)) throw ContractError("salt_pepper_prob outside [0,1]");
  if (!(intensity_scale > 0.0 && intensity_scale <= 1.0)) throw ContractError("intensity_scale outside (0,1]");
  if (horizontal_shear < 0 || horizontal_shear > 2) throw ContractError("horizontal_shear outside {0,1,2}");
  if (!(background_level >= 0.0 && background_level < 1.0)) throw ContractError("background_level outside [0,1)");
}

bool Corpus::labeled() const {
  return std::all_of(images.begin(), images.end(), [](const TextImage& t) { return t.label.has_value(); });
}

UnlabeledImages::UnlabeledImages(const Corpus& corpus) : vocab_(corpus.vocab) {
  images_.reserve(corpus.images.size());
  for (const auto& t : corpus.images) images_.push_back(t.image);
}

TextImage render_string(std::span<const std::size_t> label, const VocabSpec& vocab, const GlyphTemplates& templates,
                        std::size_t l_max) {
  if (label.empty() || label.size() > l_max) {
    throw ContractError("render_string: label length " + std::to_string(label.size()) + " outside [1, " +
                        std::to_string(l_max) + "]");
  }
  TextImage out;
  out.image.height = kImageHeight;
  out.image.width = kGlyphSize * l_max;
  out.image.pixels.assign(out.image.height * out.image.width, 0.0);
  for (std::size_t k = 0; k < label.size(); ++k) {
    if (!vocab.is_character(label[k])) {
      throw ContractError("render_string: index " + std::to_string(label[k]) + " is not a character");
    }
    const auto& bitmap = templates.at(label[k]);
    for (std::size_t r = 0; r < kGlyphSize; ++r) {
      for (std::size_t c = 0; c < kGlyphSize; ++c) {
        out.image.pixels[r * out.image.width + k * kGlyphSize + c] = bitmap[r * kGlyphSize + c];
      }
    }
  }
  out.label = Label(label.begin(), label.end());
  return out;
}

TextImage apply_domain_shift(const TextImage& img, const DomainConfig& cfg, std::uint64_t sample_seed) {
  cfg.validate();
  TextImage out = img;
  auto& px = out.image.pixels;
  const std::size_t h = out.image.height, w = out.image.width;

  if (cfg.horizontal_shear > 0 && h > 1) {
    // Italic slant: row r moves right by floor(s * (h-1-r) / (h-1)), so the
    // top row moves by the full shear and the bottom row stays.
    const auto s = static_cast<std::size_t>(cfg.horizontal_shear);
    std::vector<double> sheared(px.size(), 0.0);
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t offset = s * (h - 1 - r) / (h - 1);
      for (std::size_t c = 0; c + offset < w; ++c) sheared[r * w + c + offset] = px[r * w + c];
    }
    px = std::move(sheared);
  }
  for (double& v : px) v *= cfg.intensity_scale;
  for (double& v : px) v = cfg.background_level + (1.0 - cfg.background_level) * v;
  if (cfg.invert) {
    for (double& v : px) v = 1.0 - v;
  }
  if (cfg.salt_pepper_prob > 0.0) {
    Rng rng(derive_seed(cfg.seed, sample_seed));
    for (double& v : px) {
      if (rng.uniform() < cfg.salt_pepper_prob) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
  }
  for (double& v : px) v = std::clamp(v, 0.0, 1.0);
  return out;
}

void quantize(Image& image) {
  for (double& v : image.pixels) {
    v = static_cast<double>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))) / 255.0;
  }
}

Corpus generate_corpus(const VocabSpec& vocab, const GlyphTemplates& templates, const CorpusOptions& options) {
  if (vocab.num_characters() == 0) throw ContractError("generate_corpus: empty vocabulary");
  if (options.count < 1) throw ContractError("generate_corpus: count must be >= 1");
  if (options.min_length < 1 || options.min_length > options.max_length || options.max_length > options.l_max) {
    throw ContractError("generate_corpus: invalid length range");
  }
  templates.validate(vocab);
  if (options.shift) options.shift->validate();

  std::vector<double> cumulative;
  if (options.sampler == CharSampler::zipf) {
    double total = 0.0;
    for (std::size_t i = 0; i < vocab.num_characters(); ++i) {
      total += 1.0 / std::pow(static_cast<double>(i + 1), options.zipf_exponent);
      cumulative.push_back(total);
    }
    for (double& c : cumulative) c /= total;
  }

  Corpus corpus;
  corpus.vocab = vocab;
  corpus.seed = options.seed;
  corpus.images.reserve(options.count);
  const std::size_t span = options.max_length - options.min_length + 1;
  for (std::size_t i = 0; i < options.count; ++i) {
    Rng rng(derive_seed(options.seed, i));
    const std::size_t len = options.min_length + rng.below(span);
    Label label(len);
    for (auto& ch : label) {
      if (options.sampler == CharSampler::uniform) {
        ch = rng.below(vocab.num_characters());
      } else {
        const double u = rng.uniform();
        ch = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        ch = std::min(ch, vocab.num_characters() - 1);
      }
    }
    TextImage img = render_string(label, vocab, templates, options.l_max);
    if (options.shift) {
      img = apply_domain_shift(img, *options.shift, rng.next());
      img.domain = DomainTag::target;
    }
    quantize(img.image);
    if (!options.keep_labels) img.label.reset();
    corpus.images.push_back(std::move(img));
  }
  return corpus;
}

// ---------------------------------------------------------------- file format

namespace {

constexpr char kCorpusMagic[4] = {'S', 'M', 'C', 'P'};
constexpr std::uint32_t kCorpusVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const std::string& what) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("corpus truncated at offset " + std::to_string(pos_) + " while reading " + what);
    }
  }
  std::uint8_t u8(const std::string& what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_corpus(const Corpus& corpus) {
  std::vector<std::uint8_t> out;
  const std::size_t h = corpus.images.empty() ? kImageHeight : corpus.images.front().image.height;
  const std::size_t w = corpus.images.empty() ? 0 : corpus.images.front().image.width;
  out.insert(out.end(), std::begin(kCorpusMagic), std::end(kCorpusMagic));
  put_u32(out, kCorpusVersion);
  put_u32(out, static_cast<std::uint32_t>(h));
  put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, static_cast<std::uint32_t>(corpus.images.size()));
  put_u32(out, static_cast<std::uint32_t>(corpus.vocab.num_characters()));
  for (char32_t c : corpus.vocab.characters()) put_u32(out, static_cast<std::uint32_t>(c));
  for (const auto& t : corpus.images) {
    if (t.image.height != h || t.image.width != w) throw ContractError("save_corpus: images differ in size");
    out.push_back(static_cast<std::uint8_t>(t.domain));
    const std::size_t len = t.label ? t.label->size() : 0;
    if (len > 255) throw ContractError("save_corpus: label longer than 255");
    out.push_back(static_cast<std::uint8_t>(len));
    if (t.label) {
      for (auto i : *t.label) out.push_back(static_cast<std::uint8_t>(i));
    }
    for (double v : t.image.pixels) {
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
  return out;
}

Corpus deserialize_corpus(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kCorpusMagic))) {
    throw FormatError("corpus: bad magic at offset 0");
  }
  const auto version = in.u32("version");
  if (version != kCorpusVersion) {
    throw FormatError("corpus: unsupported version " + std::to_string(version) + " at offset 4");
  }
  const auto h = in.u32("image height");
  const auto w = in.u32("image width");
  if (h != kImageHeight) throw FormatError("corpus: image height " + std::to_string(h) + " at offset 8, expected 8");
  const auto count = in.u32("record count");
  const auto nvocab = in.u32("vocabulary size");
  std::vector<char32_t> chars;
  for (std::uint32_t i = 0; i < nvocab; ++i) chars.push_back(static_cast<char32_t>(in.u32("vocabulary symbol")));
  Corpus corpus;
  try {
    corpus.vocab = VocabSpec(std::move(chars));
  } catch (const ContractError& e) {
    throw FormatError(std::string("corpus: invalid vocabulary block: ") + e.what());
  }
  corpus.images.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::string rec = "record " + std::to_string(r);
    TextImage t;
    const auto record_offset = in.offset();
    const auto tag = in.u8(rec + " domain tag");
    if (tag > 1) throw FormatError("corpus: invalid domain tag at offset " + std::to_string(record_offset));
    t.domain = static_cast<DomainTag>(tag);
    const auto len = in.u8(rec + " label length");
    if (len > 0) {
      Label label;
      for (std::uint8_t k = 0; k < len; ++k) {
        const auto off = in.offset();
        const auto idx = in.u8(rec + " label");
        if (idx >= corpus.vocab.num_characters()) {
          throw FormatError("corpus: label index " + std::to_string(idx) + " outside vocabulary at offset " +
                            std::to_string(off));
        }
        label.push_back(idx);
      }
      t.label = std::move(label);
    }
    t.image.height = h;
    t.image.width = w;
    auto px = in.bytes(static_cast<std::size_t>(h) * w, rec + " pixels");
    t.image.pixels.reserve(px.size());
    for (auto b : px) t.image.pixels.push_back(static_cast<double>(b) / 255.0);
    corpus.images.push_back(std::move(t));
  }
  if (!in.done()) throw FormatError("corpus: trailing bytes at offset " + std::to_string(in.offset()));
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  const auto bytes = serialize_corpus(corpus);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ContractError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ContractError("failed writing " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractError("cannot open corpus " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_corpus(bytes);
}

// ---------------------------------------------------------------- presets

Preset preset(const std::string& name) {
  if (name == "glyph12") {
    Preset p;
    p.name = name;
    p.vocab = VocabSpec(std::vector<char32_t>{U'0', U'1', U'2', U'3', U'4', U'5', U'6', U'7', U'8', U'9', U'A', U'B'});
    p.min_length = 1;
    p.max_length = 4;
    p.l_max = 4;
    p.source_count = 5000;
    p.source_val_count = 1000;
    p.target_count = 5000;
    p.target_test_count = 1000;
    p.target_shift.salt_pepper_prob = 0.15;
    p.target_shift.intensity_scale = 0.7;
    p.target_shift.background_level = 0.1;
    p.target_shift.horizontal_shear = 1;
    p.target_shift.invert = false;
    return p;
  }
  throw ContractError("unknown preset '" + name + "'");
}

PresetCorpora generate_preset(const Preset& p, std::uint64_t seed) {
  const auto templates = GlyphTemplates::for_vocab(p.vocab, seed);
  CorpusOptions base;
  base.min_length = p.min_length;
  base.max_length = p.max_length;
  base.l_max = p.l_max;

  PresetCorpora out;
  auto opts = base;
  opts.count = p.source_count;
  opts.seed = derive_seed(seed, 1);
  out.source = generate_corpus(p.vocab, templates, opts);

  opts.count = p.source_val_count;
  opts.seed = derive_seed(seed, 2);
  out.source_val = generate_corpus(p.vocab, templates, opts);

  DomainConfig shift = p.target_shift;
  shift.seed = derive_seed(seed, 3);
  opts.shift = shift;
  opts.count = p.target_count;
  opts.seed = derive_seed(seed, 4);
  out.target_labeled = generate_corpus(p.vocab, templates, opts);
  out.target = out.target_labeled;
  for (auto& t : out.target.images) t.label.reset();

  opts.count = p.target_test_count;
  opts.seed = derive_seed(seed, 5);
  out.target_test = generate_corpus(p.vocab, templates, opts);
  return out;
}

}  // namespace smile
