#include "smile/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "smile/error.hpp"

namespace smile {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_array(std::vector<std::uint8_t>& out, const NamedArray& a) {
  if (a.name.size() > UINT16_MAX) throw ContractError("tensor name too long");
  if (a.shape.size() > UINT8_MAX) throw ContractError("tensor rank too large");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(a.name.size()));
  out.insert(out.end(), a.name.begin(), a.name.end());
  put<std::uint8_t>(out, static_cast<std::uint8_t>(a.shape.size()));
  for (auto d : a.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double v : a.values) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const std::string& what) {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw FormatError("checkpoint truncated at offset " + std::to_string(pos_) + " while reading " + what);
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n, const std::string& what) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("checkpoint truncated at offset " + std::to_string(pos_) + " while reading " + what);
    }
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
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

Checkpoint Checkpoint::from_model(const Recognizer& model, std::uint64_t step) {
  Checkpoint ck;
  ck.vocab = model.vocab();
  ck.arch = model.config();
  ck.step = step;
  for (const auto& [name, t] : model.params().named(model.config())) {
    ck.params.push_back({name, t->shape(), std::vector<double>(t->data().begin(), t->data().end())});
  }
  return ck;
}

Recognizer Checkpoint::to_model() const {
  const auto shapes = parameter_shapes(arch);
  if (params.size() != shapes.size()) {
    throw FormatError("checkpoint holds " + std::to_string(params.size()) + " parameter tensors, architecture needs " +
                      std::to_string(shapes.size()));
  }
  RecognizerParams p;
  auto entries = p.named(arch);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].name != shapes[i].first) {
      throw FormatError("checkpoint tensor #" + std::to_string(i) + " is '" + params[i].name + "', expected '" +
                        shapes[i].first + "'");
    }
    if (params[i].shape != shapes[i].second) {
      throw FormatError("checkpoint tensor '" + params[i].name + "' has shape " + shape_string(params[i].shape) +
                        ", expected " + shape_string(shapes[i].second));
    }
    *entries[i].tensor = Tensor::parameter(params[i].shape, params[i].values);
  }
  return Recognizer(vocab, arch, std::move(p));
}

const NamedArray* Checkpoint::find_state(std::string_view name) const {
  for (const auto& s : state) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.vocab.num_characters()));
  for (char32_t c : ck.vocab.characters()) put<std::uint32_t>(out, static_cast<std::uint32_t>(c));
  for (auto v : {ck.arch.d_feat, ck.arch.dec_hidden, ck.arch.embed, ck.arch.num_classes, ck.arch.l_max}) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  put<std::uint64_t>(out, ck.step);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.params.size() + ck.state.size()));
  for (const auto& a : ck.params) put_array(out, a);
  for (const auto& a : ck.state) {
    if (!a.name.starts_with("opt/")) throw ContractError("state tensor '" + a.name + "' lacks the opt/ prefix");
    put_array(out, a);
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic at offset 0");
  }
  in.str(4, "magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const auto nvocab = in.get<std::uint32_t>("vocabulary size");
  std::vector<char32_t> chars;
  for (std::uint32_t i = 0; i < nvocab; ++i) chars.push_back(static_cast<char32_t>(in.get<std::uint32_t>("vocabulary")));
  try {
    ck.vocab = VocabSpec(std::move(chars));
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint: invalid vocabulary block: ") + e.what());
  }
  ck.arch.d_feat = in.get<std::uint32_t>("architecture d_feat");
  ck.arch.dec_hidden = in.get<std::uint32_t>("architecture hidden");
  ck.arch.embed = in.get<std::uint32_t>("architecture embed");
  ck.arch.num_classes = in.get<std::uint32_t>("architecture class count");
  ck.arch.l_max = in.get<std::uint32_t>("architecture l_max");
  if (ck.arch.num_classes != ck.vocab.num_classes()) {
    throw FormatError("checkpoint: architecture has " + std::to_string(ck.arch.num_classes) +
                      " classes, vocabulary implies " + std::to_string(ck.vocab.num_classes()));
  }
  ck.step = in.get<std::uint64_t>("step counter");
  const auto count = in.get<std::uint32_t>("tensor count");

  std::vector<NamedArray> all;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "tensor #" + std::to_string(i) +
                              (all.empty() ? std::string() : " (after '" + all.back().name + "')");
    NamedArray a;
    const auto len = in.get<std::uint16_t>(where + " name length");
    a.name = in.str(len, where + " name");
    const std::string named = "tensor '" + a.name + "'";
    const auto rank = in.get<std::uint8_t>(named + " rank");
    if (rank == 0) throw FormatError("checkpoint: " + named + " has rank 0");
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto d = in.get<std::uint32_t>(named + " dimensions");
      if (d == 0) throw FormatError("checkpoint: " + named + " has a zero dimension");
      a.shape.push_back(d);
    }
    const std::size_t n = numel(a.shape);
    if (n > (bytes.size() - in.offset()) / 8 + 1) {
      throw FormatError("checkpoint truncated at offset " + std::to_string(in.offset()) + " while reading " + named +
                        " values");
    }
    a.values.reserve(n);
    for (std::size_t k = 0; k < n; ++k) a.values.push_back(std::bit_cast<double>(in.get<std::uint64_t>(named + " values")));
    all.push_back(std::move(a));
  }
  if (!in.done()) throw FormatError("checkpoint: trailing bytes at offset " + std::to_string(in.offset()));

  for (auto& a : all) {
    if (a.name.starts_with("opt/")) {
      ck.state.push_back(std::move(a));
    } else {
      if (!ck.state.empty()) throw FormatError("checkpoint: parameter '" + a.name + "' after optimizer state");
      ck.params.push_back(std::move(a));
    }
  }
  ck.arch.bidirectional = false;
  for (const auto& p : ck.params) {
    if (p.name.starts_with("enc/bwd/")) ck.arch.bidirectional = true;
  }
  // Validates names and shapes against the architecture record.
  (void)ck.to_model();
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ck);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ContractError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ContractError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace smile
