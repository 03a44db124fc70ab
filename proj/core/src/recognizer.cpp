#include "smile/recognizer.hpp"

#include <cmath>

#include "smile/error.hpp"
#include "smile/rng.hpp"

namespace smile {

namespace {

constexpr std::size_t kStripValues = kGlyphSize * kGlyphSize;

void append_gru_shapes(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, std::size_t in,
                       std::size_t h) {
  out.push_back({prefix + "/w", {in, 3 * h}});
  out.push_back({prefix + "/u", {h, 3 * h}});
  out.push_back({prefix + "/b", {1, 3 * h}});
  out.push_back({prefix + "/bu", {1, 3 * h}});
}

bool is_bias(const std::string& name) {
  return name.ends_with("/b") || name.ends_with("/bu");
}

Tensor gru_step(const GruWeights& g, const Tensor& gx_row, const Tensor& h) {
  const std::size_t hs = h.cols();
  const Tensor gh = add(matmul(h, g.u), g.bu);
  const Tensor z = sigmoid(add(slice_cols(gx_row, 0, hs), slice_cols(gh, 0, hs)));
  const Tensor r = sigmoid(add(slice_cols(gx_row, hs, hs), slice_cols(gh, hs, hs)));
  const Tensor n = tanh(add(slice_cols(gx_row, 2 * hs, hs), mul(r, slice_cols(gh, 2 * hs, hs))));
  return add(n, mul(z, sub(h, n)));
}

std::size_t argmax(std::span<const double> v, std::size_t begin, std::size_t end) {
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < end; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_shapes(const RecognizerConfig& cfg) {
  const std::size_t d = cfg.d_feat, h = cfg.dec_hidden, e = cfg.embed, k = cfg.num_classes;
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"enc/proj/w", {kStripValues, d}});
  out.push_back({"enc/proj/b", {1, d}});
  append_gru_shapes(out, "enc/fwd", d, d);
  if (cfg.bidirectional) append_gru_shapes(out, "enc/bwd", d, d);
  out.push_back({"att/w_enc", {d, d}});
  out.push_back({"att/w_dec", {h, d}});
  out.push_back({"att/v", {d, 1}});
  append_gru_shapes(out, "dec/gru", d + e, h);
  out.push_back({"dec/embed", {k, e}});
  out.push_back({"dec/out/w", {h, k}});
  out.push_back({"dec/out/b", {1, k}});
  return out;
}

std::vector<RecognizerParams::Entry> RecognizerParams::named(const RecognizerConfig& cfg) {
  std::vector<Entry> out = {
      {"enc/proj/w", &proj_w},     {"enc/proj/b", &proj_b},   {"enc/fwd/w", &enc_fwd.w},
      {"enc/fwd/u", &enc_fwd.u},   {"enc/fwd/b", &enc_fwd.b}, {"enc/fwd/bu", &enc_fwd.bu},
  };
  if (cfg.bidirectional) {
    out.insert(out.end(), {{"enc/bwd/w", &enc_bwd.w},
                           {"enc/bwd/u", &enc_bwd.u},
                           {"enc/bwd/b", &enc_bwd.b},
                           {"enc/bwd/bu", &enc_bwd.bu}});
  }
  out.insert(out.end(), {{"att/w_enc", &att_w_enc},
                         {"att/w_dec", &att_w_dec},
                         {"att/v", &att_v},
                         {"dec/gru/w", &dec.w},
                         {"dec/gru/u", &dec.u},
                         {"dec/gru/b", &dec.b},
                         {"dec/gru/bu", &dec.bu},
                         {"dec/embed", &embed},
                         {"dec/out/w", &out_w},
                         {"dec/out/b", &out_b}});
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> RecognizerParams::named(const RecognizerConfig& cfg) const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& e : const_cast<RecognizerParams*>(this)->named(cfg)) out.emplace_back(e.name, e.tensor);
  return out;
}

RecognizerParams RecognizerParams::init(const RecognizerConfig& cfg, std::uint64_t seed) {
  if (cfg.num_classes < 4) throw ContractError("recognizer needs at least one character class");
  RecognizerParams p;
  Rng rng(seed);
  const auto shapes = parameter_shapes(cfg);
  auto entries = p.named(cfg);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    std::vector<double> values(numel(shape), 0.0);
    if (!is_bias(name)) {
      const double a = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      for (double& v : values) v = rng.uniform(-a, a);
    }
    *entries[i].tensor = Tensor::parameter(shape, std::move(values));
  }
  return p;
}

void RecognizerParams::zero_grad(const RecognizerConfig& cfg) {
  for (auto& e : named(cfg)) e.tensor->zero_grad();
}

Recognizer::Recognizer(VocabSpec vocab, RecognizerConfig cfg, std::uint64_t seed)
    : vocab_(std::move(vocab)), cfg_(cfg) {
  if (cfg_.num_classes == 0) cfg_.num_classes = vocab_.num_classes();
  if (cfg_.num_classes != vocab_.num_classes()) throw ContractError("recognizer class count disagrees with vocabulary");
  params_ = RecognizerParams::init(cfg_, seed);
}

Recognizer::Recognizer(VocabSpec vocab, RecognizerConfig cfg, RecognizerParams params)
    : vocab_(std::move(vocab)), cfg_(cfg), params_(std::move(params)) {
  if (cfg_.num_classes != vocab_.num_classes()) throw ContractError("recognizer class count disagrees with vocabulary");
  const auto shapes = parameter_shapes(cfg_);
  auto entries = params_.named(cfg_);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].tensor->defined() || entries[i].tensor->shape() != shapes[i].second) {
      throw DimensionError("parameter " + entries[i].name + " does not have shape " + shape_string(shapes[i].second));
    }
  }
}

Recognizer Recognizer::clone() const {
  RecognizerParams copy;
  auto dst = copy.named(cfg_);
  const auto src = params_.named(cfg_);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const Tensor& t = *src[i].second;
    *dst[i].tensor = Tensor::parameter(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
  }
  return Recognizer(vocab_, cfg_, std::move(copy));
}

Tensor Recognizer::encode(const Image& img) const {
  if (img.height != kImageHeight) {
    throw DimensionError("encode: image height " + std::to_string(img.height) + ", expected 8");
  }
  if (img.width == 0 || img.width % kGlyphSize != 0) {
    throw DimensionError("encode: image width " + std::to_string(img.width) + " is not a positive multiple of 8");
  }
  const std::size_t n = img.width / kGlyphSize;
  std::vector<double> strips(n * kStripValues);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < kGlyphSize; ++r) {
      for (std::size_t c = 0; c < kGlyphSize; ++c) {
        strips[j * kStripValues + r * kGlyphSize + c] = img.at(r, j * kGlyphSize + c);
      }
    }
  }
  const Tensor x = Tensor::constant({n, kStripValues}, std::move(strips));
  const Tensor f = tanh(add(matmul(x, params_.proj_w), repeat_rows(params_.proj_b, n)));

  const std::size_t d = cfg_.d_feat;
  auto run = [&](const GruWeights& g, bool reverse) {
    const Tensor gx = add(matmul(f, g.w), repeat_rows(g.b, n));
    std::vector<Tensor> states(n);
    Tensor h = Tensor::zeros({1, d});
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = reverse ? n - 1 - k : k;
      h = gru_step(g, row(gx, j), h);
      states[j] = h;
    }
    return states;
  };
  std::vector<Tensor> fwd = run(params_.enc_fwd, false);
  if (cfg_.bidirectional) {
    const std::vector<Tensor> bwd = run(params_.enc_bwd, true);
    for (std::size_t j = 0; j < n; ++j) fwd[j] = add(fwd[j], bwd[j]);
  }
  return concat_rows(fwd);
}

Tensor Recognizer::decoder_step(const Tensor& features, const Tensor& projected, Tensor& state, std::size_t prev,
                                std::vector<Tensor>& attention) const {
  const std::size_t n = features.rows();
  Tensor alpha;
  if (n == 1) {
    alpha = Tensor::constant({1, 1}, {1.0});
  } else {
    const Tensor q = matmul(state, params_.att_w_dec);
    const Tensor energy = matmul(tanh(add(projected, repeat_rows(q, n))), params_.att_v);
    alpha = softmax(reshape(energy, {1, n}));
  }
  attention.push_back(alpha);
  const Tensor context = matmul(alpha, features);
  const std::size_t idx[1] = {prev};
  const Tensor input = concat_cols(context, gather_rows(params_.embed, idx));
  const Tensor gx = add(matmul(input, params_.dec.w), params_.dec.b);
  state = gru_step(params_.dec, gx, state);
  return softmax(add(matmul(state, params_.out_w), params_.out_b));
}

DecoderOutput Recognizer::decode_teacher_forced(const Tensor& features, std::span<const std::size_t> label) const {
  if (label.size() > cfg_.l_max) {
    throw ContractError("decode_teacher_forced: label length " + std::to_string(label.size()) + " exceeds l_max " +
                        std::to_string(cfg_.l_max));
  }
  for (auto c : label) {
    if (!vocab_.is_character(c)) {
      throw ContractError("decode_teacher_forced: label index " + std::to_string(c) + " is not a character");
    }
  }
  DecoderOutput out;
  const Tensor projected = matmul(features, params_.att_w_enc);
  Tensor state = Tensor::zeros({1, cfg_.dec_hidden});
  std::vector<Tensor> rows;
  std::size_t prev = vocab_.go();
  for (std::size_t t = 0; t <= label.size(); ++t) {
    Tensor p = decoder_step(features, projected, state, prev, out.attention);
    out.pseudo_labels.push_back(argmax(p.data(), 0, p.size()));
    rows.push_back(std::move(p));
    if (t < label.size()) prev = label[t];
  }
  out.probs = concat_rows(rows);
  return out;
}

DecoderOutput Recognizer::decode_greedy(const Tensor& features) const {
  DecoderOutput out;
  const Tensor projected = matmul(features, params_.att_w_enc);
  Tensor state = Tensor::zeros({1, cfg_.dec_hidden});
  std::vector<Tensor> rows;
  std::size_t prev = vocab_.go();
  const std::size_t nchar = vocab_.num_characters();
  for (std::size_t t = 0; t < cfg_.l_max + 1; ++t) {
    Tensor p = decoder_step(features, projected, state, prev, out.attention);
    const auto v = p.data();
    std::size_t best = argmax(v, 0, nchar);
    if (v[vocab_.eos()] > v[best]) best = vocab_.eos();
    out.pseudo_labels.push_back(best);
    rows.push_back(std::move(p));
    if (best == vocab_.eos()) break;
    prev = best;
  }
  out.probs = concat_rows(rows);
  return out;
}

Label strip_eos(const DecoderOutput& out, const VocabSpec& vocab, std::size_t l_max) {
  Label label;
  for (auto c : out.pseudo_labels) {
    if (c == vocab.eos() || label.size() == l_max) break;
    if (vocab.is_character(c)) label.push_back(c);
  }
  return label;
}

Label Recognizer::predict_indices(const Image& img) const {
  return strip_eos(decode_greedy(encode(img)), vocab_, cfg_.l_max);
}

std::string Recognizer::predict(const Image& img) const { return vocab_.text(predict_indices(img)); }

}  // namespace smile
