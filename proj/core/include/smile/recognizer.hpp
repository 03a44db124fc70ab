#pragma once

// Attention encoder-decoder text recognizer.
//
// The encoder flattens each 8x8 column strip, projects it with tanh and runs
// a GRU over the strips (optionally in both directions, summed). The decoder
// is a GRU fed with [attention context, previous-symbol embedding] and
// followed by a linear output layer and softmax.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "smile/glyph_data.hpp"
#include "smile/tensor.hpp"

namespace smile {

struct RecognizerConfig {
  std::size_t d_feat = 32;      // strip projection, encoder hidden and attention size
  std::size_t dec_hidden = 64;
  std::size_t embed = 16;
  std::size_t num_classes = 0;  // characters + GO, EOS, PAD
  std::size_t l_max = 4;
  bool bidirectional = true;

  bool operator==(const RecognizerConfig&) const = default;
};

struct GruWeights {
  Tensor w;   // in x 3h, gate order z, r, n
  Tensor u;   // h x 3h
  Tensor b;   // 1 x 3h
  Tensor bu;  // 1 x 3h
};

struct RecognizerParams {
  Tensor proj_w, proj_b;
  GruWeights enc_fwd, enc_bwd;
  Tensor att_w_enc, att_w_dec, att_v;
  GruWeights dec;
  Tensor embed;
  Tensor out_w, out_b;

  // Uniform(-a, a), a = 1/sqrt(fan_in), biases zero, drawn from one stream
  // in canonical order.
  static RecognizerParams init(const RecognizerConfig& cfg, std::uint64_t seed);

  struct Entry {
    std::string name;
    Tensor* tensor;
  };
  // Canonical name order; the backward encoder is absent when unidirectional.
  std::vector<Entry> named(const RecognizerConfig& cfg);
  std::vector<std::pair<std::string, const Tensor*>> named(const RecognizerConfig& cfg) const;

  void zero_grad(const RecognizerConfig& cfg);
};

// Expected shape of every canonical parameter name.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const RecognizerConfig& cfg);

struct DecoderOutput {
  Tensor probs;                             // T x K, row t = p(y_t | x, y_<t)
  std::vector<std::size_t> pseudo_labels;   // per-row argmax
  std::vector<Tensor> attention;            // per step, 1 x (W/8)

  std::size_t length() const { return pseudo_labels.size(); }
};

// Anything that greedily decodes an image; evaluation only needs this.
class SequenceDecoder {
 public:
  virtual ~SequenceDecoder() = default;
  virtual DecoderOutput decode(const Image& img) const = 0;
  virtual const VocabSpec& vocab() const = 0;
  virtual std::size_t max_length() const = 0;
};

// Copies share parameter storage; use clone() for an independent snapshot.
class Recognizer : public SequenceDecoder {
 public:
  Recognizer(VocabSpec vocab, RecognizerConfig cfg, std::uint64_t seed);
  Recognizer(VocabSpec vocab, RecognizerConfig cfg, RecognizerParams params);

  Recognizer clone() const;

  const VocabSpec& vocab() const override { return vocab_; }
  std::size_t max_length() const override { return cfg_.l_max; }
  DecoderOutput decode(const Image& img) const override { return decode_greedy(encode(img)); }
  const RecognizerConfig& config() const { return cfg_; }
  RecognizerParams& params() { return params_; }
  const RecognizerParams& params() const { return params_; }

  // W/8 x d_feat context-mixed strip features.
  Tensor encode(const Image& img) const;

  // L+1 steps: GO then the ground-truth characters as inputs, the last target
  // being EOS.
  DecoderOutput decode_teacher_forced(const Tensor& features, std::span<const std::size_t> label) const;

  // Feeds back the argmax over characters and EOS; stops after EOS or after
  // l_max + 1 steps.
  DecoderOutput decode_greedy(const Tensor& features) const;

  // Greedy decoding mapped to text, at most l_max characters.
  std::string predict(const Image& img) const;
  Label predict_indices(const Image& img) const;

 private:
  Tensor decoder_step(const Tensor& features, const Tensor& projected, Tensor& state, std::size_t prev,
                      std::vector<Tensor>& attention) const;

  VocabSpec vocab_;
  RecognizerConfig cfg_;
  RecognizerParams params_;
};

// Character indices of a greedy output up to (excluding) the first EOS,
// capped at l_max.
Label strip_eos(const DecoderOutput& out, const VocabSpec& vocab, std::size_t l_max);

}  // namespace smile
