#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "smile/recognizer.hpp"
#include "smile/tensor.hpp"

namespace smile {

// Serializable named value array (parameter or optimizer state).
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const NamedArray&) const = default;
};

enum class OptimizerKind { adam, adadelta };

const char* to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.95;
  double eps = 1e-8;
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const std::vector<RecognizerParams::Entry>& params);

  const OptimizerConfig& config() const { return cfg_; }

  // One update from the current gradients; `t` is the 1-based step used for
  // Adam's bias correction.
  void step(std::vector<RecognizerParams::Entry>& params, std::size_t t);

  // State tensors named "opt/<kind>/<slot>/<param>".
  std::vector<NamedArray> export_state() const;
  void import_state(const std::vector<NamedArray>& state);

 private:
  OptimizerConfig cfg_;
  std::vector<std::string> names_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> slot_a_;  // adam m / adadelta E[g^2]
  std::vector<std::vector<double>> slot_b_;  // adam v / adadelta E[dx^2]
};

// Scales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(std::vector<RecognizerParams::Entry>& params, double max_norm);

}  // namespace smile
