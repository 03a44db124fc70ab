#include "smile/optimizer.hpp"

#include <cmath>
#include <map>

#include "smile/error.hpp"

namespace smile {

const char* to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "adadelta"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adadelta") return OptimizerKind::adadelta;
  throw ContractError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerConfig cfg, const std::vector<RecognizerParams::Entry>& params) : cfg_(cfg) {
  for (const auto& p : params) {
    names_.push_back(p.name);
    shapes_.push_back(p.tensor->shape());
    slot_a_.emplace_back(p.tensor->size(), 0.0);
    slot_b_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Optimizer::step(std::vector<RecognizerParams::Entry>& params, std::size_t t) {
  if (params.size() != names_.size()) throw ContractError("optimizer: parameter list changed");
  if (t == 0) throw ContractError("optimizer: step index is 1-based");
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    auto w = p.mutable_data();
    const auto g = p.grad();
    auto& a = slot_a_[i];
    auto& b = slot_b_[i];
    if (cfg_.kind == OptimizerKind::adam) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        a[j] = cfg_.beta1 * a[j] + (1.0 - cfg_.beta1) * g[j];
        b[j] = cfg_.beta2 * b[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mhat = a[j] / bc1;
        const double vhat = b[j] / bc2;
        w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    } else {
      for (std::size_t j = 0; j < w.size(); ++j) {
        a[j] = cfg_.rho * a[j] + (1.0 - cfg_.rho) * g[j] * g[j];
        const double dx = -std::sqrt(b[j] + cfg_.eps) / std::sqrt(a[j] + cfg_.eps) * g[j];
        b[j] = cfg_.rho * b[j] + (1.0 - cfg_.rho) * dx * dx;
        w[j] += cfg_.lr * dx;
      }
    }
  }
}

std::vector<NamedArray> Optimizer::export_state() const {
  const std::string kind = to_string(cfg_.kind);
  const char* slot_a = cfg_.kind == OptimizerKind::adam ? "m" : "eg2";
  const char* slot_b = cfg_.kind == OptimizerKind::adam ? "v" : "edx2";
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out.push_back({"opt/" + kind + "/" + slot_a + "/" + names_[i], shapes_[i], slot_a_[i]});
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out.push_back({"opt/" + kind + "/" + slot_b + "/" + names_[i], shapes_[i], slot_b_[i]});
  }
  return out;
}

void Optimizer::import_state(const std::vector<NamedArray>& state) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& s : state) by_name[s.name] = &s;
  const auto expected = export_state();
  for (std::size_t i = 0; i < expected.size(); ++i) {
    auto it = by_name.find(expected[i].name);
    if (it == by_name.end()) throw FormatError("optimizer state is missing tensor '" + expected[i].name + "'");
    if (it->second->shape != expected[i].shape) {
      throw FormatError("optimizer state tensor '" + expected[i].name + "' has shape " +
                        shape_string(it->second->shape) + ", expected " + shape_string(expected[i].shape));
    }
    const std::size_t n = names_.size();
    (i < n ? slot_a_[i] : slot_b_[i - n]) = it->second->values;
  }
}

double clip_grad_norm(std::vector<RecognizerParams::Entry>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    for (double g : p.tensor->mutable_grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& p : params) {
      for (double& g : p.tensor->mutable_grad()) g *= f;
    }
  }
  return norm;
}

}  // namespace smile
