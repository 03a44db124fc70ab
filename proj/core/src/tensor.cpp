#include "smile/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "smile/error.hpp"

namespace smile {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

thread_local Tape* g_active_tape = nullptr;

void check_shape(const Shape& shape, std::size_t n) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimension must be positive, got " + shape_string(shape));
  }
  if (shape.empty() || numel(shape) != n) {
    throw DimensionError("shape " + shape_string(shape) + " does not match " + std::to_string(n) +
                         " values");
  }
}

}  // namespace

// Internal constructor access for the op implementations below.
struct TensorAccess {
  static const NodePtr& node(const Tensor& t) {
    if (!t.node_) throw ContractError("use of an undefined tensor");
    return t.node_;
  }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }

  // Creates an op result; records it when a tape is active and any parent
  // needs a gradient.
  static Tensor make(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                     std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->leaf = false;
    Tape* tape = g_active_tape;
    bool needs = false;
    if (tape) {
      for (const auto& p : parents) needs = needs || p->requires_grad;
    }
    if (needs) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->backward = std::move(backward);
      tape->record(n);
    }
    return Tensor(std::move(n));
  }
};

// ---------------------------------------------------------------- Tensor

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  check_shape(shape, data.size());
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t = constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

Tensor Tensor::zeros(Shape shape) {
  const auto n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

const Shape& Tensor::shape() const { return TensorAccess::node(*this)->shape; }
std::size_t Tensor::size() const { return TensorAccess::node(*this)->value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("rows() needs a rank-2 tensor, got " + shape_string(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("cols() needs a rank-2 tensor, got " + shape_string(s));
  return s[1];
}

std::span<const double> Tensor::data() const { return TensorAccess::node(*this)->value; }
std::span<double> Tensor::mutable_data() { return TensorAccess::node(*this)->value; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return TensorAccess::node(*this)->requires_grad; }
bool Tensor::is_leaf() const { return TensorAccess::node(*this)->leaf; }
bool Tensor::has_grad() const { return !TensorAccess::node(*this)->grad.empty(); }

std::vector<double> Tensor::grad() const {
  const auto& n = TensorAccess::node(*this);
  if (n->grad.empty()) return std::vector<double>(n->value.size(), 0.0);
  return n->grad;
}

std::span<double> Tensor::mutable_grad() { return TensorAccess::node(*this)->grad_buffer(); }

void Tensor::zero_grad() {
  auto& g = TensorAccess::node(*this)->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

// ---------------------------------------------------------------- Tape

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

void Tape::record(std::shared_ptr<detail::Node> node) { nodes_.push_back(std::move(node)); }

void Tape::backward(const Tensor& loss) {
  const auto& root = TensorAccess::node(loss);
  if (root->value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(root->shape));
  }
  if (!root->requires_grad) return;
  for (auto& n : nodes_) n->grad.clear();
  root->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n);
  }
}

// ---------------------------------------------------------------- ops

namespace {

const NodePtr& N(const Tensor& t) { return TensorAccess::node(t); }

std::size_t last_dim(const Shape& s) { return s.back(); }

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " needs a rank-2 tensor, got " + shape_string(t.shape()));
  }
}

enum class BinaryLayout { same, scalar_left, scalar_right };

BinaryLayout binary_layout(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return BinaryLayout::same;
  if (b.size() == 1) return BinaryLayout::scalar_right;
  if (a.size() == 1) return BinaryLayout::scalar_left;
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
}

// Applies f(x, y) elementwise and records g(x, y, dz) -> (dx, dy).
template <typename F, typename G>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F f, G g) {
  const auto layout = binary_layout(a, b, name);
  const auto& an = N(a);
  const auto& bn = N(b);
  const Shape out_shape = layout == BinaryLayout::scalar_left ? bn->shape : an->shape;
  const std::size_t n = numel(out_shape);
  std::vector<double> out(n);
  const auto& av = an->value;
  const auto& bv = bn->value;
  auto ai = [&](std::size_t i) { return layout == BinaryLayout::scalar_left ? 0 : i; };
  auto bi = [&](std::size_t i) { return layout == BinaryLayout::scalar_right ? 0 : i; };
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ai(i)], bv[bi(i)]);
  return TensorAccess::make(out_shape, std::move(out), {an, bn}, [layout, g](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.value.size();
    double* ga = pa.requires_grad ? pa.grad_buffer().data() : nullptr;
    double* gb = pb.requires_grad ? pb.grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ia = layout == BinaryLayout::scalar_left ? 0 : i;
      const std::size_t ib = layout == BinaryLayout::scalar_right ? 0 : i;
      auto [da, db] = g(pa.value[ia], pb.value[ib], self.grad[i]);
      if (ga) ga[ia] += da;
      if (gb) gb[ib] += db;
    }
  });
}

// y = f(x); backward uses dy/dx expressed through (x, y).
template <typename F, typename D>
Tensor unary_op(const Tensor& x, F f, D dfdx) {
  const auto& xn = N(x);
  std::vector<double> out(xn->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xn->value[i]);
  return TensorAccess::make(xn->shape, std::move(out), {xn}, [dfdx](Node& self) {
    Node& p = *self.parents[0];
    auto& gp = p.grad_buffer();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      gp[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
    }
  });
}

constexpr double kExpMax = 709.0;
constexpr double kExpMin = -745.0;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const auto& av = N(a)->value;
  const auto& bv = N(b)->value;
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return TensorAccess::make({m, n}, std::move(out), {N(a), N(b)}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* dc = self.grad.data();
    if (pa.requires_grad) {
      // dA = dC * B^T
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = pb.value.data() + p * n;
          const double* dcrow = dc + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      // dB = A^T * dC
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        const double* dcrow = dc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.value[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * dcrow[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double dz) { return std::pair{dz, dz}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double dz) { return std::pair{dz, -dz}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double dz) { return std::pair{dz * y, dz * x}; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(std::clamp(v, kExpMin, kExpMax)); },
      [](double v, double y) { return (v > kExpMin && v < kExpMax) ? y : 0.0; });
}

Tensor log(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::log(std::max(v, kLogFloor)); },
      [](double v, double) { return v > kLogFloor ? 1.0 / v : 0.0; });
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case ElementwiseKind::add: return add(a, b);
    case ElementwiseKind::sub: return sub(a, b);
    case ElementwiseKind::mul: return mul(a, b);
    case ElementwiseKind::tanh: return tanh(a);
    case ElementwiseKind::sigmoid: return sigmoid(a);
    case ElementwiseKind::relu: return relu(a);
    case ElementwiseKind::exp: return exp(a);
    case ElementwiseKind::log: return log(a);
  }
  throw ContractError("elementwise: unknown kind");
}

Tensor softmax(const Tensor& logits) {
  const auto& xn = N(logits);
  const std::size_t k = last_dim(xn->shape);
  if (k < 2) throw DimensionError("softmax needs last dimension >= 2, got " + shape_string(xn->shape));
  const std::size_t rows = xn->value.size() / k;
  std::vector<double> out(xn->value.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = xn->value.data() + r * k;
    double* y = out.data() + r * k;
    const double mx = *std::max_element(x, x + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    for (std::size_t c = 0; c < k; ++c) y[c] /= z;
  }
  return TensorAccess::make(xn->shape, std::move(out), {xn}, [k, rows](Node& self) {
    Node& p = *self.parents[0];
    auto& gp = p.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * k;
      const double* dy = self.grad.data() + r * k;
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += dy[c] * y[c];
      for (std::size_t c = 0; c < k; ++c) gp[r * k + c] += y[c] * (dy[c] - dot);
    }
  });
}

Tensor reduce(ReduceKind kind, const Tensor& t, int axis) {
  const auto& xn = N(t);
  const Shape& s = xn->shape;
  if (axis < 0) {
    const double n = static_cast<double>(xn->value.size());
    double total = 0.0;
    for (double v : xn->value) total += v;
    const double factor = kind == ReduceKind::mean ? 1.0 / n : 1.0;
    return TensorAccess::make({1}, {total * factor}, {xn}, [factor](Node& self) {
      Node& p = *self.parents[0];
      auto& gp = p.grad_buffer();
      const double g = self.grad[0] * factor;
      for (double& v : gp) v += g;
    });
  }
  if (static_cast<std::size_t>(axis) >= s.size()) {
    throw DimensionError("reduce: axis " + std::to_string(axis) + " invalid for shape " + shape_string(s));
  }
  const auto ax = static_cast<std::size_t>(axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[ax];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != ax) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape = {1};
  const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(len) : 1.0;
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += xn->value[(o * len + l) * inner + i];
    }
  }
  for (double& v : out) v *= factor;
  return TensorAccess::make(std::move(out_shape), std::move(out), {xn},
                            [outer, inner, len, factor](Node& self) {
                              Node& p = *self.parents[0];
                              auto& gp = p.grad_buffer();
                              for (std::size_t o = 0; o < outer; ++o) {
                                for (std::size_t l = 0; l < len; ++l) {
                                  for (std::size_t i = 0; i < inner; ++i) {
                                    gp[(o * len + l) * inner + i] += self.grad[o * inner + i] * factor;
                                  }
                                }
                              }
                            });
}

Tensor sum(const Tensor& t, int axis) { return reduce(ReduceKind::sum, t, axis); }
Tensor mean(const Tensor& t, int axis) { return reduce(ReduceKind::mean, t, axis); }

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) throw ContractError("add_n of zero terms");
  const Shape& s = terms.front().shape();
  std::vector<NodePtr> parents;
  parents.reserve(terms.size());
  std::vector<double> out(numel(s), 0.0);
  for (const auto& t : terms) {
    if (t.shape() != s) {
      throw DimensionError("add_n: shape mismatch " + shape_string(s) + " vs " + shape_string(t.shape()));
    }
    const auto& v = N(t)->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    parents.push_back(N(t));
  }
  return TensorAccess::make(s, std::move(out), std::move(parents), [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& gp = p->grad_buffer();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank2(table, "gather_rows");
  const std::size_t v = table.rows(), d = table.cols();
  if (indices.empty()) throw ContractError("gather_rows: empty index list");
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * d);
  const auto& tv = N(table)->value;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= v) {
      throw IndexError("gather_rows: index " + std::to_string(idx[r]) + " out of range [0, " +
                       std::to_string(v) + ")");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d, out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const std::size_t n = idx.size();
  return TensorAccess::make({n, d}, std::move(out), {N(table)}, [idx = std::move(idx), d](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < d; ++c) gp[idx[r] * d + c] += self.grad[r * d + c];
    }
  });
}

Tensor pick(const Tensor& matrix, std::span<const std::size_t> columns) {
  require_rank2(matrix, "pick");
  const std::size_t n = matrix.rows(), k = matrix.cols();
  if (columns.size() != n) {
    throw DimensionError("pick: " + std::to_string(columns.size()) + " indices for " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  std::vector<double> out(n);
  const auto& mv = N(matrix)->value;
  for (std::size_t r = 0; r < n; ++r) {
    if (cols[r] >= k) {
      throw IndexError("pick: column " + std::to_string(cols[r]) + " out of range [0, " + std::to_string(k) + ")");
    }
    out[r] = mv[r * k + cols[r]];
  }
  return TensorAccess::make({n}, std::move(out), {N(matrix)}, [cols = std::move(cols), k](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < cols.size(); ++r) gp[r * k + cols[r]] += self.grad[r];
  });
}

Tensor reshape(const Tensor& t, Shape shape) {
  const auto& xn = N(t);
  check_shape(shape, xn->value.size());
  return TensorAccess::make(std::move(shape), xn->value, {xn}, [](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
  });
}

Tensor row(const Tensor& matrix, std::size_t i) {
  require_rank2(matrix, "row");
  const std::size_t n = matrix.rows(), k = matrix.cols();
  if (i >= n) throw IndexError("row: index " + std::to_string(i) + " out of range [0, " + std::to_string(n) + ")");
  const auto& mv = N(matrix)->value;
  std::vector<double> out(mv.begin() + static_cast<std::ptrdiff_t>(i * k),
                          mv.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
  return TensorAccess::make({1, k}, std::move(out), {N(matrix)}, [i, k](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t c = 0; c < k; ++c) gp[i * k + c] += self.grad[c];
  });
}

Tensor element(const Tensor& t, std::size_t i) {
  const auto& xn = N(t);
  if (i >= xn->value.size()) {
    throw IndexError("element: index " + std::to_string(i) + " out of range [0, " +
                     std::to_string(xn->value.size()) + ")");
  }
  return TensorAccess::make({1}, {xn->value[i]}, {xn}, [i](Node& self) {
    self.parents[0]->grad_buffer()[i] += self.grad[0];
  });
}

Tensor slice_cols(const Tensor& matrix, std::size_t begin, std::size_t count) {
  require_rank2(matrix, "slice_cols");
  const std::size_t n = matrix.rows(), k = matrix.cols();
  if (count == 0 || begin + count > k) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_string(matrix.shape()));
  }
  const auto& mv = N(matrix)->value;
  std::vector<double> out(n * count);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(mv.begin() + static_cast<std::ptrdiff_t>(r * k + begin), count,
                out.begin() + static_cast<std::ptrdiff_t>(r * count));
  }
  return TensorAccess::make({n, count}, std::move(out), {N(matrix)}, [n, k, begin, count](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < count; ++c) gp[r * k + begin + c] += self.grad[r * count + c];
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::size_t n = a.rows(), ka = a.cols(), kb = b.cols();
  const auto& av = N(a)->value;
  const auto& bv = N(b)->value;
  std::vector<double> out(n * (ka + kb));
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(r * ka), ka,
                out.begin() + static_cast<std::ptrdiff_t>(r * (ka + kb)));
    std::copy_n(bv.begin() + static_cast<std::ptrdiff_t>(r * kb), kb,
                out.begin() + static_cast<std::ptrdiff_t>(r * (ka + kb) + ka));
  }
  return TensorAccess::make({n, ka + kb}, std::move(out), {N(a), N(b)}, [n, ka, kb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t k = ka + kb;
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < ka; ++c) g[r * ka + c] += self.grad[r * k + c];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < kb; ++c) g[r * kb + c] += self.grad[r * k + ka + c];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ContractError("concat_rows of zero tensors");
  require_rank2(rows.front(), "concat_rows");
  const std::size_t k = rows.front().cols();
  std::size_t total = 0;
  std::vector<NodePtr> parents;
  std::vector<std::size_t> offsets;
  for (const auto& r : rows) {
    require_rank2(r, "concat_rows");
    if (r.cols() != k) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(rows.front().shape()) + " vs " +
                           shape_string(r.shape()));
    }
    offsets.push_back(total * k);
    total += r.rows();
    parents.push_back(N(r));
  }
  std::vector<double> out;
  out.reserve(total * k);
  for (const auto& p : parents) out.insert(out.end(), p->value.begin(), p->value.end());
  return TensorAccess::make({total, k}, std::move(out), std::move(parents),
                            [offsets = std::move(offsets)](Node& self) {
                              for (std::size_t i = 0; i < self.parents.size(); ++i) {
                                Node& p = *self.parents[i];
                                if (!p.requires_grad) continue;
                                auto& g = p.grad_buffer();
                                for (std::size_t j = 0; j < g.size(); ++j) g[j] += self.grad[offsets[i] + j];
                              }
                            });
}

Tensor repeat_rows(const Tensor& row_vector, std::size_t n) {
  require_rank2(row_vector, "repeat_rows");
  if (row_vector.rows() != 1) {
    throw DimensionError("repeat_rows needs a 1 x d row, got " + shape_string(row_vector.shape()));
  }
  if (n == 0) throw DimensionError("repeat_rows: zero copies");
  const std::size_t d = row_vector.cols();
  const auto& v = N(row_vector)->value;
  std::vector<double> out;
  out.reserve(n * d);
  for (std::size_t r = 0; r < n; ++r) out.insert(out.end(), v.begin(), v.end());
  return TensorAccess::make({n, d}, std::move(out), {N(row_vector)}, [n, d](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[r * d + c];
  });
}

}  // namespace smile
