#include "gecor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gecor {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : data_(std::make_shared<TensorData>()) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("zero-sized dimension in shape " + shape_str(shape));
  if (shape_size(shape) != values.size())
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  data_->shape = std::move(shape);
  data_->values = std::move(values);
  data_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, {v}, requires_grad); }

Tensor Tensor::vector(std::vector<double> v, bool requires_grad) {
  auto n = v.size();
  return Tensor({n}, std::move(v), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(v), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return data_->values[0];
}

std::span<double> Tensor::grad() {
  data_->ensure_grad();
  return data_->grad;
}

std::span<const double> Tensor::grad() const {
  data_->ensure_grad();
  return data_->grad;
}

void Tensor::zero_grad() {
  if (!data_->grad.empty()) std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(data_->shape, data_->values, data_->requires_grad);
  return t;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) return;
  for (auto& out : outputs_) out->grad.clear();
  loss.raw()->ensure_grad();
  loss.raw()->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

namespace {

using Ptr = std::shared_ptr<TensorData>;

bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (auto* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

Tensor make_output(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

// Grad buffer of an output, or nullptr if backward never reached it.
const double* out_grad(const Ptr& out) {
  return out->grad.size() == out->values.size() ? out->grad.data() : nullptr;
}

double* in_grad(const Ptr& in) {
  if (!in->requires_grad) return nullptr;
  in->ensure_grad();
  return in->grad.data();
}

bool is_vector(const Tensor& t) { return t.rank() == 1; }
bool is_matrix(const Tensor& t) { return t.rank() == 2; }

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.size() != b.size() || (a.rank() > 1 && b.rank() > 1 && a.shape() != b.shape()))
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (!is_matrix(a) || !is_matrix(b) || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  bool rg = any_grad({&a, &b});
  Tensor result = make_output({m, n}, std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [ap = a.ptr(), bp = b.ptr(), op = result.ptr(), m, k, n] {
      const double* g = out_grad(op);
      if (!g) return;
      if (double* ga = in_grad(ap)) {
        const double* bv = bp->values.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
            ga[i * k + p] += s;
          }
      }
      if (double* gb = in_grad(bp)) {
        const double* av = ap->values.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    });
  }
  return result;
}

Tensor matvec(Tape& tape, const Tensor& m, const Tensor& x) {
  if (!is_matrix(m) || !is_vector(x) || m.dim(1) != x.size())
    throw DimensionError("matvec: cannot multiply " + shape_str(m.shape()) + " by " +
                         shape_str(x.shape()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(rows);
  const double* mv = m.values().data();
  const double* xv = x.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* r = mv + i * cols;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += r[j] * xv[j];
    out[i] = s;
  }
  bool rg = any_grad({&m, &x});
  Tensor result = make_output({rows}, std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [mp = m.ptr(), xp = x.ptr(), op = result.ptr(), rows, cols] {
      const double* g = out_grad(op);
      if (!g) return;
      if (double* gm = in_grad(mp)) {
        const double* xv = xp->values.data();
        for (std::size_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* r = gm + i * cols;
          for (std::size_t j = 0; j < cols; ++j) r[j] += gi * xv[j];
        }
      }
      if (double* gx = in_grad(xp)) {
        const double* mv = mp->values.data();
        for (std::size_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* r = mv + i * cols;
          for (std::size_t j = 0; j < cols; ++j) gx[j] += gi * r[j];
        }
      }
    });
  }
  return result;
}

Tensor vecmat(Tape& tape, const Tensor& x, const Tensor& m) {
  if (!is_matrix(m) || !is_vector(x) || m.dim(0) != x.size())
    throw DimensionError("vecmat: cannot multiply " + shape_str(x.shape()) + " by " +
                         shape_str(m.shape()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(cols, 0.0);
  const double* mv = m.values().data();
  const double* xv = x.values().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = xv[i];
    const double* r = mv + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += xi * r[j];
  }
  bool rg = any_grad({&m, &x});
  Tensor result = make_output({cols}, std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [mp = m.ptr(), xp = x.ptr(), op = result.ptr(), rows, cols] {
      const double* g = out_grad(op);
      if (!g) return;
      if (double* gm = in_grad(mp)) {
        const double* xv = xp->values.data();
        for (std::size_t i = 0; i < rows; ++i) {
          double* r = gm + i * cols;
          for (std::size_t j = 0; j < cols; ++j) r[j] += xv[i] * g[j];
        }
      }
      if (double* gx = in_grad(xp)) {
        const double* mv = mp->values.data();
        for (std::size_t i = 0; i < rows; ++i) {
          const double* r = mv + i * cols;
          double s = 0.0;
          for (std::size_t j = 0; j < cols; ++j) s += r[j] * g[j];
          gx[i] += s;
        }
      }
    });
  }
  return result;
}

namespace {

template <class Fwd, class Bwd>
Tensor binary_elementwise(Tape& tape, const Tensor& a, const Tensor& b, const char* name,
                          Fwd fwd, Bwd bwd) {
  require_same(a, b, name);
  const std::size_t n = a.size();
  std::vector<double> out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
  bool rg = any_grad({&a, &b});
  Tensor result = make_output(a.shape(), std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [ap = a.ptr(), bp = b.ptr(), op = result.ptr(), n, bwd] {
      const double* g = out_grad(op);
      if (!g) return;
      double* ga = in_grad(ap);
      double* gb = in_grad(bp);
      for (std::size_t i = 0; i < n; ++i) {
        auto [da, db] = bwd(ap->values[i], bp->values[i], g[i]);
        if (ga) ga[i] += da;
        if (gb) gb[i] += db;
      }
    });
  }
  return result;
}

template <class Fwd, class Bwd>
Tensor unary_elementwise(Tape& tape, const Tensor& a, Fwd fwd, Bwd bwd) {
  const std::size_t n = a.size();
  std::vector<double> out(n);
  auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
  bool rg = a.requires_grad();
  Tensor result = make_output(a.shape(), std::move(out), rg);
  if (rg && tape.recording()) {
    // bwd receives (input, output, upstream grad)
    tape.record(result, [ap = a.ptr(), op = result.ptr(), n, bwd] {
      const double* g = out_grad(op);
      if (!g) return;
      double* ga = in_grad(ap);
      for (std::size_t i = 0; i < n; ++i) ga[i] += bwd(ap->values[i], op->values[i], g[i]);
    });
  }
  return result;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g) { return std::pair{g, g}; });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g) { return std::pair{g, -g}; });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g) { return std::pair{g * y, g * x}; });
}

Tensor scale(Tape& tape, const Tensor& a, double k) {
  return unary_elementwise(
      tape, a, [k](double x) { return k * x; }, [k](double, double, double g) { return k * g; });
}

Tensor one_minus(Tape& tape, const Tensor& a) {
  return unary_elementwise(
      tape, a, [](double x) { return 1.0 - x; }, [](double, double, double g) { return -g; });
}

Tensor tanh(Tape& tape, const Tensor& a) {
  return unary_elementwise(
      tape, a, [](double x) { return std::tanh(x); },
      [](double, double y, double g) { return g * (1.0 - y * y); });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary_elementwise(
      tape, a, [](double x) { return stable_sigmoid(x); },
      [](double, double y, double g) { return g * y * (1.0 - y); });
}

Tensor log(Tape& tape, const Tensor& a) {
  for (double v : a.values())
    if (!(v > 0.0)) throw DimensionError("log: non-positive argument " + std::to_string(v));
  return unary_elementwise(
      tape, a, [](double x) { return std::log(x); },
      [](double x, double, double g) { return g / x; });
}

Tensor scalar_mul(Tape& tape, const Tensor& s, const Tensor& a) {
  if (s.size() != 1)
    throw DimensionError("scalar_mul: scalar operand has shape " + shape_str(s.shape()));
  const std::size_t n = a.size();
  const double k = s[0];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = k * a[i];
  bool rg = any_grad({&s, &a});
  Tensor result = make_output(a.shape(), std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [sp = s.ptr(), ap = a.ptr(), op = result.ptr(), n] {
      const double* g = out_grad(op);
      if (!g) return;
      if (double* gs = in_grad(sp)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += g[i] * ap->values[i];
        gs[0] += acc;
      }
      if (double* ga = in_grad(ap)) {
        const double k = sp->values[0];
        for (std::size_t i = 0; i < n; ++i) ga[i] += k * g[i];
      }
    });
  }
  return result;
}

Tensor add_rowwise(Tape& tape, const Tensor& m, const Tensor& r) {
  if (!is_matrix(m) || r.size() != m.dim(1))
    throw DimensionError("add_rowwise: cannot add " + shape_str(r.shape()) + " to rows of " +
                         shape_str(m.shape()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  std::vector<double> out(m.values().begin(), m.values().end());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += r[j];
  bool rg = any_grad({&m, &r});
  Tensor result = make_output(m.shape(), std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [mp = m.ptr(), rp = r.ptr(), op = result.ptr(), rows, cols] {
      const double* g = out_grad(op);
      if (!g) return;
      if (double* gm = in_grad(mp))
        for (std::size_t i = 0; i < rows * cols; ++i) gm[i] += g[i];
      if (double* gr = in_grad(rp))
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) gr[j] += g[i * cols + j];
    });
  }
  return result;
}

Tensor sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  bool rg = a.requires_grad();
  Tensor result = make_output({1}, {s}, rg);
  if (rg && tape.recording()) {
    tape.record(result, [ap = a.ptr(), op = result.ptr()] {
      const double* g = out_grad(op);
      if (!g) return;
      double* ga = in_grad(ap);
      for (std::size_t i = 0; i < ap->values.size(); ++i) ga[i] += g[0];
    });
  }
  return result;
}

Tensor dot(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  bool rg = any_grad({&a, &b});
  Tensor result = make_output({1}, {s}, rg);
  if (rg && tape.recording()) {
    tape.record(result, [ap = a.ptr(), bp = b.ptr(), op = result.ptr()] {
      const double* g = out_grad(op);
      if (!g) return;
      const std::size_t n = ap->values.size();
      if (double* ga = in_grad(ap))
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[0] * bp->values[i];
      if (double* gb = in_grad(bp))
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[0] * ap->values[i];
    });
  }
  return result;
}

Tensor concat(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<double> out;
  bool rg = false;
  for (const auto& p : parts) {
    if (!is_vector(p))
      throw DimensionError("concat: expected vectors, got " + shape_str(p.shape()));
    out.insert(out.end(), p.values().begin(), p.values().end());
    rg = rg || p.requires_grad();
  }
  const std::size_t n = out.size();
  Tensor result = make_output({n}, std::move(out), rg);
  if (rg && tape.recording()) {
    std::vector<Ptr> ins;
    for (const auto& p : parts) ins.push_back(p.ptr());
    tape.record(result, [ins = std::move(ins), op = result.ptr()] {
      const double* g = out_grad(op);
      if (!g) return;
      std::size_t off = 0;
      for (const auto& in : ins) {
        const std::size_t len = in->values.size();
        if (double* gi = in_grad(in))
          for (std::size_t i = 0; i < len; ++i) gi[i] += g[off + i];
        off += len;
      }
    });
  }
  return result;
}

Tensor stack_rows(Tape& tape, std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const std::size_t d = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  bool rg = false;
  for (const auto& r : rows) {
    if (r.size() != d)
      throw DimensionError("stack_rows: row widths " + std::to_string(d) + " and " +
                           std::to_string(r.size()) + " differ");
    out.insert(out.end(), r.values().begin(), r.values().end());
    rg = rg || r.requires_grad();
  }
  Tensor result = make_output({rows.size(), d}, std::move(out), rg);
  if (rg && tape.recording()) {
    std::vector<Ptr> ins;
    for (const auto& r : rows) ins.push_back(r.ptr());
    tape.record(result, [ins = std::move(ins), op = result.ptr(), d] {
      const double* g = out_grad(op);
      if (!g) return;
      for (std::size_t k = 0; k < ins.size(); ++k)
        if (double* gi = in_grad(ins[k]))
          for (std::size_t j = 0; j < d; ++j) gi[j] += g[k * d + j];
    });
  }
  return result;
}

Tensor row(Tape& tape, const Tensor& m, std::size_t i) {
  if (!is_matrix(m) || i >= m.dim(0))
    throw DimensionError("row: index " + std::to_string(i) + " out of range for " +
                         shape_str(m.shape()));
  const std::size_t cols = m.dim(1);
  auto mv = m.values();
  std::vector<double> out(mv.begin() + i * cols, mv.begin() + (i + 1) * cols);
  bool rg = m.requires_grad();
  Tensor result = make_output({cols}, std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [mp = m.ptr(), op = result.ptr(), i, cols] {
      const double* g = out_grad(op);
      if (!g) return;
      double* gm = in_grad(mp);
      for (std::size_t j = 0; j < cols; ++j) gm[i * cols + j] += g[j];
    });
  }
  return result;
}

Tensor lookup(Tape& tape, const Tensor& table, std::size_t index) {
  return row(tape, table, index);
}

Tensor softmax(Tape& tape, const Tensor& x, const std::vector<bool>* mask) {
  const std::size_t n = x.size();
  if (mask && mask->size() != n)
    throw DimensionError("softmax: mask length " + std::to_string(mask->size()) +
                         " vs input " + std::to_string(n));
  auto active = [&](std::size_t i) { return !mask || (*mask)[i]; };
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (active(i)) mx = std::max(mx, x[i]);
  if (mx == -std::numeric_limits<double>::infinity())
    throw ContractError("softmax: every position is masked (degenerate distribution)");
  std::vector<double> out(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (active(i)) z += (out[i] = std::exp(x[i] - mx));
  for (double& v : out) v /= z;
  bool rg = x.requires_grad();
  Tensor result = make_output(x.shape(), std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [xp = x.ptr(), op = result.ptr(), n] {
      const double* g = out_grad(op);
      if (!g) return;
      double* gx = in_grad(xp);
      const double* y = op->values.data();
      double dotp = 0.0;
      for (std::size_t i = 0; i < n; ++i) dotp += g[i] * y[i];
      for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (g[i] - dotp);
    });
  }
  return result;
}

Tensor select_sum(Tape& tape, const Tensor& x, std::span<const std::size_t> idx) {
  double s = 0.0;
  for (auto i : idx) {
    if (i >= x.size())
      throw DimensionError("select_sum: index " + std::to_string(i) + " out of range for " +
                           shape_str(x.shape()));
    s += x[i];
  }
  bool rg = x.requires_grad();
  Tensor result = make_output({1}, {s}, rg);
  if (rg && tape.recording()) {
    tape.record(result, [xp = x.ptr(), op = result.ptr(),
                 idx = std::vector<std::size_t>(idx.begin(), idx.end())] {
      const double* g = out_grad(op);
      if (!g) return;
      double* gx = in_grad(xp);
      for (auto i : idx) gx[i] += g[0];
    });
  }
  return result;
}

Tensor log_softmax_select(Tape& tape, const Tensor& x, std::span<const std::size_t> idx) {
  if (idx.empty()) throw ContractError("log_softmax_select: empty selection");
  const std::size_t n = x.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  std::vector<double> p(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += (p[i] = std::exp(x[i] - mx));
  for (double& v : p) v /= z;
  // Selection may repeat indices; each occurrence counts once.
  std::vector<std::size_t> sel(idx.begin(), idx.end());
  std::sort(sel.begin(), sel.end());
  sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
  double smx = -std::numeric_limits<double>::infinity();
  for (auto i : sel) {
    if (i >= n)
      throw DimensionError("log_softmax_select: index " + std::to_string(i) +
                           " out of range for " + shape_str(x.shape()));
    smx = std::max(smx, x[i]);
  }
  double zs = 0.0;
  for (auto i : sel) zs += std::exp(x[i] - smx);
  const double value = (smx + std::log(zs)) - (mx + std::log(z));
  bool rg = x.requires_grad();
  Tensor result = make_output({1}, {value}, rg);
  if (rg && tape.recording()) {
    // d/dx_i = [i∈sel]·q_i − p_i, q = softmax restricted to the selection
    tape.record(result, [xp = x.ptr(), op = result.ptr(), p = std::move(p), sel, smx, zs] {
      const double* g = out_grad(op);
      if (!g) return;
      double* gx = in_grad(xp);
      for (std::size_t i = 0; i < p.size(); ++i) gx[i] -= g[0] * p[i];
      for (auto i : sel) gx[i] += g[0] * std::exp(xp->values[i] - smx) / zs;
    });
  }
  return result;
}

Tensor nll(Tape& tape, const Tensor& probs, std::size_t index) {
  if (index >= probs.size())
    throw DimensionError("nll: index " + std::to_string(index) + " out of range for " +
                         shape_str(probs.shape()));
  std::size_t one[] = {index};
  return scale(tape, log(tape, select_sum(tape, probs, one)), -1.0);
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractError("dropout rate must be < 1");
  const std::size_t n = x.size();
  std::vector<double> mask(n);
  const double keep = 1.0 - rate;
  for (auto& m : mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u < keep ? 1.0 / keep : 0.0;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * mask[i];
  bool rg = x.requires_grad();
  Tensor result = make_output(x.shape(), std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [xp = x.ptr(), op = result.ptr(), mask = std::move(mask)] {
      const double* g = out_grad(op);
      if (!g) return;
      double* gx = in_grad(xp);
      for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return result;
}

Tensor gru_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const GruParams& p) {
  const std::size_t h = p.hidden();
  const std::size_t din = p.w_input.rank() == 2 ? p.w_input.dim(1) : 0;
  if (p.w_input.rank() != 2 || p.w_input.dim(0) != 3 * h || p.w_hidden.rank() != 2 ||
      p.w_hidden.dim(0) != 3 * h || p.w_hidden.dim(1) != h)
    throw DimensionError("gru_cell: inconsistent parameters " + shape_str(p.w_input.shape()) +
                         ", " + shape_str(p.w_hidden.shape()) + ", " +
                         shape_str(p.bias.shape()));
  if (x.size() != din || h_prev.size() != h)
    throw DimensionError("gru_cell: input " + shape_str(x.shape()) + " / state " +
                         shape_str(h_prev.shape()) + " do not fit parameters " +
                         shape_str(p.w_input.shape()) + ", " + shape_str(p.w_hidden.shape()));

  const double* wi = p.w_input.values().data();
  const double* wh = p.w_hidden.values().data();
  const double* b = p.bias.values().data();
  const double* xv = x.values().data();
  const double* hv = h_prev.values().data();

  // cache: z, r, n, r⊙h
  std::vector<double> cache(4 * h);
  double* z = cache.data();
  double* r = z + h;
  double* n = r + h;
  double* rh = n + h;
  auto affine_x = [&](std::size_t rowi) {
    const double* w = wi + rowi * din;
    double s = b[rowi];
    for (std::size_t j = 0; j < din; ++j) s += w[j] * xv[j];
    return s;
  };
  auto affine_h = [&](std::size_t rowi, const double* v) {
    const double* w = wh + rowi * h;
    double s = 0.0;
    for (std::size_t j = 0; j < h; ++j) s += w[j] * v[j];
    return s;
  };
  for (std::size_t i = 0; i < h; ++i) {
    z[i] = stable_sigmoid(affine_x(i) + affine_h(i, hv));
    r[i] = stable_sigmoid(affine_x(h + i) + affine_h(h + i, hv));
  }
  for (std::size_t i = 0; i < h; ++i) rh[i] = r[i] * hv[i];
  std::vector<double> out(h);
  for (std::size_t i = 0; i < h; ++i) {
    n[i] = std::tanh(affine_x(2 * h + i) + affine_h(2 * h + i, rh));
    out[i] = (1.0 - z[i]) * n[i] + z[i] * hv[i];
  }

  bool rg = x.requires_grad() || h_prev.requires_grad() || p.w_input.requires_grad() ||
            p.w_hidden.requires_grad() || p.bias.requires_grad();
  Tensor result = make_output({h}, std::move(out), rg);
  if (rg && tape.recording()) {
    tape.record(result, [xp = x.ptr(), hp = h_prev.ptr(), wip = p.w_input.ptr(),
                 whp = p.w_hidden.ptr(), bp = p.bias.ptr(), op = result.ptr(),
                 cache = std::move(cache), h, din] {
      const double* g = out_grad(op);
      if (!g) return;
      const double* z = cache.data();
      const double* r = z + h;
      const double* n = r + h;
      const double* rh = n + h;
      const double* xv = xp->values.data();
      const double* hv = hp->values.data();
      const double* wi = wip->values.data();
      const double* wh = whp->values.data();
      double* gx = in_grad(xp);
      double* gh = in_grad(hp);
      double* gwi = in_grad(wip);
      double* gwh = in_grad(whp);
      double* gb = in_grad(bp);

      // pre-activation grads, ordered z, r, n
      std::vector<double> da(3 * h);
      std::vector<double> drh(h, 0.0);
      for (std::size_t i = 0; i < h; ++i) {
        const double dn = g[i] * (1.0 - z[i]);
        da[i] = g[i] * (hv[i] - n[i]) * z[i] * (1.0 - z[i]);
        da[2 * h + i] = dn * (1.0 - n[i] * n[i]);
      }
      for (std::size_t i = 0; i < h; ++i) {
        const double d = da[2 * h + i];
        const double* w = wh + (2 * h + i) * h;
        for (std::size_t j = 0; j < h; ++j) drh[j] += w[j] * d;
      }
      for (std::size_t i = 0; i < h; ++i) da[h + i] = drh[i] * hv[i] * r[i] * (1.0 - r[i]);

      for (std::size_t k = 0; k < 3 * h; ++k) {
        const double d = da[k];
        if (gb) gb[k] += d;
        if (d == 0.0) continue;
        if (gwi) {
          double* w = gwi + k * din;
          for (std::size_t j = 0; j < din; ++j) w[j] += d * xv[j];
        }
        if (gx) {
          const double* w = wi + k * din;
          for (std::size_t j = 0; j < din; ++j) gx[j] += d * w[j];
        }
        const double* src = k < 2 * h ? hv : rh;
        if (gwh) {
          double* w = gwh + k * h;
          for (std::size_t j = 0; j < h; ++j) w[j] += d * src[j];
        }
        if (gh && k < 2 * h) {
          const double* w = wh + k * h;
          for (std::size_t j = 0; j < h; ++j) gh[j] += d * w[j];
        }
      }
      if (gh)
        for (std::size_t i = 0; i < h; ++i) gh[i] += g[i] * z[i] + drh[i] * r[i];
    });
  }
  return result;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

bool GradCheckReport::passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.flagged; });
}

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& loss_fn,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps, double tol) {
  auto evaluate = [&] {
    Tape t(false);
    double v = loss_fn(t).item();
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: loss is not finite");
    return v;
  };
  for (auto& [name, p] : params) const_cast<Tensor&>(p).zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: loss is not finite");
    tape.backward(loss);
  }
  GradCheckReport report;
  for (auto& [name, param] : params) {
    Tensor p = param;
    GradCheckEntry entry{name};
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + eps;
      const double up = evaluate();
      p[i] = orig - eps;
      const double down = evaluate();
      p[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[i], numeric);
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
      }
    }
    entry.flagged = entry.max_rel_error > tol;
    report.entries.push_back(entry);
  }
  return report;
}

void uniform_init(Tensor& t, double bound, std::mt19937_64& rng) {
  for (double& v : t.values()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = (2.0 * u - 1.0) * bound;
  }
}

}  // namespace gecor
