#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gecor {

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

// Shared handle onto dense row-major storage. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor vector(std::vector<double> v, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v,
                       bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t i) const { return data_->shape.at(i); }
  std::size_t size() const { return data_->values.size(); }
  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }

  std::span<double> values() { return data_->values; }
  std::span<const double> values() const { return data_->values; }
  double& operator[](std::size_t i) { return data_->values[i]; }
  double operator[](std::size_t i) const { return data_->values[i]; }
  double item() const;

  bool has_grad() const { return data_->grad.size() == data_->values.size(); }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  // Deep copy detached from any tape.
  Tensor clone() const;

  TensorData* raw() const { return data_.get(); }
  const std::shared_ptr<TensorData>& ptr() const { return data_; }

 private:
  std::shared_ptr<TensorData> data_;
};

// Records backward closures in execution order. A tape with recording
// disabled runs forward math only (inference).
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void record(const Tensor& output, std::function<void()> backward) {
    if (!recording_) return;
    outputs_.push_back(output.ptr());
    entries_.push_back(std::move(backward));
  }
  std::size_t size() const { return entries_.size(); }
  void clear() {
    entries_.clear();
    outputs_.clear();
  }

  // Seeds d(loss)/d(loss) = 1 and replays in reverse registration order.
  // Intermediate gradients are reset first; leaf gradients accumulate.
  void backward(const Tensor& loss);

 private:
  bool recording_;
  std::vector<std::function<void()>> entries_;
  std::vector<std::shared_ptr<TensorData>> outputs_;
};

// ---- operations -----------------------------------------------------------
// Vectors are rank-1, matrices rank-2; scalars are rank-1 of size 1 or rank-0.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);       // [m×k]·[k×n]
Tensor matvec(Tape& tape, const Tensor& m, const Tensor& x);       // [m×k]·[k]
Tensor vecmat(Tape& tape, const Tensor& x, const Tensor& m);       // [m]ᵀ·[m×k]
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);          // elementwise
Tensor scale(Tape& tape, const Tensor& a, double k);
Tensor one_minus(Tape& tape, const Tensor& a);
Tensor scalar_mul(Tape& tape, const Tensor& s, const Tensor& a);   // s has size 1
Tensor add_rowwise(Tape& tape, const Tensor& m, const Tensor& row);  // [m×k] + [k]
Tensor tanh(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor log(Tape& tape, const Tensor& a);
Tensor sum(Tape& tape, const Tensor& a);
Tensor dot(Tape& tape, const Tensor& a, const Tensor& b);
Tensor concat(Tape& tape, std::span<const Tensor> parts);         // along last dim
Tensor stack_rows(Tape& tape, std::span<const Tensor> rows);      // k×[d] -> [k×d]
Tensor row(Tape& tape, const Tensor& m, std::size_t i);
Tensor lookup(Tape& tape, const Tensor& table, std::size_t index);  // embedding row
Tensor softmax(Tape& tape, const Tensor& x, const std::vector<bool>* mask = nullptr);
Tensor select_sum(Tape& tape, const Tensor& x, std::span<const std::size_t> idx);
// log(Σ_{i∈idx} softmax(x)_i), evaluated via log-sum-exp.
Tensor log_softmax_select(Tape& tape, const Tensor& x, std::span<const std::size_t> idx);
// -log(x[index]) for a probability vector x.
Tensor nll(Tape& tape, const Tensor& probs, std::size_t index);
Tensor dropout(Tape& tape, const Tensor& x, double rate, std::mt19937_64& rng);

struct GruParams {
  Tensor w_input;   // [3h × d_in]  rows: update, reset, candidate
  Tensor w_hidden;  // [3h × h]
  Tensor bias;      // [3h]

  std::size_t hidden() const { return bias.size() / 3; }
  std::size_t input() const { return w_input.dim(1); }
};

// z = σ(Wz x + Uz h + bz), r = σ(Wr x + Ur h + br),
// n = tanh(Wn x + Un (r⊙h) + bn), h' = (1 − z)⊙n + z⊙h
Tensor gru_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const GruParams& p);

// ---- gradient checking ------------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool flagged = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error() const;
  bool passed() const;
};

// `loss_fn` builds the loss on the supplied tape. Analytic gradients come from
// one backward pass; numeric ones from central differences on every entry.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& loss_fn,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps = 1e-5, double tol = 1e-4);

// |a − n| / max(|a|, |n|, 1e-6). The floor absorbs central-difference
// rounding noise (≈ 1e-16·|loss|/eps) on gradients that are nearly zero.
double relative_error(double analytic, double numeric);

// Uniform in [-bound, bound].
void uniform_init(Tensor& t, double bound, std::mt19937_64& rng);

}  // namespace gecor
