#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "retigraph/rng.hpp"

namespace retigraph::ad {

// Dense row-major 2D tensor; scalars are 1x1.
struct Tensor {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int64_t r, int64_t c) : rows(r), cols(c), v(static_cast<size_t>(r * c), 0.0) {}

  int64_t numel() const { return rows * cols; }
  double& at(int64_t r, int64_t c) { return v[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * cols + c)]; }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Running batch-norm statistics; owned by the model, updated as a side effect
// of train-mode forward passes.
struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;
  friend bool operator==(const RunningStats&, const RunningStats&) = default;
};

// Reverse-mode tape. Build a computation with the op methods, call
// backward(scalar_id), then read gradients of leaves. Node ids are indices
// into the tape, valid until reset().
class Tape {
 public:
  int leaf(Tensor value, bool requires_grad = false);

  const Tensor& val(int id) const { return nodes_[id].value; }
  Tensor& grad(int id);
  bool has_grad(int id) const { return nodes_[id].requires_grad; }

  // y = a . b
  int matmul(int a, int b);
  // y = x . W + 1 b^T
  int linear(int x, int W, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);  // elementwise
  int scale(int a, double s);
  int relu(int a);
  int concat_cols(int a, int b);

  // out[d] = mean over edges e with dst[e]==d of src[src_idx[e]]; rows with no
  // incoming edge stay zero.
  int scatter_mean(int src, std::vector<int32_t> src_idx, std::vector<int32_t> dst_idx,
                   int64_t out_rows);
  int scatter_sum(int src, std::vector<int32_t> src_idx, std::vector<int32_t> dst_idx,
                  int64_t out_rows);
  // out[s] = mean over rows r with seg_id[r]==s; empty segments stay zero.
  int segment_mean(int x, std::vector<int32_t> seg_id, int64_t n_segments);

  // Batch normalization over rows. Train mode with >=2 rows uses batch
  // statistics (population variance) and updates `running`; otherwise the
  // running statistics are used as a fixed affine transform.
  int batch_norm(int x, int gamma, int beta, RunningStats* running, bool train_mode,
                 double momentum = 0.1, double eps = 1e-5);

  int dropout(int x, double rate, Rng& rng, bool train_mode);

  // Class-weighted mean cross entropy from raw logits. Weight of sample i is
  // class_weights[labels[i]]; the mean is weighted accordingly.
  int softmax_cross_entropy(int logits, std::vector<int> labels, std::vector<double> class_weights);

  int pick(int a, int64_t row, int64_t col);  // scalar view of one element
  int sum_all(int a);

  // Reverse pass from a scalar output. Throws ArgumentError otherwise.
  void backward(int output);

  size_t size() const { return nodes_.size(); }
  void reset() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  int push(Tensor value, bool requires_grad, std::function<void(Tape&)> fn);
  std::vector<Node> nodes_;
};

}  // namespace retigraph::ad
