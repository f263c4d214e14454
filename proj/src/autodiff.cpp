#include "retigraph/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "retigraph/errors.hpp"

namespace retigraph::ad {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using CMatMap = Eigen::Map<const Mat>;

MatMap map(Tensor& t) { return MatMap(t.v.data(), t.rows, t.cols); }
CMatMap map(const Tensor& t) { return CMatMap(t.v.data(), t.rows, t.cols); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ArgumentError(std::string(op) + ": shape mismatch");
}

}  // namespace

int Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

int Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.numel() == 0) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

int Tape::matmul(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.cols != B.rows) throw ArgumentError("matmul: inner dimensions differ");
  Tensor out(A.rows, B.cols);
  map(out).noalias() = map(A) * map(B);
  const bool rg = has_grad(a) || has_grad(b);
  const int id = push(std::move(out), rg, nullptr);
  nodes_[id].backward = [a, b, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.has_grad(a)) map(t.grad(a)).noalias() += map(g) * map(t.val(b)).transpose();
    if (t.has_grad(b)) map(t.grad(b)).noalias() += map(t.val(a)).transpose() * map(g);
  };
  return id;
}

int Tape::linear(int x, int W, int b) {
  const Tensor& X = val(x);
  const Tensor& Wm = val(W);
  const Tensor& B = val(b);
  if (X.cols != Wm.rows) throw ArgumentError("linear: inner dimensions differ");
  if (B.rows != 1 || B.cols != Wm.cols) throw ArgumentError("linear: bias shape mismatch");
  Tensor out(X.rows, Wm.cols);
  map(out).noalias() = map(X) * map(Wm);
  map(out).rowwise() += map(B).row(0);
  const bool rg = has_grad(x) || has_grad(W) || has_grad(b);
  const int id = push(std::move(out), rg, nullptr);
  nodes_[id].backward = [x, W, b, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.has_grad(x)) map(t.grad(x)).noalias() += map(g) * map(t.val(W)).transpose();
    if (t.has_grad(W)) map(t.grad(W)).noalias() += map(t.val(x)).transpose() * map(g);
    if (t.has_grad(b)) map(t.grad(b)).row(0) += map(g).colwise().sum();
  };
  return id;
}

int Tape::add(int a, int b) {
  check_same_shape(val(a), val(b), "add");
  Tensor out = val(a);
  map(out) += map(val(b));
  const bool rg = has_grad(a) || has_grad(b);
  const int id = push(std::move(out), rg, nullptr);
  nodes_[id].backward = [a, b, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.has_grad(a)) map(t.grad(a)) += map(g);
    if (t.has_grad(b)) map(t.grad(b)) += map(g);
  };
  return id;
}

int Tape::sub(int a, int b) {
  check_same_shape(val(a), val(b), "sub");
  Tensor out = val(a);
  map(out) -= map(val(b));
  const bool rg = has_grad(a) || has_grad(b);
  const int id = push(std::move(out), rg, nullptr);
  nodes_[id].backward = [a, b, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.has_grad(a)) map(t.grad(a)) += map(g);
    if (t.has_grad(b)) map(t.grad(b)) -= map(g);
  };
  return id;
}

int Tape::mul(int a, int b) {
  check_same_shape(val(a), val(b), "mul");
  Tensor out = val(a);
  map(out).array() *= map(val(b)).array();
  const bool rg = has_grad(a) || has_grad(b);
  const int id = push(std::move(out), rg, nullptr);
  nodes_[id].backward = [a, b, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.has_grad(a)) map(t.grad(a)).array() += map(g).array() * map(t.val(b)).array();
    if (t.has_grad(b)) map(t.grad(b)).array() += map(g).array() * map(t.val(a)).array();
  };
  return id;
}

int Tape::scale(int a, double s) {
  Tensor out = val(a);
  map(out) *= s;
  const int id = push(std::move(out), has_grad(a), nullptr);
  nodes_[id].backward = [a, s, id](Tape& t) {
    if (t.has_grad(a)) map(t.grad(a)) += s * map(t.nodes_[id].grad);
  };
  return id;
}

int Tape::relu(int a) {
  Tensor out = val(a);
  for (double& v : out.v) v = v > 0.0 ? v : 0.0;
  const int id = push(std::move(out), has_grad(a), nullptr);
  nodes_[id].backward = [a, id](Tape& t) {
    if (!t.has_grad(a)) return;
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& x = t.val(a);
    Tensor& gx = t.grad(a);
    for (size_t i = 0; i < gx.v.size(); ++i)
      if (x.v[i] > 0.0) gx.v[i] += g.v[i];
  };
  return id;
}

int Tape::concat_cols(int a, int b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.rows != B.rows) throw ArgumentError("concat_cols: row counts differ");
  Tensor out(A.rows, A.cols + B.cols);
  map(out).leftCols(A.cols) = map(A);
  map(out).rightCols(B.cols) = map(B);
  const bool rg = has_grad(a) || has_grad(b);
  const int id = push(std::move(out), rg, nullptr);
  const int64_t ca = A.cols, cb = B.cols;
  nodes_[id].backward = [a, b, ca, cb, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.has_grad(a)) map(t.grad(a)) += map(g).leftCols(ca);
    if (t.has_grad(b)) map(t.grad(b)) += map(g).rightCols(cb);
  };
  return id;
}

int Tape::scatter_mean(int src, std::vector<int32_t> src_idx, std::vector<int32_t> dst_idx,
                       int64_t out_rows) {
  if (src_idx.size() != dst_idx.size())
    throw ArgumentError("scatter_mean: index lists differ in length");
  const Tensor& S = val(src);
  Tensor out(out_rows, S.cols);
  std::vector<double> deg(static_cast<size_t>(out_rows), 0.0);
  for (int32_t d : dst_idx) deg[d] += 1.0;
  for (size_t e = 0; e < src_idx.size(); ++e) {
    const double* from = S.v.data() + static_cast<size_t>(src_idx[e]) * S.cols;
    double* to = out.v.data() + static_cast<size_t>(dst_idx[e]) * S.cols;
    for (int64_t c = 0; c < S.cols; ++c) to[c] += from[c];
  }
  for (int64_t r = 0; r < out_rows; ++r) {
    if (deg[r] == 0.0) continue;
    double* row = out.v.data() + static_cast<size_t>(r) * S.cols;
    for (int64_t c = 0; c < S.cols; ++c) row[c] /= deg[r];
  }
  const int id = push(std::move(out), has_grad(src), nullptr);
  nodes_[id].backward = [src, si = std::move(src_idx), di = std::move(dst_idx),
                         deg = std::move(deg), id](Tape& t) {
    if (!t.has_grad(src)) return;
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gs = t.grad(src);
    for (size_t e = 0; e < si.size(); ++e) {
      const double inv = 1.0 / deg[di[e]];
      const double* from = g.v.data() + static_cast<size_t>(di[e]) * g.cols;
      double* to = gs.v.data() + static_cast<size_t>(si[e]) * g.cols;
      for (int64_t c = 0; c < g.cols; ++c) to[c] += from[c] * inv;
    }
  };
  return id;
}

int Tape::scatter_sum(int src, std::vector<int32_t> src_idx, std::vector<int32_t> dst_idx,
                      int64_t out_rows) {
  if (src_idx.size() != dst_idx.size())
    throw ArgumentError("scatter_sum: index lists differ in length");
  const Tensor& S = val(src);
  Tensor out(out_rows, S.cols);
  for (size_t e = 0; e < src_idx.size(); ++e) {
    const double* from = S.v.data() + static_cast<size_t>(src_idx[e]) * S.cols;
    double* to = out.v.data() + static_cast<size_t>(dst_idx[e]) * S.cols;
    for (int64_t c = 0; c < S.cols; ++c) to[c] += from[c];
  }
  const int id = push(std::move(out), has_grad(src), nullptr);
  nodes_[id].backward = [src, si = std::move(src_idx), di = std::move(dst_idx), id](Tape& t) {
    if (!t.has_grad(src)) return;
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gs = t.grad(src);
    for (size_t e = 0; e < si.size(); ++e) {
      const double* from = g.v.data() + static_cast<size_t>(di[e]) * g.cols;
      double* to = gs.v.data() + static_cast<size_t>(si[e]) * g.cols;
      for (int64_t c = 0; c < g.cols; ++c) to[c] += from[c];
    }
  };
  return id;
}

int Tape::segment_mean(int x, std::vector<int32_t> seg_id, int64_t n_segments) {
  const Tensor& X = val(x);
  if (static_cast<int64_t>(seg_id.size()) != X.rows)
    throw ArgumentError("segment_mean: segment ids must match row count");
  Tensor out(n_segments, X.cols);
  std::vector<double> count(static_cast<size_t>(n_segments), 0.0);
  for (int32_t s : seg_id) count[s] += 1.0;
  for (int64_t r = 0; r < X.rows; ++r) {
    const double* from = X.v.data() + static_cast<size_t>(r) * X.cols;
    double* to = out.v.data() + static_cast<size_t>(seg_id[r]) * X.cols;
    for (int64_t c = 0; c < X.cols; ++c) to[c] += from[c];
  }
  for (int64_t s = 0; s < n_segments; ++s) {
    if (count[s] == 0.0) continue;
    double* row = out.v.data() + static_cast<size_t>(s) * X.cols;
    for (int64_t c = 0; c < X.cols; ++c) row[c] /= count[s];
  }
  const int id = push(std::move(out), has_grad(x), nullptr);
  nodes_[id].backward = [x, ids = std::move(seg_id), count = std::move(count), id](Tape& t) {
    if (!t.has_grad(x)) return;
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gx = t.grad(x);
    for (int64_t r = 0; r < gx.rows; ++r) {
      const double inv = 1.0 / count[ids[r]];
      const double* from = g.v.data() + static_cast<size_t>(ids[r]) * g.cols;
      double* to = gx.v.data() + static_cast<size_t>(r) * g.cols;
      for (int64_t c = 0; c < g.cols; ++c) to[c] += from[c] * inv;
    }
  };
  return id;
}

int Tape::batch_norm(int x, int gamma, int beta, RunningStats* running, bool train_mode,
                     double momentum, double eps) {
  const Tensor& X = val(x);
  const int64_t n = X.rows;
  const int64_t d = X.cols;
  if (val(gamma).numel() != d || val(beta).numel() != d)
    throw ArgumentError("batch_norm: parameter dimensions differ from input");
  if (static_cast<int64_t>(running->mean.size()) != d)
    throw ArgumentError("batch_norm: running statistics dimension mismatch");

  const bool use_batch = train_mode && n >= 2;
  std::vector<double> mu(d), inv_std(d);
  if (use_batch) {
    std::vector<double> var(d, 0.0);
    for (int64_t c = 0; c < d; ++c) mu[c] = 0.0;
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < d; ++c) mu[c] += X.at(r, c);
    for (int64_t c = 0; c < d; ++c) mu[c] /= static_cast<double>(n);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < d; ++c) {
        const double diff = X.at(r, c) - mu[c];
        var[c] += diff * diff;
      }
    for (int64_t c = 0; c < d; ++c) var[c] /= static_cast<double>(n);
    for (int64_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    for (int64_t c = 0; c < d; ++c) {
      running->mean[c] = (1.0 - momentum) * running->mean[c] + momentum * mu[c];
      running->var[c] = (1.0 - momentum) * running->var[c] + momentum * var[c];
    }
  } else {
    for (int64_t c = 0; c < d; ++c) {
      mu[c] = running->mean[c];
      inv_std[c] = 1.0 / std::sqrt(running->var[c] + eps);
    }
  }

  Tensor xhat(n, d);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < d; ++c) xhat.at(r, c) = (X.at(r, c) - mu[c]) * inv_std[c];
  Tensor out(n, d);
  const Tensor& G = val(gamma);
  const Tensor& B = val(beta);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < d; ++c) out.at(r, c) = xhat.at(r, c) * G.v[c] + B.v[c];

  const bool rg = has_grad(x) || has_grad(gamma) || has_grad(beta);
  const int id = push(std::move(out), rg, nullptr);
  nodes_[id].backward = [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std),
                         use_batch, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const int64_t n = g.rows, d = g.cols;
    const Tensor& G = t.val(gamma);
    if (t.has_grad(beta)) {
      Tensor& gb = t.grad(beta);
      for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < d; ++c) gb.v[c] += g.at(r, c);
    }
    if (t.has_grad(gamma)) {
      Tensor& gg = t.grad(gamma);
      for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < d; ++c) gg.v[c] += g.at(r, c) * xhat.at(r, c);
    }
    if (!t.has_grad(x)) return;
    Tensor& gx = t.grad(x);
    if (!use_batch) {
      for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < d; ++c) gx.at(r, c) += g.at(r, c) * G.v[c] * inv_std[c];
      return;
    }
    // Batch statistics took part in the forward pass, so they carry gradient.
    std::vector<double> sum_dxhat(d, 0.0), sum_dxhat_xhat(d, 0.0);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < d; ++c) {
        const double dxh = g.at(r, c) * G.v[c];
        sum_dxhat[c] += dxh;
        sum_dxhat_xhat[c] += dxh * xhat.at(r, c);
      }
    const double invn = 1.0 / static_cast<double>(n);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < d; ++c) {
        const double dxh = g.at(r, c) * G.v[c];
        gx.at(r, c) += inv_std[c] * (dxh - invn * sum_dxhat[c] -
                                     xhat.at(r, c) * invn * sum_dxhat_xhat[c]);
      }
  };
  return id;
}

int Tape::dropout(int x, double rate, Rng& rng, bool train_mode) {
  if (rate < 0.0 || rate >= 1.0) throw ArgumentError("dropout rate must be in [0,1)");
  if (!train_mode || rate == 0.0) return x;
  const Tensor& X = val(x);
  std::vector<uint8_t> keep(X.v.size());
  const double inv_keep = 1.0 / (1.0 - rate);
  Tensor out = X;
  for (size_t i = 0; i < out.v.size(); ++i) {
    keep[i] = rng.uniform() >= rate ? 1 : 0;
    out.v[i] = keep[i] ? out.v[i] * inv_keep : 0.0;
  }
  const int id = push(std::move(out), has_grad(x), nullptr);
  nodes_[id].backward = [x, keep = std::move(keep), inv_keep, id](Tape& t) {
    if (!t.has_grad(x)) return;
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gx = t.grad(x);
    for (size_t i = 0; i < gx.v.size(); ++i)
      if (keep[i]) gx.v[i] += g.v[i] * inv_keep;
  };
  return id;
}

int Tape::softmax_cross_entropy(int logits, std::vector<int> labels,
                                std::vector<double> class_weights) {
  const Tensor& L = val(logits);
  const int64_t n = L.rows;
  const int64_t k = L.cols;
  if (static_cast<int64_t>(labels.size()) != n)
    throw ArgumentError("cross entropy: one label per row required");
  for (int y : labels)
    if (y < 0 || y >= k) throw ArgumentError("cross entropy: label out of range");

  Tensor probs(n, k);
  double loss = 0.0;
  double weight_sum = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    double mx = L.at(r, 0);
    for (int64_t c = 1; c < k; ++c) mx = std::max(mx, L.at(r, c));
    double z = 0.0;
    for (int64_t c = 0; c < k; ++c) z += std::exp(L.at(r, c) - mx);
    const double logz = std::log(z) + mx;
    for (int64_t c = 0; c < k; ++c) probs.at(r, c) = std::exp(L.at(r, c) - logz);
    const double w = class_weights[labels[r]];
    loss += w * (logz - L.at(r, labels[r]));
    weight_sum += w;
  }
  if (weight_sum <= 0.0) throw ArgumentError("cross entropy: zero total weight");
  Tensor out(1, 1);
  out.v[0] = loss / weight_sum;
  const int id = push(std::move(out), has_grad(logits), nullptr);
  nodes_[id].backward = [logits, labels = std::move(labels), cw = std::move(class_weights),
                         probs = std::move(probs), weight_sum, id](Tape& t) {
    if (!t.has_grad(logits)) return;
    const double gscale = t.nodes_[id].grad.v[0] / weight_sum;
    Tensor& gl = t.grad(logits);
    for (int64_t r = 0; r < gl.rows; ++r) {
      const double w = cw[labels[r]];
      for (int64_t c = 0; c < gl.cols; ++c) {
        const double onehot = c == labels[r] ? 1.0 : 0.0;
        gl.at(r, c) += gscale * w * (probs.at(r, c) - onehot);
      }
    }
  };
  return id;
}

int Tape::pick(int a, int64_t row, int64_t col) {
  const Tensor& A = val(a);
  if (row < 0 || row >= A.rows || col < 0 || col >= A.cols)
    throw ArgumentError("pick: index out of range");
  Tensor out(1, 1);
  out.v[0] = A.at(row, col);
  const int id = push(std::move(out), has_grad(a), nullptr);
  nodes_[id].backward = [a, row, col, id](Tape& t) {
    if (t.has_grad(a)) t.grad(a).at(row, col) += t.nodes_[id].grad.v[0];
  };
  return id;
}

int Tape::sum_all(int a) {
  const Tensor& A = val(a);
  Tensor out(1, 1);
  for (double v : A.v) out.v[0] += v;
  const int id = push(std::move(out), has_grad(a), nullptr);
  nodes_[id].backward = [a, id](Tape& t) {
    if (!t.has_grad(a)) return;
    const double g = t.nodes_[id].grad.v[0];
    for (double& v : t.grad(a).v) v += g;
  };
  return id;
}

void Tape::backward(int output) {
  if (val(output).numel() != 1)
    throw ArgumentError("backward requires a scalar output");
  grad(output).v[0] = 1.0;
  for (int id = output; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward) continue;
    if (n.grad.numel() == 0) continue;  // never touched by downstream gradients
    n.backward(*this);
  }
}

}  // namespace retigraph::ad
