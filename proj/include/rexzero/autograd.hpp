#ifndef REXZERO_AUTOGRAD_HPP
#define REXZERO_AUTOGRAD_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rexzero/common.hpp"

namespace rexzero {

using Matrix = Eigen::MatrixXd;

// A named trainable matrix with a persistent gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

// Owns parameters for one model; save/load is a flat binary blob plus the
// construction-time shapes, so a store must be built before loading into it.
class ParamStore {
public:
  Parameter& add(const std::string& name, int rows, int cols) {
    for (const auto& p : params_)
      if (p->name == name) throw ContractError("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter>(name, rows, cols));
    return *params_.back();
  }

  std::vector<Parameter*> all() const {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  Parameter& get(const std::string& name) const {
    for (const auto& p : params_)
      if (p->name == name) return *p;
    throw ContractError("unknown parameter: " + name);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  // Glorot-style init; by naming convention *_b parameters (biases) start at
  // zero and *_g parameters (layer-norm gains) at one.
  void init_uniform(std::uint64_t seed, double scale_override = 0.0) {
    std::mt19937_64 rng(seed);
    for (const auto& p : params_) {
      if (has_suffix(p->name, "_b")) {
        p->value.setZero();
        continue;
      }
      if (has_suffix(p->name, "_g")) {
        p->value.setOnes();
        continue;
      }
      double scale = scale_override > 0.0
                         ? scale_override
                         : std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols()));
      std::uniform_real_distribution<double> dist(-scale, scale);
      for (int c = 0; c < p->value.cols(); ++c)
        for (int r = 0; r < p->value.rows(); ++r) p->value(r, c) = dist(rng);
    }
  }

  void zero_grad() {
    for (const auto& p : params_) p->grad.setZero();
  }

  void save(const std::filesystem::path& path) const {
    std::string blob;
    auto put_u64 = [&](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    blob += "RXZP0001";
    put_u64(params_.size());
    for (const auto& p : params_) {
      put_u64(p->name.size());
      blob += p->name;
      put_u64(static_cast<std::uint64_t>(p->value.rows()));
      put_u64(static_cast<std::uint64_t>(p->value.cols()));
      for (int r = 0; r < p->value.rows(); ++r)
        for (int c = 0; c < p->value.cols(); ++c) {
          double d = p->value(r, c);
          blob.append(reinterpret_cast<const char*>(&d), sizeof(double));
        }
    }
    write_file(path, blob);
  }

  void load(const std::filesystem::path& path) {
    std::string blob = read_file(path);
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
      if (pos + n > blob.size()) throw DataError("truncated parameter blob: " + path.string());
    };
    auto get_u64 = [&]() {
      need(8);
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[pos + i])) << (8 * i);
      pos += 8;
      return v;
    };
    need(8);
    if (blob.compare(0, 8, "RXZP0001") != 0)
      throw DataError("bad parameter blob header: " + path.string());
    pos = 8;
    std::uint64_t count = get_u64();
    if (count != params_.size())
      throw DataError("parameter count mismatch in " + path.string());
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t name_len = get_u64();
      need(name_len);
      std::string name = blob.substr(pos, name_len);
      pos += name_len;
      std::uint64_t rows = get_u64(), cols = get_u64();
      Parameter& p = get(name);
      if (static_cast<std::uint64_t>(p.value.rows()) != rows ||
          static_cast<std::uint64_t>(p.value.cols()) != cols)
        throw DataError("shape mismatch for parameter " + name);
      need(rows * cols * sizeof(double));
      for (std::uint64_t r = 0; r < rows; ++r)
        for (std::uint64_t c = 0; c < cols; ++c) {
          double d;
          std::memcpy(&d, blob.data() + pos, sizeof(double));
          pos += sizeof(double);
          p.value(static_cast<int>(r), static_cast<int>(c)) = d;
        }
    }
  }

private:
  static bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
  }

  std::vector<std::unique_ptr<Parameter>> params_;
};

inline std::vector<Matrix> snapshot_params(const std::vector<Parameter*>& params) {
  std::vector<Matrix> snap;
  snap.reserve(params.size());
  for (const auto* p : params) snap.push_back(p->value);
  return snap;
}

inline void restore_params(const std::vector<Parameter*>& params,
                           const std::vector<Matrix>& snap) {
  if (snap.size() != params.size()) throw ContractError("parameter snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

class Tape;

// Lightweight handle into a tape node.
struct Expr {
  Tape* tape = nullptr;
  int idx = -1;

  const Matrix& value() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
  double scalar() const {
    if (value().size() != 1) throw ContractError("scalar() on non-1x1 expression");
    return value()(0, 0);
  }
};

// Dynamic reverse-mode tape, rebuilt per example. Parameter leaves reference
// the parameter storage instead of copying it; backward() flushes their
// accumulated gradients into Parameter::grad.
class Tape {
public:
  struct Node {
    Matrix storage;                    // owned value; unused for parameter refs
    const Matrix* external = nullptr;  // set only for parameter leaves
    Matrix grad;
    bool grad_alloc = false;
    bool requires_grad = false;
    std::function<void(Tape&, int)> backward;
  };

  const Matrix& value(int i) const {
    const Node& n = nodes_[i];
    return n.external ? *n.external : n.storage;
  }

  Matrix& grad(int i) {
    Node& n = nodes_[i];
    if (!n.grad_alloc) {
      const Matrix& v = value(i);
      n.grad = Matrix::Zero(v.rows(), v.cols());
      n.grad_alloc = true;
    }
    return n.grad;
  }

  bool requires_grad(int i) const { return nodes_[i].requires_grad; }

  Expr input(Matrix m) {
    int i = add_node(std::move(m), false);
    return {this, i};
  }

  Expr param(Parameter& p) {
    Node n;
    n.external = &p.value;
    n.requires_grad = true;
    Parameter* pp = &p;
    n.backward = [pp](Tape& t, int self) { pp->grad += t.grad(self); };
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size() - 1)};
  }

  // Row lookup into an embedding-style parameter, gradient scattered back.
  Expr gather_rows(Parameter& p, std::vector<int> ids) {
    Matrix m(static_cast<int>(ids.size()), p.value.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || ids[r] >= p.value.rows())
        throw ContractError("gather_rows index out of range for " + p.name);
      m.row(static_cast<int>(r)) = p.value.row(ids[r]);
    }
    int i = add_node(std::move(m), true);
    Parameter* pp = &p;
    nodes_[i].backward = [pp, ids = std::move(ids)](Tape& t, int self) {
      const Matrix& g = t.grad(self);
      for (std::size_t r = 0; r < ids.size(); ++r)
        pp->grad.row(ids[r]) += g.row(static_cast<int>(r));
    };
    return {this, i};
  }

  Expr matmul(Expr a, Expr b) {
    check(a, b);
    int i = add_node(value(a.idx) * value(b.idx), requires_grad(a.idx) || requires_grad(b.idx));
    nodes_[i].backward = [ai = a.idx, bi = b.idx](Tape& t, int self) {
      const Matrix& g = t.grad(self);
      if (t.requires_grad(ai)) t.grad(ai) += g * t.value(bi).transpose();
      if (t.requires_grad(bi)) t.grad(bi) += t.value(ai).transpose() * g;
    };
    return {this, i};
  }

  Expr add(Expr a, Expr b) {
    check(a, b);
    int i = add_node(value(a.idx) + value(b.idx), requires_grad(a.idx) || requires_grad(b.idx));
    nodes_[i].backward = [ai = a.idx, bi = b.idx](Tape& t, int self) {
      if (t.requires_grad(ai)) t.grad(ai) += t.grad(self);
      if (t.requires_grad(bi)) t.grad(bi) += t.grad(self);
    };
    return {this, i};
  }

  // value = a + 1*bias, bias broadcast across rows (bias is 1 x cols).
  Expr add_row_broadcast(Expr a, Expr bias) {
    check(a, bias);
    Matrix m = value(a.idx);
    m.rowwise() += value(bias.idx).row(0);
    int i = add_node(std::move(m), requires_grad(a.idx) || requires_grad(bias.idx));
    nodes_[i].backward = [ai = a.idx, bi = bias.idx](Tape& t, int self) {
      const Matrix& g = t.grad(self);
      if (t.requires_grad(ai)) t.grad(ai) += g;
      if (t.requires_grad(bi)) t.grad(bi) += g.colwise().sum();
    };
    return {this, i};
  }

  // Replicates a 1 x c row down to n rows.
  Expr broadcast_row(Expr a, int n) {
    Matrix m = value(a.idx).row(0).replicate(n, 1);
    int i = add_node(std::move(m), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (t.requires_grad(ai)) t.grad(ai) += t.grad(self).colwise().sum();
    };
    return {this, i};
  }

  Expr mul_elem(Expr a, Expr b) {
    check(a, b);
    int i = add_node(value(a.idx).cwiseProduct(value(b.idx)),
                     requires_grad(a.idx) || requires_grad(b.idx));
    nodes_[i].backward = [ai = a.idx, bi = b.idx](Tape& t, int self) {
      const Matrix& g = t.grad(self);
      if (t.requires_grad(ai)) t.grad(ai) += g.cwiseProduct(t.value(bi));
      if (t.requires_grad(bi)) t.grad(bi) += g.cwiseProduct(t.value(ai));
    };
    return {this, i};
  }

  Expr scale(Expr a, double s) {
    int i = add_node(value(a.idx) * s, requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx, s](Tape& t, int self) {
      if (t.requires_grad(ai)) t.grad(ai) += t.grad(self) * s;
    };
    return {this, i};
  }

  Expr add_scalar(Expr a, double c) {
    int i = add_node((value(a.idx).array() + c).matrix(), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (t.requires_grad(ai)) t.grad(ai) += t.grad(self);
    };
    return {this, i};
  }

  Expr relu(Expr a) {
    int i = add_node(value(a.idx).cwiseMax(0.0), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (!t.requires_grad(ai)) return;
      t.grad(ai) += t.grad(self).cwiseProduct(
          (t.value(ai).array() > 0.0).cast<double>().matrix());
    };
    return {this, i};
  }

  Expr sigmoid(Expr a) {
    Matrix s = (1.0 / (1.0 + (-value(a.idx).array()).exp())).matrix();
    int i = add_node(std::move(s), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (!t.requires_grad(ai)) return;
      const Matrix& s = t.value(self);
      t.grad(ai) += t.grad(self).cwiseProduct(
          s.cwiseProduct((1.0 - s.array()).matrix()));
    };
    return {this, i};
  }

  Expr tanh_(Expr a) {
    Matrix s = value(a.idx).array().tanh().matrix();
    int i = add_node(std::move(s), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (!t.requires_grad(ai)) return;
      const Matrix& s = t.value(self);
      t.grad(ai) += t.grad(self).cwiseProduct((1.0 - s.array().square()).matrix());
    };
    return {this, i};
  }

  Expr softmax_rows(Expr a) {
    Matrix m = value(a.idx);
    for (int r = 0; r < m.rows(); ++r) {
      Eigen::ArrayXd row = m.row(r).array();
      row -= row.maxCoeff();
      row = row.exp();
      m.row(r) = (row / row.sum()).matrix();
    }
    int i = add_node(std::move(m), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (!t.requires_grad(ai)) return;
      const Matrix& s = t.value(self);
      const Matrix& g = t.grad(self);
      Matrix& ga = t.grad(ai);
      for (int r = 0; r < s.rows(); ++r) {
        double dot = g.row(r).dot(s.row(r));
        ga.row(r) += (g.row(r).array() - dot).matrix().cwiseProduct(s.row(r));
      }
    };
    return {this, i};
  }

  Expr transpose(Expr a) {
    int i = add_node(value(a.idx).transpose(), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (t.requires_grad(ai)) t.grad(ai) += t.grad(self).transpose();
    };
    return {this, i};
  }

  Expr slice_rows(Expr a, int start, int len) {
    int i = add_node(value(a.idx).middleRows(start, len), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx, start, len](Tape& t, int self) {
      if (t.requires_grad(ai)) t.grad(ai).middleRows(start, len) += t.grad(self);
    };
    return {this, i};
  }

  Expr slice_cols(Expr a, int start, int len) {
    int i = add_node(value(a.idx).middleCols(start, len), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx, start, len](Tape& t, int self) {
      if (t.requires_grad(ai)) t.grad(ai).middleCols(start, len) += t.grad(self);
    };
    return {this, i};
  }

  Expr concat_cols(const std::vector<Expr>& parts) {
    if (parts.empty()) throw ContractError("concat_cols of nothing");
    int rows = parts[0].rows(), cols = 0;
    bool rg = false;
    for (const auto& p : parts) {
      cols += p.cols();
      rg = rg || requires_grad(p.idx);
    }
    Matrix m(rows, cols);
    std::vector<int> idxs;
    std::vector<int> widths;
    int at = 0;
    for (const auto& p : parts) {
      m.middleCols(at, p.cols()) = value(p.idx);
      idxs.push_back(p.idx);
      widths.push_back(p.cols());
      at += p.cols();
    }
    int i = add_node(std::move(m), rg);
    nodes_[i].backward = [idxs, widths](Tape& t, int self) {
      int at = 0;
      const Matrix& g = t.grad(self);
      for (std::size_t k = 0; k < idxs.size(); ++k) {
        if (t.requires_grad(idxs[k])) t.grad(idxs[k]) += g.middleCols(at, widths[k]);
        at += widths[k];
      }
    };
    return {this, i};
  }

  Expr concat_rows(const std::vector<Expr>& parts) {
    if (parts.empty()) throw ContractError("concat_rows of nothing");
    int cols = parts[0].cols(), rows = 0;
    bool rg = false;
    for (const auto& p : parts) {
      rows += p.rows();
      rg = rg || requires_grad(p.idx);
    }
    Matrix m(rows, cols);
    std::vector<int> idxs, heights;
    int at = 0;
    for (const auto& p : parts) {
      m.middleRows(at, p.rows()) = value(p.idx);
      idxs.push_back(p.idx);
      heights.push_back(p.rows());
      at += p.rows();
    }
    int i = add_node(std::move(m), rg);
    nodes_[i].backward = [idxs, heights](Tape& t, int self) {
      int at = 0;
      const Matrix& g = t.grad(self);
      for (std::size_t k = 0; k < idxs.size(); ++k) {
        if (t.requires_grad(idxs[k])) t.grad(idxs[k]) += g.middleRows(at, heights[k]);
        at += heights[k];
      }
    };
    return {this, i};
  }

  Expr mean_rows(Expr a) {
    int r = value(a.idx).rows();
    int i = add_node(value(a.idx).colwise().mean(), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx, r](Tape& t, int self) {
      if (!t.requires_grad(ai)) return;
      t.grad(ai) += Matrix::Ones(r, 1) * (t.grad(self) / static_cast<double>(r));
    };
    return {this, i};
  }

  Expr sum_all(Expr a) {
    Matrix m(1, 1);
    m(0, 0) = value(a.idx).sum();
    int i = add_node(std::move(m), requires_grad(a.idx));
    nodes_[i].backward = [ai = a.idx](Tape& t, int self) {
      if (!t.requires_grad(ai)) return;
      t.grad(ai).array() += t.grad(self)(0, 0);
    };
    return {this, i};
  }

  // Row-wise layer norm with learned gain/bias (both 1 x cols).
  Expr layer_norm(Expr x, Expr gain, Expr bias, double eps = 1e-5) {
    const Matrix& xv = value(x.idx);
    int rows = static_cast<int>(xv.rows()), cols = static_cast<int>(xv.cols());
    Matrix xhat(rows, cols);
    Eigen::ArrayXd inv_sigma(rows);
    for (int r = 0; r < rows; ++r) {
      double mu = xv.row(r).mean();
      double var = (xv.row(r).array() - mu).square().mean();
      double is = 1.0 / std::sqrt(var + eps);
      inv_sigma(r) = is;
      xhat.row(r) = ((xv.row(r).array() - mu) * is).matrix();
    }
    Matrix out = xhat;
    for (int r = 0; r < rows; ++r)
      out.row(r) = out.row(r).cwiseProduct(value(gain.idx).row(0)) + value(bias.idx).row(0);
    int i = add_node(std::move(out),
                     requires_grad(x.idx) || requires_grad(gain.idx) || requires_grad(bias.idx));
    nodes_[i].backward = [xi = x.idx, gi = gain.idx, bi = bias.idx, xhat = std::move(xhat),
                          inv_sigma = std::move(inv_sigma)](Tape& t, int self) {
      using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
      const Matrix& g = t.grad(self);
      if (t.requires_grad(bi)) t.grad(bi) += g.colwise().sum();
      if (t.requires_grad(gi)) t.grad(gi) += g.cwiseProduct(xhat).colwise().sum();
      if (t.requires_grad(xi)) {
        const Matrix& gainv = t.value(gi);
        Matrix& gx = t.grad(xi);
        for (int r = 0; r < g.rows(); ++r) {
          RowArray dxhat = g.row(r).array() * gainv.row(0).array();
          RowArray xh = xhat.row(r).array();
          double m1 = dxhat.mean();
          double m2 = (dxhat * xh).mean();
          gx.row(r) += (inv_sigma(r) * (dxhat - m1 - xh * m2)).matrix();
        }
      }
    };
    return {this, i};
  }

  // Numerically stable binary cross-entropy against constant targets,
  // summed over all entries: max(z,0) - z*t + log(1 + exp(-|z|)).
  Expr bce_with_logits_sum(Expr logits, Matrix targets) {
    const Matrix& z = value(logits.idx);
    if (z.rows() != targets.rows() || z.cols() != targets.cols())
      throw ContractError("bce_with_logits_sum: shape mismatch");
    Eigen::ArrayXXd za = z.array();
    double loss =
        (za.max(0.0) - za * targets.array() + (-(za.abs())).exp().log1p()).sum();
    Matrix m(1, 1);
    m(0, 0) = loss;
    int i = add_node(std::move(m), requires_grad(logits.idx));
    nodes_[i].backward = [li = logits.idx, targets = std::move(targets)](Tape& t, int self) {
      if (!t.requires_grad(li)) return;
      double g = t.grad(self)(0, 0);
      Eigen::ArrayXXd sig = 1.0 / (1.0 + (-t.value(li).array()).exp());
      t.grad(li) += (g * (sig - targets.array())).matrix();
    };
    return {this, i};
  }

  // Cross-entropy of a single distribution (logits are 1 x n) against a
  // target index: logsumexp(z) - z[target].
  Expr softmax_ce(Expr logits, int target) {
    const Matrix& z = value(logits.idx);
    if (z.rows() != 1) throw ContractError("softmax_ce expects a 1 x n logit row");
    if (target < 0 || target >= z.cols()) throw ContractError("softmax_ce target out of range");
    Eigen::ArrayXd za = z.row(0).array();
    double mx = za.maxCoeff();
    double lse = mx + std::log((za - mx).exp().sum());
    Matrix m(1, 1);
    m(0, 0) = lse - za(target);
    int i = add_node(std::move(m), requires_grad(logits.idx));
    nodes_[i].backward = [li = logits.idx, target](Tape& t, int self) {
      if (!t.requires_grad(li)) return;
      double g = t.grad(self)(0, 0);
      Eigen::ArrayXd za = t.value(li).row(0).array();
      double mx = za.maxCoeff();
      Eigen::ArrayXd sm = (za - mx).exp();
      sm /= sm.sum();
      sm(target) -= 1.0;
      t.grad(li).row(0) += (g * sm).matrix().transpose();
    };
    return {this, i};
  }

  void backward(Expr loss) {
    if (value(loss.idx).size() != 1) throw ContractError("backward from non-scalar loss");
    grad(loss.idx)(0, 0) = 1.0;
    for (int i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.grad_alloc && n.backward) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

private:
  int add_node(Matrix value, bool requires_grad) {
    Node n;
    n.storage = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  void check(Expr a, Expr b) const {
    if (a.tape != this || b.tape != this)
      throw ContractError("expression from a different tape");
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Expr::value() const { return tape->value(idx); }

inline Expr operator*(Expr a, Expr b) { return a.tape->matmul(a, b); }
inline Expr operator+(Expr a, Expr b) { return a.tape->add(a, b); }

// x * W + b with b broadcast across rows.
inline Expr affine(Expr x, Expr w, Expr b) {
  return x.tape->add_row_broadcast(x.tape->matmul(x, w), b);
}

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 5.0;  // 0 disables clipping
};

// Adam with decoupled weight decay and optional global-norm gradient clipping.
class AdamW {
public:
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (const auto* p : params_) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto* p : params_) sq += p->grad.squaredNorm();
      double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) {
        double s = cfg_.clip_norm / norm;
        for (auto* p : params_) p->grad *= s;
      }
    }
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
      Matrix mhat = m_[i] / bc1;
      Matrix vhat = v_[i] / bc2;
      p.value -= cfg_.lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
      if (cfg_.weight_decay > 0.0) p.value -= cfg_.lr * cfg_.weight_decay * p.value;
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->grad.setZero();
  }

private:
  std::vector<Parameter*> params_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace rexzero

#endif  // REXZERO_AUTOGRAD_HPP
