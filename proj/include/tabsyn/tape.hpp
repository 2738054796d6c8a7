#pragma once

#include "tabsyn/common.hpp"
#include "tabsyn/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tabsyn::ad {

// Persistent trainable parameter. Tapes bind to it and accumulate into grad.
struct Var {
  std::string name;
  Mat value;
  Mat grad;

  Var() = default;
  Var(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
};

// Batch-norm running statistics, owned by the model, updated on training
// forward passes and consumed in eval mode.
struct BnStats {
  Mat mean;  // [1, d]
  Mat var;   // [1, d]
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,      // op(a) * op(b), transpose flags ta/tb
  AddBias,     // a + row-broadcast bias [1, m]
  ConcatCols,  // n-ary column concatenation
  SliceCols,   // columns [i0, i0+i1)
  PadCols,     // embed into i1 columns at offset i0
  Reshape,     // row-major reinterpret to [i0, i1]
  LeakyRelu,   // slope c
  Relu,
  Tanh,
  Sigmoid,
  Softplus,
  BatchNorm,  // inputs x, gamma, beta; i0 = train flag
  MulMask,    // a .* constant mask (dropout et al.)
  MulRow,     // a .* row-broadcast b [1, m]
  Add,
  Sub,
  Mul,        // elementwise
  Scale,      // c * a
  AddScalar,  // a + c
  Log,
  Exp,
  Sqrt,
  Square,
  Softmax,     // row-wise
  LogSoftmax,  // row-wise
  RowSum,      // [n, m] -> [n, 1]
  SumAll,      // [n, m] -> [1, 1]
  MeanAll,     // [n, m] -> [1, 1]
};

struct Node {
  Op op = Op::Leaf;
  int a = -1;
  int b = -1;
  int c_in = -1;            // third input (batch-norm beta)
  std::vector<int> ins;     // ConcatCols
  bool ta = false, tb = false;
  double c = 0.0;           // scalar attribute (slope, scale, ...)
  int i0 = 0, i1 = 0;       // slice/pad/reshape attributes
  int var = -1;             // parameter binding
  Mat value;
  Mat aux;                  // cached mask / xhat / softmax
  Mat aux2;                 // cached invstd
};

// Reverse-mode tape over dense matrices. Values are computed eagerly as
// nodes are recorded; backward() runs a numeric reverse sweep and
// grad_nodes() records the reverse sweep itself as new nodes so a scalar of
// an input gradient can be differentiated again (the op set for that second
// pass is restricted to the piecewise-linear ops the critic uses).
class Tape {
 public:
  int input(Mat v);
  int param(Var& v);

  int matmul(int a, int b, bool ta = false, bool tb = false);
  int add_bias(int a, int bias);
  int concat_cols(const std::vector<int>& parts);
  int slice_cols(int a, int start, int width);
  int pad_cols(int a, int start, int total_width);
  int reshape(int a, int rows, int cols);
  int leaky_relu(int a, double slope);
  int relu(int a);
  int tanh_op(int a);
  int sigmoid(int a);
  int softplus(int a);
  int batch_norm(int x, int gamma, int beta, BnStats& stats, bool train,
                 double eps = 1e-5, double momentum = 0.9);
  int mul_mask(int a, Mat mask);
  int dropout(int a, double p, Rng& rng, bool train);
  int mul_row(int a, int row_vec);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, double c);
  int add_scalar(int a, double c);
  int log_op(int a);
  int exp_op(int a);
  int sqrt_op(int a);
  int square(int a);
  int softmax(int a);
  int log_softmax(int a);
  int row_sum(int a);
  int sum_all(int a);
  int mean_all(int a);

  // softmax((logits + gumbel noise) / tau); `scaled` receives the
  // pre-softmax node for cross-entropy terms sharing the same noise
  int gumbel_softmax(int logits, double tau, Rng& rng, int* scaled = nullptr);

  const Mat& value(int id) const { return nodes_[id].value; }
  Eigen::Index rows(int id) const { return nodes_[id].value.rows(); }
  Eigen::Index cols(int id) const { return nodes_[id].value.cols(); }
  std::size_t size() const { return nodes_.size(); }

  // Numeric reverse sweep seeded with ones (or an explicit seed matrix).
  // Accumulates into bound Var::grad; adjoints retrievable via grad_of.
  void backward(int output);
  void backward(int output, const Mat& seed);
  Mat grad_of(int id) const;

  // Records d(sum(output))/d(wrt) as nodes on this tape and returns the node
  // holding it. Throws numeric_error when the graph between wrt and output
  // contains an op outside the second-order set (e.g. batch-norm).
  int grad_nodes(int output, int wrt);

 private:
  int push(Node n);
  std::vector<Node> nodes_;
  std::vector<Var*> vars_;
  std::vector<Mat> adj_;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Var*> params, AdamConfig cfg);

  void step();       // throws numeric_error on non-finite gradients
  void zero_grad();
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Var*> params_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

}  // namespace tabsyn::ad
