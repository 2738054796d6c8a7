#include "tabsyn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace tabsyn::ad {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Mat rowwise_softmax(const Mat& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mx = x.row(i).maxCoeff();
    y.row(i).array() = (x.row(i).array() - mx).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

Mat rowwise_log_softmax(const Mat& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mx = x.row(i).maxCoeff();
    const double lse = mx + std::log((x.row(i).array() - mx).exp().sum());
    y.row(i).array() = x.row(i).array() - lse;
  }
  return y;
}

}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::input(Mat v) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  return push(std::move(n));
}

int Tape::param(Var& v) {
  Node n;
  n.op = Op::Leaf;
  n.value = v.value;
  n.var = static_cast<int>(vars_.size());
  vars_.push_back(&v);
  return push(std::move(n));
}

int Tape::matmul(int a, int b, bool ta, bool tb) {
  const Mat& A = nodes_[a].value;
  const Mat& B = nodes_[b].value;
  const Eigen::Index ak = ta ? A.rows() : A.cols();
  const Eigen::Index bk = tb ? B.cols() : B.rows();
  require(ak == bk, "matmul: inner dimensions mismatch");
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.ta = ta;
  n.tb = tb;
  if (!ta && !tb)
    n.value = A * B;
  else if (!ta && tb)
    n.value = A * B.transpose();
  else if (ta && !tb)
    n.value = A.transpose() * B;
  else
    n.value = A.transpose() * B.transpose();
  return push(std::move(n));
}

int Tape::add_bias(int a, int bias) {
  const Mat& A = nodes_[a].value;
  const Mat& B = nodes_[bias].value;
  require(B.rows() == 1 && B.cols() == A.cols(), "add_bias: bias must be [1, cols]");
  Node n;
  n.op = Op::AddBias;
  n.a = a;
  n.b = bias;
  n.value = A.rowwise() + B.row(0);
  return push(std::move(n));
}

int Tape::concat_cols(const std::vector<int>& parts) {
  require(!parts.empty(), "concat_cols: empty part list");
  const Eigen::Index rows = nodes_[parts[0]].value.rows();
  Eigen::Index total = 0;
  for (int p : parts) {
    require(nodes_[p].value.rows() == rows, "concat_cols: row count mismatch");
    total += nodes_[p].value.cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  n.ins = parts;
  n.value.resize(rows, total);
  Eigen::Index off = 0;
  for (int p : parts) {
    const Mat& v = nodes_[p].value;
    n.value.middleCols(off, v.cols()) = v;
    off += v.cols();
  }
  return push(std::move(n));
}

int Tape::slice_cols(int a, int start, int width) {
  const Mat& A = nodes_[a].value;
  require(start >= 0 && width >= 0 && start + width <= A.cols(), "slice_cols: out of range");
  Node n;
  n.op = Op::SliceCols;
  n.a = a;
  n.i0 = start;
  n.i1 = width;
  n.value = A.middleCols(start, width);
  return push(std::move(n));
}

int Tape::pad_cols(int a, int start, int total_width) {
  const Mat& A = nodes_[a].value;
  require(start >= 0 && start + A.cols() <= total_width, "pad_cols: out of range");
  Node n;
  n.op = Op::PadCols;
  n.a = a;
  n.i0 = start;
  n.i1 = total_width;
  n.value = Mat::Zero(A.rows(), total_width);
  n.value.middleCols(start, A.cols()) = A;
  return push(std::move(n));
}

int Tape::reshape(int a, int rows, int cols) {
  const Mat& A = nodes_[a].value;
  require(A.size() == static_cast<Eigen::Index>(rows) * cols, "reshape: size mismatch");
  Node n;
  n.op = Op::Reshape;
  n.a = a;
  n.i0 = rows;
  n.i1 = cols;
  n.value = Eigen::Map<const Mat>(A.data(), rows, cols);
  return push(std::move(n));
}

int Tape::leaky_relu(int a, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.a = a;
  n.c = slope;
  const Mat& A = nodes_[a].value;
  n.value = A.unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.value = nodes_[a].value.cwiseMax(0.0);
  return push(std::move(n));
}

int Tape::tanh_op(int a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a;
  n.value = nodes_[a].value.array().tanh().matrix();
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  n.value = nodes_[a].value.unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return push(std::move(n));
}

int Tape::softplus(int a) {
  Node n;
  n.op = Op::Softplus;
  n.a = a;
  n.value = nodes_[a].value.unaryExpr([](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return push(std::move(n));
}

int Tape::batch_norm(int x, int gamma, int beta, BnStats& stats, bool train, double eps,
                     double momentum) {
  const Mat& X = nodes_[x].value;
  const Eigen::Index d = X.cols();
  require(nodes_[gamma].value.cols() == d && nodes_[beta].value.cols() == d,
          "batch_norm: gamma/beta width mismatch");
  Node n;
  n.op = Op::BatchNorm;
  n.a = x;
  n.b = gamma;
  n.c_in = beta;
  n.i0 = train ? 1 : 0;
  Mat mean(1, d), var(1, d);
  if (train) {
    require(X.rows() > 0, "batch_norm: empty batch");
    mean = X.colwise().mean();
    var = (X.rowwise() - mean.row(0)).array().square().colwise().mean().matrix();
    if (stats.mean.size() == 0) {
      stats.mean = mean;
      stats.var = var;
    } else {
      stats.mean = momentum * stats.mean + (1.0 - momentum) * mean;
      stats.var = momentum * stats.var + (1.0 - momentum) * var;
    }
  } else {
    require(stats.mean.size() == d, "batch_norm: no running statistics");
    mean = stats.mean;
    var = stats.var;
  }
  Mat invstd = (var.array() + eps).rsqrt().matrix();
  Mat xhat = ((X.rowwise() - mean.row(0)).array().rowwise() * invstd.row(0).array()).matrix();
  n.value = ((xhat.array().rowwise() * nodes_[gamma].value.row(0).array()).rowwise() +
             nodes_[beta].value.row(0).array())
                .matrix();
  n.aux = std::move(xhat);
  n.aux2 = std::move(invstd);
  return push(std::move(n));
}

int Tape::mul_mask(int a, Mat mask) {
  const Mat& A = nodes_[a].value;
  require(mask.rows() == A.rows() && mask.cols() == A.cols(), "mul_mask: shape mismatch");
  Node n;
  n.op = Op::MulMask;
  n.a = a;
  n.aux = std::move(mask);
  n.value = A.cwiseProduct(n.aux);
  return push(std::move(n));
}

int Tape::dropout(int a, double p, Rng& rng, bool train) {
  if (!train || p <= 0.0) return a;
  require(p < 1.0, "dropout: p must be < 1");
  const Mat& A = nodes_[a].value;
  const double keep = 1.0 - p;
  Mat mask(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      mask(i, j) = rng.uniform() < p ? 0.0 : 1.0 / keep;
  return mul_mask(a, std::move(mask));
}

int Tape::mul_row(int a, int row_vec) {
  const Mat& A = nodes_[a].value;
  const Mat& R = nodes_[row_vec].value;
  require(R.rows() == 1 && R.cols() == A.cols(), "mul_row: row vector shape mismatch");
  Node n;
  n.op = Op::MulRow;
  n.a = a;
  n.b = row_vec;
  n.value = (A.array().rowwise() * R.row(0).array()).matrix();
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  require(nodes_[a].value.rows() == nodes_[b].value.rows() &&
              nodes_[a].value.cols() == nodes_[b].value.cols(),
          "add: shape mismatch");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value + nodes_[b].value;
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  require(nodes_[a].value.rows() == nodes_[b].value.rows() &&
              nodes_[a].value.cols() == nodes_[b].value.cols(),
          "sub: shape mismatch");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value - nodes_[b].value;
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  require(nodes_[a].value.rows() == nodes_[b].value.rows() &&
              nodes_[a].value.cols() == nodes_[b].value.cols(),
          "mul: shape mismatch");
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value.cwiseProduct(nodes_[b].value);
  return push(std::move(n));
}

int Tape::scale(int a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.c = c;
  n.value = c * nodes_[a].value;
  return push(std::move(n));
}

int Tape::add_scalar(int a, double c) {
  Node n;
  n.op = Op::AddScalar;
  n.a = a;
  n.c = c;
  n.value = (nodes_[a].value.array() + c).matrix();
  return push(std::move(n));
}

int Tape::log_op(int a) {
  Node n;
  n.op = Op::Log;
  n.a = a;
  n.value = nodes_[a].value.array().log().matrix();
  return push(std::move(n));
}

int Tape::exp_op(int a) {
  Node n;
  n.op = Op::Exp;
  n.a = a;
  n.value = nodes_[a].value.array().exp().matrix();
  return push(std::move(n));
}

int Tape::sqrt_op(int a) {
  Node n;
  n.op = Op::Sqrt;
  n.a = a;
  n.value = nodes_[a].value.array().sqrt().matrix();
  return push(std::move(n));
}

int Tape::square(int a) {
  Node n;
  n.op = Op::Square;
  n.a = a;
  n.value = nodes_[a].value.array().square().matrix();
  return push(std::move(n));
}

int Tape::softmax(int a) {
  Node n;
  n.op = Op::Softmax;
  n.a = a;
  n.value = rowwise_softmax(nodes_[a].value);
  return push(std::move(n));
}

int Tape::log_softmax(int a) {
  Node n;
  n.op = Op::LogSoftmax;
  n.a = a;
  n.value = rowwise_log_softmax(nodes_[a].value);
  n.aux = n.value.array().exp().matrix();  // softmax, reused in backward
  return push(std::move(n));
}

int Tape::row_sum(int a) {
  Node n;
  n.op = Op::RowSum;
  n.a = a;
  n.value = nodes_[a].value.rowwise().sum();
  return push(std::move(n));
}

int Tape::sum_all(int a) {
  Node n;
  n.op = Op::SumAll;
  n.a = a;
  n.value = Mat::Constant(1, 1, nodes_[a].value.sum());
  return push(std::move(n));
}

int Tape::mean_all(int a) {
  Node n;
  n.op = Op::MeanAll;
  n.a = a;
  n.value = Mat::Constant(1, 1, nodes_[a].value.mean());
  return push(std::move(n));
}

int Tape::gumbel_softmax(int logits, double tau, Rng& rng, int* scaled) {
  if (tau <= 0.0) throw std::invalid_argument("gumbel_softmax: tau must be > 0");
  const Mat& L = nodes_[logits].value;
  const int noise = input(rng.gumbel_matrix(L.rows(), L.cols()));
  const int shifted = add(logits, noise);
  const int s = scale(shifted, 1.0 / tau);
  if (scaled) *scaled = s;
  return softmax(s);
}

void Tape::backward(int output) {
  backward(output, Mat::Ones(nodes_[output].value.rows(), nodes_[output].value.cols()));
}

void Tape::backward(int output, const Mat& seed) {
  require(output >= 0 && output < static_cast<int>(nodes_.size()), "backward: bad node id");
  require(seed.rows() == nodes_[output].value.rows() &&
              seed.cols() == nodes_[output].value.cols(),
          "backward: seed shape mismatch");

  const int n = static_cast<int>(nodes_.size());
  std::vector<bool> needed(n, false);
  needed[output] = true;
  for (int i = output; i >= 0; --i) {
    if (!needed[i]) continue;
    const Node& nd = nodes_[i];
    if (nd.a >= 0) needed[nd.a] = true;
    if (nd.b >= 0) needed[nd.b] = true;
    if (nd.c_in >= 0) needed[nd.c_in] = true;
    for (int p : nd.ins) needed[p] = true;
  }

  adj_.assign(n, Mat());
  auto accum = [&](int id, const Mat& g) {
    if (adj_[id].size() == 0)
      adj_[id] = g;
    else
      adj_[id] += g;
  };
  adj_[output] = seed;

  for (int i = output; i >= 0; --i) {
    if (!needed[i] || adj_[i].size() == 0) continue;
    const Node& nd = nodes_[i];
    const Mat& G = adj_[i];
    switch (nd.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Mat& A = nodes_[nd.a].value;
        const Mat& B = nodes_[nd.b].value;
        if (!nd.ta && !nd.tb) {
          accum(nd.a, G * B.transpose());
          accum(nd.b, A.transpose() * G);
        } else if (!nd.ta && nd.tb) {
          accum(nd.a, G * B);
          accum(nd.b, G.transpose() * A);
        } else if (nd.ta && !nd.tb) {
          accum(nd.a, B * G.transpose());
          accum(nd.b, A * G);
        } else {
          accum(nd.a, B.transpose() * G.transpose());
          accum(nd.b, G.transpose() * A.transpose());
        }
        break;
      }
      case Op::AddBias:
        accum(nd.a, G);
        accum(nd.b, G.colwise().sum());
        break;
      case Op::ConcatCols: {
        Eigen::Index off = 0;
        for (int p : nd.ins) {
          const Eigen::Index w = nodes_[p].value.cols();
          accum(p, G.middleCols(off, w));
          off += w;
        }
        break;
      }
      case Op::SliceCols: {
        Mat g = Mat::Zero(nodes_[nd.a].value.rows(), nodes_[nd.a].value.cols());
        g.middleCols(nd.i0, nd.i1) = G;
        accum(nd.a, g);
        break;
      }
      case Op::PadCols:
        accum(nd.a, G.middleCols(nd.i0, nodes_[nd.a].value.cols()));
        break;
      case Op::Reshape:
        accum(nd.a, Eigen::Map<const Mat>(G.data(), nodes_[nd.a].value.rows(),
                                          nodes_[nd.a].value.cols()));
        break;
      case Op::LeakyRelu: {
        const double s = nd.c;
        accum(nd.a, G.cwiseProduct(nodes_[nd.a].value.unaryExpr(
                        [s](double x) { return x > 0.0 ? 1.0 : s; })));
        break;
      }
      case Op::Relu:
        accum(nd.a, G.cwiseProduct(nodes_[nd.a].value.unaryExpr(
                        [](double x) { return x > 0.0 ? 1.0 : 0.0; })));
        break;
      case Op::Tanh:
        accum(nd.a, G.cwiseProduct((1.0 - nd.value.array().square()).matrix()));
        break;
      case Op::Sigmoid:
        accum(nd.a, G.cwiseProduct((nd.value.array() * (1.0 - nd.value.array())).matrix()));
        break;
      case Op::Softplus: {
        const Mat& X = nodes_[nd.a].value;
        Mat sig = X.unaryExpr([](double x) {
          return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        });
        accum(nd.a, G.cwiseProduct(sig));
        break;
      }
      case Op::BatchNorm: {
        const Mat& xhat = nd.aux;
        const Mat& invstd = nd.aux2;
        const Mat& gamma = nodes_[nd.b].value;
        accum(nd.c_in, G.colwise().sum());
        accum(nd.b, G.cwiseProduct(xhat).colwise().sum());
        if (nd.i0 == 1) {
          Mat gmean = G.colwise().mean();
          Mat gxmean = G.cwiseProduct(xhat).colwise().mean();
          Mat dx = (((G.rowwise() - gmean.row(0)) -
                     (xhat.array().rowwise() * gxmean.row(0).array()).matrix())
                        .array()
                        .rowwise() *
                    (gamma.row(0).array() * invstd.row(0).array()))
                       .matrix();
          accum(nd.a, dx);
        } else {
          accum(nd.a, (G.array().rowwise() *
                       (gamma.row(0).array() * invstd.row(0).array()))
                          .matrix());
        }
        break;
      }
      case Op::MulMask:
        accum(nd.a, G.cwiseProduct(nd.aux));
        break;
      case Op::MulRow:
        accum(nd.a, (G.array().rowwise() * nodes_[nd.b].value.row(0).array()).matrix());
        accum(nd.b, G.cwiseProduct(nodes_[nd.a].value).colwise().sum());
        break;
      case Op::Add:
        accum(nd.a, G);
        accum(nd.b, G);
        break;
      case Op::Sub:
        accum(nd.a, G);
        accum(nd.b, -G);
        break;
      case Op::Mul:
        accum(nd.a, G.cwiseProduct(nodes_[nd.b].value));
        accum(nd.b, G.cwiseProduct(nodes_[nd.a].value));
        break;
      case Op::Scale:
        accum(nd.a, nd.c * G);
        break;
      case Op::AddScalar:
        accum(nd.a, G);
        break;
      case Op::Log:
        accum(nd.a, G.cwiseQuotient(nodes_[nd.a].value));
        break;
      case Op::Exp:
        accum(nd.a, G.cwiseProduct(nd.value));
        break;
      case Op::Sqrt:
        accum(nd.a, G.cwiseQuotient(2.0 * nd.value));
        break;
      case Op::Square:
        accum(nd.a, G.cwiseProduct(2.0 * nodes_[nd.a].value));
        break;
      case Op::Softmax: {
        const Mat& y = nd.value;
        Mat dot = G.cwiseProduct(y).rowwise().sum();  // [n, 1]
        Mat dx = y.cwiseProduct(G - dot * Mat::Ones(1, G.cols()));
        accum(nd.a, dx);
        break;
      }
      case Op::LogSoftmax: {
        const Mat& sm = nd.aux;
        Mat gsum = G.rowwise().sum();  // [n, 1]
        Mat dx = G - sm.cwiseProduct(gsum * Mat::Ones(1, G.cols()));
        accum(nd.a, dx);
        break;
      }
      case Op::RowSum:
        accum(nd.a, G * Mat::Ones(1, nodes_[nd.a].value.cols()));
        break;
      case Op::SumAll:
        accum(nd.a, Mat::Constant(nodes_[nd.a].value.rows(), nodes_[nd.a].value.cols(),
                                  G(0, 0)));
        break;
      case Op::MeanAll:
        accum(nd.a, Mat::Constant(nodes_[nd.a].value.rows(), nodes_[nd.a].value.cols(),
                                  G(0, 0) / static_cast<double>(nodes_[nd.a].value.size())));
        break;
    }
    if (nd.op == Op::Leaf && nd.var >= 0) vars_[nd.var]->grad += adj_[i];
  }
}

Mat Tape::grad_of(int id) const {
  if (id < 0 || id >= static_cast<int>(adj_.size()) || adj_[id].size() == 0)
    return Mat::Zero(nodes_[id].value.rows(), nodes_[id].value.cols());
  return adj_[id];
}

int Tape::grad_nodes(int output, int wrt) {
  require(output >= 0 && output < static_cast<int>(nodes_.size()), "grad_nodes: bad output");
  require(wrt >= 0 && wrt < static_cast<int>(nodes_.size()), "grad_nodes: bad wrt");

  const int n0 = output + 1;
  std::vector<bool> needed(n0, false);
  needed[output] = true;
  for (int i = output; i >= 0; --i) {
    if (!needed[i]) continue;
    const Node& nd = nodes_[i];
    if (nd.a >= 0 && nd.a < n0) needed[nd.a] = true;
    if (nd.b >= 0 && nd.b < n0) needed[nd.b] = true;
    if (nd.c_in >= 0) needed[nd.c_in] = true;
    for (int p : nd.ins) needed[p] = true;
  }

  std::vector<int> adj(n0, -1);
  auto accum = [&](int id, int g) { adj[id] = adj[id] < 0 ? g : add(adj[id], g); };
  adj[output] = input(Mat::Ones(nodes_[output].value.rows(), nodes_[output].value.cols()));

  for (int i = output; i >= 0; --i) {
    if (!needed[i] || adj[i] < 0) continue;
    if (i == wrt) continue;  // gradients do not flow through the target leaf
    // snapshot: builder calls below append nodes, invalidating references
    const Node nd = nodes_[i];
    const int G = adj[i];
    switch (nd.op) {
      case Op::Leaf:
        break;
      case Op::MatMul:
        if (!nd.ta && !nd.tb) {
          accum(nd.a, matmul(G, nd.b, false, true));
          accum(nd.b, matmul(nd.a, G, true, false));
        } else if (!nd.ta && nd.tb) {
          accum(nd.a, matmul(G, nd.b, false, false));
          accum(nd.b, matmul(G, nd.a, true, false));
        } else if (nd.ta && !nd.tb) {
          accum(nd.a, matmul(nd.b, G, false, true));
          accum(nd.b, matmul(nd.a, G, false, false));
        } else {
          accum(nd.a, matmul(nd.b, G, true, true));
          accum(nd.b, matmul(G, nd.a, true, true));
        }
        break;
      case Op::AddBias:
        accum(nd.a, G);
        // bias branch: gradient w.r.t. the input does not involve it
        break;
      case Op::ConcatCols: {
        int off = 0;
        for (int p : nd.ins) {
          const int w = static_cast<int>(nodes_[p].value.cols());
          accum(p, slice_cols(G, off, w));
          off += w;
        }
        break;
      }
      case Op::SliceCols:
        accum(nd.a, pad_cols(G, nd.i0, static_cast<int>(nodes_[nd.a].value.cols())));
        break;
      case Op::PadCols:
        accum(nd.a, slice_cols(G, nd.i0, static_cast<int>(nodes_[nd.a].value.cols())));
        break;
      case Op::Reshape:
        accum(nd.a, reshape(G, static_cast<int>(nodes_[nd.a].value.rows()),
                            static_cast<int>(nodes_[nd.a].value.cols())));
        break;
      case Op::LeakyRelu: {
        const double s = nd.c;
        Mat mask = nodes_[nd.a].value.unaryExpr([s](double x) { return x > 0.0 ? 1.0 : s; });
        accum(nd.a, mul_mask(G, std::move(mask)));
        break;
      }
      case Op::Relu: {
        Mat mask = nodes_[nd.a].value.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
        accum(nd.a, mul_mask(G, std::move(mask)));
        break;
      }
      case Op::MulMask:
        accum(nd.a, mul_mask(G, nd.aux));
        break;
      case Op::Add:
        accum(nd.a, G);
        accum(nd.b, G);
        break;
      case Op::Sub:
        accum(nd.a, G);
        accum(nd.b, scale(G, -1.0));
        break;
      case Op::Mul:
        accum(nd.a, mul(G, nd.b));
        accum(nd.b, mul(G, nd.a));
        break;
      case Op::Scale:
        accum(nd.a, scale(G, nd.c));
        break;
      case Op::AddScalar:
        accum(nd.a, G);
        break;
      case Op::RowSum:
        accum(nd.a, matmul(G, input(Mat::Ones(1, nodes_[nd.a].value.cols()))));
        break;
      case Op::SumAll: {
        const int col = matmul(input(Mat::Ones(nodes_[nd.a].value.rows(), 1)), G);
        accum(nd.a, matmul(col, input(Mat::Ones(1, nodes_[nd.a].value.cols()))));
        break;
      }
      case Op::MeanAll: {
        const int col = matmul(input(Mat::Ones(nodes_[nd.a].value.rows(), 1)), G);
        const int full = matmul(col, input(Mat::Ones(1, nodes_[nd.a].value.cols())));
        accum(nd.a, scale(full, 1.0 / static_cast<double>(nodes_[nd.a].value.size())));
        break;
      }
      default:
        throw numeric_error("grad_nodes: op not supported for second-order differentiation");
    }
  }

  if (adj[wrt] < 0)
    return input(Mat::Zero(nodes_[wrt].value.rows(), nodes_[wrt].value.cols()));
  return adj[wrt];
}

Adam::Adam(std::vector<Var*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Var* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = *params_[i];
    if (!p.grad.allFinite()) throw numeric_error("adam: non-finite gradient for " + p.name);
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    p.value -= cfg_.lr * mhat.cwiseQuotient((vhat.array().sqrt() + cfg_.eps).matrix());
  }
}

void Adam::zero_grad() {
  for (Var* p : params_) p->zero_grad();
}

}  // namespace tabsyn::ad
