/*
 * Copyright 2026 The Modlearn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <vector>

#include "modlearn/graph.hpp"

namespace modlearn {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

Tensor elementwise_binary(Op op, const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.rank() == 0 && b.rank() != 0;
  const bool b_scalar = b.rank() == 0 && a.rank() != 0;
  const Tensor& lead = a_scalar ? b : a;
  Tensor out(lead.shape());
  const std::size_t n = out.size();
  auto av = [&](std::size_t i) { return a_scalar ? a[0] : a[i]; };
  auto bv = [&](std::size_t i) { return b_scalar ? b[0] : b[i]; };
  switch (op) {
    case Op::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = av(i) + bv(i);
      break;
    case Op::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av(i) - bv(i);
      break;
    case Op::kMul:
    case Op::kDropoutMaskApply:
      for (std::size_t i = 0; i < n; ++i) out[i] = av(i) * bv(i);
      break;
    case Op::kDiv:
      for (std::size_t i = 0; i < n; ++i) out[i] = av(i) / bv(i);
      break;
    default:
      throw ValueError("not an elementwise binary op");
  }
  return out;
}

Tensor matmul_kernel(const Tensor& a, const Tensor& b) {
  const std::size_t n = static_cast<std::size_t>(a.extent(0));
  const std::size_t k = static_cast<std::size_t>(a.extent(1));
  const std::size_t m = static_cast<std::size_t>(b.extent(1));
  Tensor out(Shape{a.extent(0), b.extent(1)});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * k;
    double* crow = pc + i * m;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      if (aik == 0.0) continue;
      const double* brow = pb + kk * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& x, bool log_form) {
  const std::size_t n = static_cast<std::size_t>(x.extent(0));
  const std::size_t k = static_cast<std::size_t>(x.extent(1));
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -HUGE_VAL;
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, x.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(x.at(i, j) - mx);
    if (log_form) {
      const double lz = std::log(z);
      for (std::size_t j = 0; j < k; ++j) out.at(i, j) = x.at(i, j) - mx - lz;
    } else {
      for (std::size_t j = 0; j < k; ++j) out.at(i, j) = std::exp(x.at(i, j) - mx) / z;
    }
  }
  return out;
}

Tensor max_pool_forward(const Tensor& x, long long ph, long long pw,
                        long long sh, long long sw) {
  const auto b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  const long long oh = (h - ph) / sh + 1;
  const long long ow = (w - pw) / sw + 1;
  Tensor out(Shape{b, c, oh, ow});
  for (long long bi = 0; bi < b; ++bi)
    for (long long ci = 0; ci < c; ++ci)
      for (long long i = 0; i < oh; ++i)
        for (long long j = 0; j < ow; ++j) {
          double m = -HUGE_VAL;
          for (long long di = 0; di < ph; ++di)
            for (long long dj = 0; dj < pw; ++dj)
              m = std::max(m, x.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                                    static_cast<std::size_t>(i * sh + di),
                                    static_cast<std::size_t>(j * sw + dj)));
          out.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                  static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m;
        }
  return out;
}

Tensor max_pool_backward(const Tensor& g, const Tensor& x, long long ph,
                         long long pw, long long sh, long long sw) {
  const auto b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  (void)h;
  (void)w;
  const auto oh = g.extent(2), ow = g.extent(3);
  Tensor out(x.shape());
  for (long long bi = 0; bi < b; ++bi)
    for (long long ci = 0; ci < c; ++ci)
      for (long long i = 0; i < oh; ++i)
        for (long long j = 0; j < ow; ++j) {
          // first maximum in scan order wins
          double m = -HUGE_VAL;
          long long mi = 0, mj = 0;
          for (long long di = 0; di < ph; ++di)
            for (long long dj = 0; dj < pw; ++dj) {
              const double v = x.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                                     static_cast<std::size_t>(i * sh + di),
                                     static_cast<std::size_t>(j * sw + dj));
              if (v > m) {
                m = v;
                mi = i * sh + di;
                mj = j * sw + dj;
              }
            }
          out.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                  static_cast<std::size_t>(mi), static_cast<std::size_t>(mj)) +=
              g.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                    static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
  return out;
}

std::size_t row_argmax(const Tensor& t, std::size_t i) {
  const std::size_t k = static_cast<std::size_t>(t.extent(1));
  std::size_t best = 0;
  double bv = t.at(i, 0);
  for (std::size_t j = 1; j < k; ++j)
    if (t.at(i, j) > bv) {
      bv = t.at(i, j);
      best = j;
    }
  return best;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels,
                      long long stride, long long pad) {
  if (input.rank() != 4 || kernels.rank() != 4)
    throw ShapeError("conv2d_forward expects rank-4 input and kernels");
  if (input.extent(1) != kernels.extent(1))
    throw ShapeError("conv2d_forward channel mismatch");
  if (stride < 1) throw ValueError("conv2d_forward: stride must be >= 1");
  const auto b = input.extent(0), c = input.extent(1), h = input.extent(2),
             w = input.extent(3);
  const auto o = kernels.extent(0), kh = kernels.extent(2), kw = kernels.extent(3);
  const long long oh_num = h + 2 * pad - kh;
  const long long ow_num = w + 2 * pad - kw;
  if (oh_num < 0 || ow_num < 0)
    throw ShapeError("conv2d_forward: kernel larger than padded input");
  const long long oh = oh_num / stride + 1, ow = ow_num / stride + 1;
  Tensor out(Shape{b, o, oh, ow});
  for (long long bi = 0; bi < b; ++bi)
    for (long long oi = 0; oi < o; ++oi)
      for (long long i = 0; i < oh; ++i)
        for (long long j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (long long ci = 0; ci < c; ++ci)
            for (long long di = 0; di < kh; ++di) {
              const long long r = i * stride - pad + di;
              if (r < 0 || r >= h) continue;
              for (long long dj = 0; dj < kw; ++dj) {
                const long long s = j * stride - pad + dj;
                if (s < 0 || s >= w) continue;
                acc += input.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                                 static_cast<std::size_t>(r), static_cast<std::size_t>(s)) *
                       kernels.at4(static_cast<std::size_t>(oi), static_cast<std::size_t>(ci),
                                   static_cast<std::size_t>(di), static_cast<std::size_t>(dj));
              }
            }
          out.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(oi),
                  static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
        }
  return out;
}

Tensor conv2d_input_backward(const Tensor& out_grad, const Tensor& kernels,
                             long long in_h, long long in_w, long long stride,
                             long long pad) {
  const auto b = out_grad.extent(0), o = out_grad.extent(1), oh = out_grad.extent(2),
             ow = out_grad.extent(3);
  const auto c = kernels.extent(1), kh = kernels.extent(2), kw = kernels.extent(3);
  Tensor out(Shape{b, c, in_h, in_w});
  for (long long bi = 0; bi < b; ++bi)
    for (long long oi = 0; oi < o; ++oi)
      for (long long i = 0; i < oh; ++i)
        for (long long j = 0; j < ow; ++j) {
          const double gv = out_grad.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(oi),
                                         static_cast<std::size_t>(i), static_cast<std::size_t>(j));
          if (gv == 0.0) continue;
          for (long long ci = 0; ci < c; ++ci)
            for (long long di = 0; di < kh; ++di) {
              const long long r = i * stride - pad + di;
              if (r < 0 || r >= in_h) continue;
              for (long long dj = 0; dj < kw; ++dj) {
                const long long s = j * stride - pad + dj;
                if (s < 0 || s >= in_w) continue;
                out.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                        static_cast<std::size_t>(r), static_cast<std::size_t>(s)) +=
                    gv * kernels.at4(static_cast<std::size_t>(oi), static_cast<std::size_t>(ci),
                                     static_cast<std::size_t>(di), static_cast<std::size_t>(dj));
              }
            }
        }
  return out;
}

Tensor conv2d_kernel_backward(const Tensor& out_grad, const Tensor& input,
                              long long kh, long long kw, long long stride,
                              long long pad) {
  const auto b = out_grad.extent(0), o = out_grad.extent(1), oh = out_grad.extent(2),
             ow = out_grad.extent(3);
  const auto c = input.extent(1), h = input.extent(2), w = input.extent(3);
  Tensor out(Shape{o, c, kh, kw});
  for (long long bi = 0; bi < b; ++bi)
    for (long long oi = 0; oi < o; ++oi)
      for (long long i = 0; i < oh; ++i)
        for (long long j = 0; j < ow; ++j) {
          const double gv = out_grad.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(oi),
                                         static_cast<std::size_t>(i), static_cast<std::size_t>(j));
          if (gv == 0.0) continue;
          for (long long ci = 0; ci < c; ++ci)
            for (long long di = 0; di < kh; ++di) {
              const long long r = i * stride - pad + di;
              if (r < 0 || r >= h) continue;
              for (long long dj = 0; dj < kw; ++dj) {
                const long long s = j * stride - pad + dj;
                if (s < 0 || s >= w) continue;
                out.at4(static_cast<std::size_t>(oi), static_cast<std::size_t>(ci),
                        static_cast<std::size_t>(di), static_cast<std::size_t>(dj)) +=
                    gv * input.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                                   static_cast<std::size_t>(r), static_cast<std::size_t>(s));
              }
            }
        }
  return out;
}

class Evaluator {
 public:
  Evaluator(const Graph& g, const Bindings& b) : g_(g), b_(b) {}

  std::vector<Tensor> run(std::span<const NodeRef> outputs) {
    const std::size_t n = g_.nodes_.size();
    std::vector<bool> needed(n, false);
    std::vector<int> stack;
    for (NodeRef r : outputs) {
      if (r.graph != &g_) throw ValueError("output node from another graph");
      if (r.id < 0 || static_cast<std::size_t>(r.id) >= n)
        throw ValueError("output node out of range");
      stack.push_back(r.id);
    }
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      if (needed[static_cast<std::size_t>(id)]) continue;
      needed[static_cast<std::size_t>(id)] = true;
      for (int p : g_.nodes_[static_cast<std::size_t>(id)].parents) stack.push_back(p);
    }
    values_.resize(n);
    for (std::size_t id = 0; id < n; ++id)
      if (needed[id]) values_[id] = forward(static_cast<int>(id));
    std::vector<Tensor> out;
    out.reserve(outputs.size());
    for (NodeRef r : outputs) out.push_back(values_[static_cast<std::size_t>(r.id)]);
    return out;
  }

 private:
  const Tensor& val(int id) const { return values_[static_cast<std::size_t>(id)]; }

  Tensor forward(int id) {
    const ExprNode& n = g_.nodes_[static_cast<std::size_t>(id)];
    switch (n.op) {
      case Op::kVariable: {
        const Tensor* bound = b_.find(id);
        if (!bound) throw EvalError("unbound variable '" + n.name + "'");
        const Shape& declared = n.shape;
        const Shape& got = bound->shape();
        if (declared.size() != got.size())
          throw EvalError("variable '" + n.name + "' declared " +
                          shape_to_string(declared) + " but bound to " +
                          shape_to_string(got));
        for (std::size_t i = 0; i < declared.size(); ++i)
          if (declared[i] != kWild && declared[i] != got[i])
            throw EvalError("variable '" + n.name + "' declared " +
                            shape_to_string(declared) + " but bound to " +
                            shape_to_string(got));
        return *bound;
      }
      case Op::kConstant:
        return n.payload;
      default:
        break;
    }

    std::vector<Shape> pshapes;
    pshapes.reserve(n.parents.size());
    for (int p : n.parents) pshapes.push_back(val(p).shape());
    const Shape out_shape = detail::infer_shape(n.op, pshapes, n.iattrs);

    auto p0 = [&]() -> const Tensor& { return val(n.parents[0]); };
    auto p1 = [&]() -> const Tensor& { return val(n.parents[1]); };

    switch (n.op) {
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv:
      case Op::kDropoutMaskApply:
        return elementwise_binary(n.op, p0(), p1());
      case Op::kMatmul:
        return matmul_kernel(p0(), p1());
      case Op::kNeg: {
        Tensor out = p0();
        for (double& v : out.data()) v = -v;
        return out;
      }
      case Op::kExp: {
        Tensor out = p0();
        for (double& v : out.data()) v = std::exp(v);
        return out;
      }
      case Op::kLog: {
        Tensor out = p0();
        for (double& v : out.data()) v = std::log(v);
        return out;
      }
      case Op::kSqrt: {
        Tensor out = p0();
        for (double& v : out.data()) v = std::sqrt(v);
        return out;
      }
      case Op::kSquare: {
        Tensor out = p0();
        for (double& v : out.data()) v = v * v;
        return out;
      }
      case Op::kSigmoid: {
        Tensor out = p0();
        for (double& v : out.data()) v = stable_sigmoid(v);
        return out;
      }
      case Op::kTanh: {
        Tensor out = p0();
        for (double& v : out.data()) v = std::tanh(v);
        return out;
      }
      case Op::kRelu: {
        Tensor out = p0();
        for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
        return out;
      }
      case Op::kSoftplus: {
        Tensor out = p0();
        for (double& v : out.data()) v = stable_softplus(v);
        return out;
      }
      case Op::kGtZeroMask: {
        Tensor out = p0();
        for (double& v : out.data()) v = v > 0.0 ? 1.0 : 0.0;
        return out;
      }
      case Op::kSoftmax:
        return softmax_rows(p0(), false);
      case Op::kLogSoftmax:
        return softmax_rows(p0(), true);
      case Op::kSumAll: {
        double acc = 0.0;
        for (double v : p0().data()) acc += v;
        return Tensor::scalar(acc);
      }
      case Op::kMeanAll: {
        double acc = 0.0;
        for (double v : p0().data()) acc += v;
        return Tensor::scalar(acc / static_cast<double>(p0().size()));
      }
      case Op::kNumelLike:
        return Tensor::scalar(static_cast<double>(p0().size()));
      case Op::kExtent:
        return Tensor::scalar(
            static_cast<double>(p0().extent(static_cast<std::size_t>(n.iattrs[0]))));
      case Op::kSumAxis:
      case Op::kMeanAxis: {
        const Tensor& x = p0();
        const std::size_t rows = static_cast<std::size_t>(x.extent(0));
        const std::size_t cols = static_cast<std::size_t>(x.extent(1));
        const bool over_rows = n.iattrs[0] == 0;
        Tensor out(out_shape);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            out[over_rows ? j : i] += x.at(i, j);
        if (n.op == Op::kMeanAxis) {
          const double denom = static_cast<double>(over_rows ? rows : cols);
          for (double& v : out.data()) v /= denom;
        }
        return out;
      }
      case Op::kReshape:
      case Op::kReshapeLike:
        return p0().reshaped(out_shape);
      case Op::kTranspose: {
        std::vector<std::size_t> perm(n.iattrs.size());
        for (std::size_t i = 0; i < perm.size(); ++i)
          perm[i] = static_cast<std::size_t>(n.iattrs[i]);
        return p0().permuted(perm);
      }
      case Op::kBroadcastRow: {
        const Tensor& row = p0();
        Tensor out(out_shape);
        const std::size_t rows = static_cast<std::size_t>(out.extent(0));
        const std::size_t cols = static_cast<std::size_t>(out.extent(1));
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = row[j];
        return out;
      }
      case Op::kBroadcastCol: {
        const Tensor& col = p0();
        Tensor out(out_shape);
        const std::size_t rows = static_cast<std::size_t>(out.extent(0));
        const std::size_t cols = static_cast<std::size_t>(out.extent(1));
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = col[i];
        return out;
      }
      case Op::kBroadcastLike:
        return Tensor::full(out_shape, p0()[0]);
      case Op::kConcat: {
        Tensor out(out_shape);
        const auto strides = row_major_strides(out_shape);
        const std::size_t axis = static_cast<std::size_t>(n.iattrs[0]);
        // outer = product of extents before axis, inner = product after
        std::size_t outer = 1, inner = 1;
        for (std::size_t i = 0; i < axis; ++i)
          outer *= static_cast<std::size_t>(out_shape[i]);
        for (std::size_t i = axis + 1; i < out_shape.size(); ++i)
          inner *= static_cast<std::size_t>(out_shape[i]);
        std::size_t offset = 0;
        for (int pid : n.parents) {
          const Tensor& part = val(pid);
          const std::size_t pa = static_cast<std::size_t>(part.shape()[axis]);
          for (std::size_t ou = 0; ou < outer; ++ou)
            for (std::size_t a = 0; a < pa; ++a)
              for (std::size_t in = 0; in < inner; ++in)
                out.data()[(ou * static_cast<std::size_t>(out_shape[axis]) + offset + a) * inner + in] =
                    part.data()[(ou * pa + a) * inner + in];
          offset += pa;
        }
        (void)strides;
        return out;
      }
      case Op::kSliceAxis: {
        const Tensor& x = p0();
        const std::size_t axis = static_cast<std::size_t>(n.iattrs[0]);
        const std::size_t start = static_cast<std::size_t>(n.iattrs[1]);
        const std::size_t len = static_cast<std::size_t>(n.iattrs[2]);
        const Shape& xs = x.shape();
        std::size_t outer = 1, inner = 1;
        for (std::size_t i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(xs[i]);
        for (std::size_t i = axis + 1; i < xs.size(); ++i)
          inner *= static_cast<std::size_t>(xs[i]);
        Tensor out(out_shape);
        const std::size_t xa = static_cast<std::size_t>(xs[axis]);
        for (std::size_t ou = 0; ou < outer; ++ou)
          for (std::size_t a = 0; a < len; ++a)
            for (std::size_t in = 0; in < inner; ++in)
              out.data()[(ou * len + a) * inner + in] =
                  x.data()[(ou * xa + start + a) * inner + in];
        return out;
      }
      case Op::kConv2d:
        return conv2d_forward(p0(), p1(), n.iattrs[0], n.iattrs[1]);
      case Op::kConv2dInputGrad:
        return conv2d_input_backward(p0(), p1(), n.iattrs[0], n.iattrs[1],
                                     n.iattrs[2], n.iattrs[3]);
      case Op::kConv2dKernelGrad:
        return conv2d_kernel_backward(p0(), p1(), n.iattrs[0], n.iattrs[1],
                                      n.iattrs[2], n.iattrs[3]);
      case Op::kMaxPool2d:
        return max_pool_forward(p0(), n.iattrs[0], n.iattrs[1], n.iattrs[2],
                                n.iattrs[3]);
      case Op::kMaxPool2dGrad:
        return max_pool_backward(p0(), p1(), n.iattrs[0], n.iattrs[1], n.iattrs[2],
                                 n.iattrs[3]);
      case Op::kRowwiseArgmaxNeq: {
        const Tensor& a = p0();
        const Tensor& b = p1();
        const std::size_t rows = static_cast<std::size_t>(a.extent(0));
        Tensor out(out_shape);
        for (std::size_t i = 0; i < rows; ++i)
          out[i] = row_argmax(a, i) != row_argmax(b, i) ? 1.0 : 0.0;
        return out;
      }
      case Op::kChannelBiasAdd: {
        Tensor out = p0();
        const Tensor& bias = p1();
        const auto b = out.extent(0), c = out.extent(1), h = out.extent(2),
                   w = out.extent(3);
        for (long long bi = 0; bi < b; ++bi)
          for (long long ci = 0; ci < c; ++ci)
            for (long long i = 0; i < h; ++i)
              for (long long j = 0; j < w; ++j)
                out.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                        static_cast<std::size_t>(i), static_cast<std::size_t>(j)) +=
                    bias[static_cast<std::size_t>(ci)];
        return out;
      }
      case Op::kSumPerChannel: {
        const Tensor& x = p0();
        const auto b = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
        Tensor out(out_shape);
        for (long long bi = 0; bi < b; ++bi)
          for (long long ci = 0; ci < c; ++ci)
            for (long long i = 0; i < h; ++i)
              for (long long j = 0; j < w; ++j)
                out[static_cast<std::size_t>(ci)] +=
                    x.at4(static_cast<std::size_t>(bi), static_cast<std::size_t>(ci),
                          static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        return out;
      }
      case Op::kVariable:
      case Op::kConstant:
        break;
    }
    throw ValueError("unhandled op in evaluator");
  }

  const Graph& g_;
  const Bindings& b_;
  std::vector<Tensor> values_;
};

std::vector<Tensor> Graph::eval(std::span<const NodeRef> outputs,
                                const Bindings& bindings) const {
  Evaluator ev(*this, bindings);
  return ev.run(outputs);
}

Tensor Graph::eval_one(NodeRef output, const Bindings& bindings) const {
  const NodeRef outs[] = {output};
  return eval(outs, bindings)[0];
}

}  // namespace modlearn
