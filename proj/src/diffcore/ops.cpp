/*
 * Copyright 2026 The ma3srn Authors
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

#include "diffcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffcore/errors.hpp"

namespace ma3srn::ops {
namespace {

[[noreturn]] void shape_fail(std::string_view op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void same_graph(std::string_view op, const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) shape_fail(op, "operands belong to different graphs");
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(std::string_view op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) shape_fail(op, "axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Index map from a broadcast result back into the smaller operand.
class Broadcast {
 public:
  enum class Kind { same, tile, column, general };

  static bool fits(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    const std::size_t off = big.size() - small.size();
    for (std::size_t i = 0; i < small.size(); ++i)
      if (small[i] != big[off + i] && small[i] != 1) return false;
    return true;
  }

  Broadcast(const Shape& small, const Shape& big) : size_(shape_size(big)), small_size_(shape_size(small)) {
    if (small == big) {
      kind_ = Kind::same;
      return;
    }
    const std::size_t off = big.size() - small.size();
    bool suffix = true;
    for (std::size_t i = 0; i < small.size(); ++i)
      if (small[i] != big[off + i]) suffix = false;
    // Leading ones in `small` do not break the tiling pattern.
    if (!suffix) {
      std::size_t lead = 0;
      while (lead < small.size() && small[lead] == 1) ++lead;
      suffix = true;
      for (std::size_t i = lead; i < small.size(); ++i)
        if (small[i] != big[off + i]) suffix = false;
    }
    if (suffix) {
      kind_ = Kind::tile;
      return;
    }
    if (!big.empty() && small.size() == big.size() && small.back() == 1 &&
        std::equal(small.begin(), small.end() - 1, big.begin())) {
      kind_ = Kind::column;
      cols_ = big.back();
      return;
    }
    kind_ = Kind::general;
    std::vector<std::size_t> stride(big.size(), 0);
    std::size_t s = 1;
    for (std::size_t i = small.size(); i-- > 0;) {
      stride[off + i] = small[i] == 1 ? 0 : s;
      s *= small[i];
    }
    map_.resize(size_);
    std::vector<std::size_t> idx(big.size(), 0);
    for (std::size_t flat = 0; flat < size_; ++flat) {
      std::size_t src = 0;
      for (std::size_t d = 0; d < big.size(); ++d) src += idx[d] * stride[d];
      map_[flat] = src;
      for (std::size_t d = big.size(); d-- > 0;) {
        if (++idx[d] < big[d]) break;
        idx[d] = 0;
      }
    }
  }

  std::size_t operator()(std::size_t flat) const {
    switch (kind_) {
      case Kind::same:
        return flat;
      case Kind::tile:
        return flat % small_size_;
      case Kind::column:
        return flat / cols_;
      case Kind::general:
        return map_[flat];
    }
    return flat;
  }

  std::size_t size() const { return size_; }

 private:
  Kind kind_ = Kind::same;
  std::size_t size_ = 0;
  std::size_t small_size_ = 1;
  std::size_t cols_ = 1;
  std::vector<std::size_t> map_;
};

// Elementwise binary op with broadcasting in either direction.
// fwd(x, y) -> z; dx(x, y, z) and dy(x, y, z) are local partials.
template <class Fwd, class Dx, class Dy>
Var binary(std::string_view op, Var a, Var b, Fwd fwd, Dx dx, Dy dy) {
  same_graph(op, a, b);
  Graph& g = a.graph();
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool b_small = true;
  if (Broadcast::fits(sb, sa)) {
    b_small = true;
  } else if (Broadcast::fits(sa, sb)) {
    b_small = false;
  } else {
    shape_fail(op, "cannot broadcast " + shape_string(sa) + " with " + shape_string(sb));
  }
  const Shape out_shape = b_small ? sa : sb;
  auto map_a = std::make_shared<Broadcast>(sa, out_shape);
  auto map_b = std::make_shared<Broadcast>(sb, out_shape);
  Tensor out(out_shape);
  const auto& va = a.value();
  const auto& vb = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(va[(*map_a)(i)], vb[(*map_b)(i)]);
  return g.record(op, std::move(out), {a.id(), b.id()}, [map_a, map_b, dx, dy](Graph& g, const Graph::Node& n) {
    const std::size_t ia = n.inputs[0], ib = n.inputs[1];
    const auto& va = g.value(ia);
    const auto& vb = g.value(ib);
    const auto& z = n.value;
    const auto& gz = n.grad;
    if (g.requires_grad(ia)) {
      auto& ga = g.grad(ia);
      for (std::size_t i = 0; i < gz.size(); ++i) {
        const std::size_t p = (*map_a)(i), q = (*map_b)(i);
        ga[p] += gz[i] * dx(va[p], vb[q], z[i]);
      }
    }
    if (g.requires_grad(ib)) {
      auto& gb = g.grad(ib);
      for (std::size_t i = 0; i < gz.size(); ++i) {
        const std::size_t p = (*map_a)(i), q = (*map_b)(i);
        gb[q] += gz[i] * dy(va[p], vb[q], z[i]);
      }
    }
  });
}

// Elementwise unary op; d(x, z) is the local derivative.
template <class Fwd, class D>
Var unary(std::string_view op, Var a, Fwd fwd, D d) {
  Tensor out(a.shape());
  const auto& va = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(va[i]);
  return a.graph().record(op, std::move(out), {a.id()}, [d](Graph& g, const Graph::Node& n) {
    const std::size_t ia = n.inputs[0];
    const auto& va = g.value(ia);
    auto& ga = g.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * d(va[i], n.value[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      "div", a, b,
      [](double x, double y) {
        if (y == 0.0) throw DomainError("div: division by zero");
        return x / y;
      },
      [](double, double y, double) { return 1.0 / y; }, [](double, double y, double z) { return -z / y; });
}

Var scale(Var a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var shift(Var a, double offset) {
  return unary(
      "shift", a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var matmul(Var a, Var b) {
  same_graph("matmul", a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Graph& g = a.graph();
  if (sa.size() == 3 && sb.size() == 3) {
    const std::size_t batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
    if (sb[0] != batch || sb[1] != k)
      shape_fail("matmul", "batched operands " + shape_string(sa) + " and " + shape_string(sb) + " do not conform");
    Tensor out({batch, m, n});
    const double* pa = a.value().values().data();
    const double* pb = b.value().values().data();
    double* po = out.values().data();
    for (std::size_t i = 0; i < batch; ++i) {
      ConstMatrixMap ma(pa + i * m * k, m, k), mb(pb + i * k * n, k, n);
      MatrixMap(po + i * m * n, m, n).noalias() = ma * mb;
    }
    return g.record("matmul", std::move(out), {a.id(), b.id()}, [batch, m, k, n](Graph& g, const Graph::Node& nd) {
      const std::size_t ia = nd.inputs[0], ib = nd.inputs[1];
      const double* pa = g.value(ia).values().data();
      const double* pb = g.value(ib).values().data();
      const double* pg = nd.grad.values().data();
      double* ga = g.requires_grad(ia) ? g.grad(ia).values().data() : nullptr;
      double* gb = g.requires_grad(ib) ? g.grad(ib).values().data() : nullptr;
      for (std::size_t i = 0; i < batch; ++i) {
        ConstMatrixMap mg(pg + i * m * n, m, n);
        if (ga) MatrixMap(ga + i * m * k, m, k).noalias() += mg * ConstMatrixMap(pb + i * k * n, k, n).transpose();
        if (gb) MatrixMap(gb + i * k * n, k, n).noalias() += ConstMatrixMap(pa + i * m * k, m, k).transpose() * mg;
      }
    });
  }
  if (sa.size() < 2 || sb.size() != 2 || sa.back() != sb[0])
    shape_fail("matmul", "operands " + shape_string(sa) + " and " + shape_string(sb) + " do not conform");
  Shape out_shape = sa;
  out_shape.back() = sb[1];
  Tensor out(out_shape);
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return g.record("matmul", std::move(out), {a.id(), b.id()}, [](Graph& g, const Graph::Node& n) {
    const std::size_t ia = n.inputs[0], ib = n.inputs[1];
    if (g.requires_grad(ia)) g.grad(ia).matrix().noalias() += n.grad.matrix() * g.value(ib).matrix().transpose();
    if (g.requires_grad(ib)) g.grad(ib).matrix().noalias() += g.value(ia).matrix().transpose() * n.grad.matrix();
  });
}

Var transpose(Var a) {
  const Shape& s = a.shape();
  if (s.size() < 2) shape_fail("transpose", "needs rank >= 2, got " + shape_string(s));
  const std::size_t r = s[s.size() - 2], c = s.back();
  const std::size_t batch = a.value().size() / (r * c);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape.back());
  Tensor out(out_shape);
  for (std::size_t b = 0; b < batch; ++b)
    MatrixMap(out.values().data() + b * r * c, c, r) =
        ConstMatrixMap(a.value().values().data() + b * r * c, r, c).transpose();
  return a.graph().record("transpose", std::move(out), {a.id()}, [batch, r, c](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    for (std::size_t b = 0; b < batch; ++b)
      MatrixMap(ga.values().data() + b * r * c, r, c) +=
          ConstMatrixMap(n.grad.values().data() + b * r * c, c, r).transpose();
  });
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size())
    shape_fail("reshape", "cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  return a.graph().record("reshape", a.value().reshaped(std::move(shape)), {a.id()},
                          [](Graph& g, const Graph::Node& n) {
                            auto& ga = g.grad(n.inputs[0]);
                            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
                          });
}

Var expand(Var a, std::size_t axis, std::size_t count) {
  const Shape& s = a.shape();
  if (axis > s.size()) shape_fail("expand", "axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  if (count == 0) shape_fail("expand", "count must be positive");
  Shape out_shape = s;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis; i < s.size(); ++i) inner *= s[i];
  Tensor out(out_shape);
  const auto& va = a.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < count; ++c)
      std::copy_n(va.values().begin() + o * inner, inner, out.values().begin() + (o * count + c) * inner);
  return a.graph().record("expand", std::move(out), {a.id()}, [outer, inner, count](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t c = 0; c < count; ++c)
        for (std::size_t i = 0; i < inner; ++i) ga[o * inner + i] += n.grad[(o * count + c) * inner + i];
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no operands");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) shape_fail("concat", "axis " + std::to_string(axis) + " out of range for " + shape_string(s0));
  Graph& g = parts[0].graph();
  std::vector<std::size_t> extents, ids;
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    same_graph("concat", parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != s0[i]) ok = false;
    if (!ok) shape_fail("concat", "operand " + shape_string(s) + " does not match " + shape_string(s0) +
                                      " off axis " + std::to_string(axis));
    extents.push_back(s[axis]);
    ids.push_back(p.id());
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  const std::size_t total = out_shape[axis];
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].value();
    const std::size_t block = extents[p] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.values().begin() + o * block, block, out.values().begin() + (o * total + offset) * inner);
    offset += extents[p];
  }
  return g.record("concat", std::move(out), std::move(ids),
                  [extents, outer, inner, total](Graph& g, const Graph::Node& n) {
                    std::size_t offset = 0;
                    for (std::size_t p = 0; p < extents.size(); ++p) {
                      const std::size_t block = extents[p] * inner;
                      if (g.requires_grad(n.inputs[p])) {
                        auto& gp = g.grad(n.inputs[p]);
                        for (std::size_t o = 0; o < outer; ++o)
                          for (std::size_t i = 0; i < block; ++i)
                            gp[o * block + i] += n.grad[(o * total + offset) * inner + i];
                      }
                      offset += extents[p];
                    }
                  });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto split = split_at("slice", a.shape(), axis);
  if (begin >= end || end > split.extent)
    shape_fail("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for extent " +
                            std::to_string(split.extent));
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const std::size_t width = (end - begin) * split.inner;
  const auto& va = a.value();
  for (std::size_t o = 0; o < split.outer; ++o)
    std::copy_n(va.values().begin() + (o * split.extent + begin) * split.inner, width,
                out.values().begin() + o * width);
  return a.graph().record("slice", std::move(out), {a.id()}, [split, begin, width](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t i = 0; i < width; ++i) ga[(o * split.extent + begin) * split.inner + i] += n.grad[o * width + i];
  });
}

Var gather(Var a, std::vector<std::size_t> flat_indices) {
  if (flat_indices.empty()) shape_fail("gather", "no indices");
  const auto& va = a.value();
  Tensor out({flat_indices.size()});
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= va.size())
      shape_fail("gather", "index " + std::to_string(flat_indices[i]) + " out of range for " + shape_string(va.shape()));
    out[i] = va[flat_indices[i]];
  }
  return a.graph().record("gather", std::move(out), {a.id()},
                          [idx = std::move(flat_indices)](Graph& g, const Graph::Node& n) {
                            auto& ga = g.grad(n.inputs[0]);
                            for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += n.grad[i];
                          });
}

Var softmax(Var a, std::size_t axis) {
  const auto split = split_at("softmax", a.shape(), axis);
  const auto& va = a.value();
  if (!va.all_finite()) throw DomainError("softmax: non-finite input");
  Tensor out(a.shape());
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t i = 0; i < split.inner; ++i) {
      const std::size_t base = o * split.extent * split.inner + i;
      double mx = va[base];
      for (std::size_t j = 1; j < split.extent; ++j) mx = std::max(mx, va[base + j * split.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < split.extent; ++j) {
        const double e = std::exp(va[base + j * split.inner] - mx);
        out[base + j * split.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < split.extent; ++j) out[base + j * split.inner] /= total;
    }
  return a.graph().record("softmax", std::move(out), {a.id()}, [split](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    const auto& y = n.value;
    const auto& gy = n.grad;
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t i = 0; i < split.inner; ++i) {
        const std::size_t base = o * split.extent * split.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < split.extent; ++j) dot += gy[base + j * split.inner] * y[base + j * split.inner];
        for (std::size_t j = 0; j < split.extent; ++j) {
          const std::size_t k = base + j * split.inner;
          ga[k] += y[k] * (gy[k] - dot);
        }
      }
  });
}

Var masked_fill(Var a, const Tensor& keep, double fill) {
  if (!Broadcast::fits(keep.shape(), a.shape()))
    shape_fail("masked_fill", "mask " + shape_string(keep.shape()) + " does not broadcast to " + shape_string(a.shape()));
  auto map = std::make_shared<Broadcast>(keep.shape(), a.shape());
  auto mask = std::make_shared<std::vector<char>>(a.value().size());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep[(*map)(i)] != 0.0;
    if (!(*mask)[i]) out[i] = fill;
  }
  return a.graph().record("masked_fill", std::move(out), {a.id()}, [mask](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if ((*mask)[i]) ga[i] += n.grad[i];
  });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double z) { return z * (1.0 - z); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double z) { return 1.0 - z * z; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sum(Var a, std::size_t axis) {
  const auto split = split_at("sum", a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = 1;
  Tensor out(out_shape);
  const auto& va = a.value();
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t j = 0; j < split.extent; ++j)
      for (std::size_t i = 0; i < split.inner; ++i)
        out[o * split.inner + i] += va[(o * split.extent + j) * split.inner + i];
  return a.graph().record("sum", std::move(out), {a.id()}, [split](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t j = 0; j < split.extent; ++j)
        for (std::size_t i = 0; i < split.inner; ++i)
          ga[(o * split.extent + j) * split.inner + i] += n.grad[o * split.inner + i];
  });
}

Var mean(Var a, std::size_t axis) {
  const double extent = static_cast<double>(split_at("mean", a.shape(), axis).extent);
  return scale(sum(a, axis), 1.0 / extent);
}

Var sum_all(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.graph().record("sum_all", Tensor::scalar(total), {a.id()}, [](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    const double gz = n.grad[0];
    for (auto& v : ga.values()) v += gz;
  });
}

Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size())); }

Var l2_norm(Var a, std::size_t axis, double floor) {
  const auto split = split_at("l2_norm", a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = 1;
  Tensor out(out_shape);
  const auto& va = a.value();
  auto active = std::make_shared<std::vector<char>>(out.size());
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t i = 0; i < split.inner; ++i) {
      double ss = 0.0;
      for (std::size_t j = 0; j < split.extent; ++j) {
        const double x = va[(o * split.extent + j) * split.inner + i];
        ss += x * x;
      }
      const double norm = std::sqrt(ss);
      (*active)[o * split.inner + i] = norm > floor;
      out[o * split.inner + i] = std::max(norm, floor);
    }
  return a.graph().record("l2_norm", std::move(out), {a.id()}, [split, active](Graph& g, const Graph::Node& n) {
    auto& ga = g.grad(n.inputs[0]);
    const auto& va = g.value(n.inputs[0]);
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t i = 0; i < split.inner; ++i) {
        const std::size_t r = o * split.inner + i;
        if (!(*active)[r]) continue;
        const double coef = n.grad[r] / n.value[r];
        for (std::size_t j = 0; j < split.extent; ++j) {
          const std::size_t k = (o * split.extent + j) * split.inner + i;
          ga[k] += coef * va[k];
        }
      }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  same_graph("layer_norm", x, gain);
  same_graph("layer_norm", x, bias);
  const Shape& s = x.shape();
  if (s.empty()) shape_fail("layer_norm", "needs rank >= 1");
  const std::size_t c = s.back();
  if (gain.value().size() != c || bias.value().size() != c)
    shape_fail("layer_norm", "gain/bias " + shape_string(gain.shape()) + "/" + shape_string(bias.shape()) +
                                 " do not match channels " + std::to_string(c));
  const std::size_t rows = x.value().size() / c;
  Tensor out(s);
  auto normed = std::make_shared<Tensor>(s);
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& vx = x.value();
  const auto& vg = gain.value();
  const auto& vb = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += vx[r * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (vx[r * c + j] - mu) * (vx[r * c + j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (vx[r * c + j] - mu) * is;
      (*normed)[r * c + j] = xh;
      out[r * c + j] = xh * vg[j] + vb[j];
    }
  }
  return x.graph().record(
      "layer_norm", std::move(out), {x.id(), gain.id(), bias.id()},
      [rows, c, normed, inv_std](Graph& g, const Graph::Node& n) {
        const std::size_t ix = n.inputs[0], ig = n.inputs[1], ib = n.inputs[2];
        const auto& vg = g.value(ig);
        if (g.requires_grad(ig) || g.requires_grad(ib)) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) {
              if (g.requires_grad(ig)) g.grad(ig)[j] += n.grad[r * c + j] * (*normed)[r * c + j];
              if (g.requires_grad(ib)) g.grad(ib)[j] += n.grad[r * c + j];
            }
        }
        if (!g.requires_grad(ix)) return;
        auto& gx = g.grad(ix);
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = n.grad[r * c + j] * vg[j];
            sum_d += d;
            sum_dx += d * (*normed)[r * c + j];
          }
          for (std::size_t j = 0; j < c; ++j) {
            const double d = n.grad[r * c + j] * vg[j];
            gx[r * c + j] += (*inv_std)[r] * (d - inv_c * sum_d - (*normed)[r * c + j] * inv_c * sum_dx);
          }
        }
      });
}

Var conv1d(Var x, Var weight, Var bias) {
  same_graph("conv1d", x, weight);
  same_graph("conv1d", x, bias);
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sx.size() != 2 || sw.size() != 2 || sw[0] % sx[1] != 0)
    shape_fail("conv1d", "input " + shape_string(sx) + " and weight " + shape_string(sw) + " do not conform");
  const std::size_t frames = sx[0], cin = sx[1], taps = sw[0] / cin, cout = sw[1];
  if (taps % 2 == 0) shape_fail("conv1d", "kernel size must be odd, got " + std::to_string(taps));
  if (bias.value().size() != cout)
    shape_fail("conv1d", "bias " + shape_string(bias.shape()) + " does not match " + std::to_string(cout) + " outputs");
  const std::size_t half = taps / 2;
  // im2col: row t holds [x_{t-half}; ...; x_{t+half}] with zero padding.
  auto cols = std::make_shared<Tensor>(Shape{frames, taps * cin});
  const auto& vx = x.value();
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < taps; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
      std::copy_n(vx.values().begin() + src * static_cast<std::ptrdiff_t>(cin), cin,
                  cols->values().begin() + static_cast<std::ptrdiff_t>((t * taps + k) * cin));
    }
  Tensor out({frames, cout});
  out.matrix().noalias() = cols->matrix() * weight.value().matrix();
  out.matrix().rowwise() += ConstMatrixMap(bias.value().values().data(), 1, cout).row(0);
  return x.graph().record(
      "conv1d", std::move(out), {x.id(), weight.id(), bias.id()},
      [cols, frames, cin, taps, half](Graph& g, const Graph::Node& n) {
        const std::size_t ix = n.inputs[0], iw = n.inputs[1], ib = n.inputs[2];
        if (g.requires_grad(iw)) g.grad(iw).matrix().noalias() += cols->matrix().transpose() * n.grad.matrix();
        if (g.requires_grad(ib)) {
          auto& gb = g.grad(ib);
          const auto colsum = n.grad.matrix().colwise().sum();
          for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += colsum(static_cast<Eigen::Index>(j));
        }
        if (!g.requires_grad(ix)) return;
        RowMatrix dcols = n.grad.matrix() * g.value(iw).matrix().transpose();
        auto& gx = g.grad(ix);
        for (std::size_t t = 0; t < frames; ++t)
          for (std::size_t k = 0; k < taps; ++k) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(half);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
            for (std::size_t j = 0; j < cin; ++j)
              gx[static_cast<std::size_t>(src) * cin + j] +=
                  dcols(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k * cin + j));
          }
      });
}

Var smooth_l1(Var a) {
  return unary(
      "smooth_l1", a, [](double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; },
      [](double x, double) { return std::abs(x) < 1.0 ? x : (x > 0 ? 1.0 : -1.0); });
}

Var binary_cross_entropy(Var p, const Tensor& target) {
  const auto& vp = p.value();
  if (target.shape() != vp.shape())
    shape_fail("binary_cross_entropy",
               "target " + shape_string(target.shape()) + " does not match " + shape_string(vp.shape()));
  constexpr double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  Tensor out(vp.shape());
  for (std::size_t i = 0; i < vp.size(); ++i) {
    const double y = target[i];
    if (!std::isfinite(vp[i])) throw DomainError("binary_cross_entropy: non-finite probability");
    if (!(y >= 0.0 && y <= 1.0)) throw DomainError("binary_cross_entropy: target outside [0, 1]");
    const double q = std::clamp(vp[i], lo, hi);
    out[i] = -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
  }
  return p.graph().record("binary_cross_entropy", std::move(out), {p.id()},
                          [target](Graph& g, const Graph::Node& n) {
                            const auto& vp = g.value(n.inputs[0]);
                            auto& gp = g.grad(n.inputs[0]);
                            for (std::size_t i = 0; i < vp.size(); ++i) {
                              const double q = vp[i];
                              if (q < lo || q > hi) continue;
                              const double y = target[i];
                              gp[i] += n.grad[i] * (-y / q + (1.0 - y) / (1.0 - q));
                            }
                          });
}

Var linear(Var x, Var weight, Var bias) { return add(matmul(x, weight), bias); }

}  // namespace ma3srn::ops
