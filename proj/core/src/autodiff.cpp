#include "tkgr/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace tkgr::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

Var make_node(Tensor value, std::vector<Var> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  bool track = g_grad_enabled;
  if (track) {
    bool any = false;
    for (const Var& p : parents)
      if (p && p->requires_grad) any = true;
    track = any;
  }
  if (track) {
    n->requires_grad = true;
    n->parents = std::move(parents);
  }
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    fail(ErrorKind::contract, strf("%s: shape mismatch", op));
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

GradModeGuard::GradModeGuard(bool enabled) : prev_(g_grad_enabled) {
  g_grad_enabled = enabled;
}
GradModeGuard::~GradModeGuard() { g_grad_enabled = prev_; }

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

Var scalar(double value) { return constant(Tensor::scalar(value)); }

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->requires_grad = requires_grad && g_grad_enabled;
  return n;
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad)
    n->vjps = {[](const Var& g) { return g; }, [](const Var& g) { return g; }};
  return n;
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad)
    n->vjps = {[](const Var& g) { return g; }, [](const Var& g) { return neg(g); }};
  return n;
}

Var neg(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = -x;
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) n->vjps = {[](const Var& g) { return neg(g); }};
  return n;
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad)
    n->vjps = {[b](const Var& g) { return mul(g, b); },
               [a](const Var& g) { return mul(g, a); }};
  return n;
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b->value[i];
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad)
    n->vjps = {[b](const Var& g) { return div(g, b); },
               [a, b](const Var& g) {
                 return neg(div(mul(g, a), mul(b, b)));
               }};
  return n;
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& x : out.data()) x *= s;
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) n->vjps = {[s](const Var& g) { return scale(g, s); }};
  return n;
}

Var smul(const Var& s, const Var& a) {
  if (s->value.size() != 1) fail(ErrorKind::contract, "smul: scalar operand size != 1");
  double sv = s->value[0];
  Tensor out = a->value;
  for (double& x : out.data()) x *= sv;
  Var n = make_node(std::move(out), {s, a});
  if (n->requires_grad)
    n->vjps = {[a](const Var& g) {
                 Var d = sum(mul(g, a));
                 return d;
               },
               [s](const Var& g) { return smul(s, g); }};
  return n;
}

Var exp_(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = std::exp(x);
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[a](const Var& g) { return mul(g, exp_(a)); }};
  return n;
}

Var log_(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = std::log(x);
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) n->vjps = {[a](const Var& g) { return div(g, a); }};
  return n;
}

Var tanh_(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = std::tanh(x);
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[a](const Var& g) {
      Var t = tanh_(a);
      Var one = constant(Tensor::full(t->value.shape(), 1.0));
      return mul(g, sub(one, mul(t, t)));
    }};
  return n;
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = 1.0 / (1.0 + std::exp(-x));
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[a](const Var& g) {
      Var s = sigmoid(a);
      Var one = constant(Tensor::full(s->value.shape(), 1.0));
      return mul(g, mul(s, sub(one, s)));
    }};
  return n;
}

Var relu(const Var& a) {
  Tensor out = a->value;
  Tensor mask(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = out[i] > 0.0 ? 1.0 : 0.0;
    out[i] = out[i] > 0.0 ? out[i] : 0.0;
  }
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    Var m = constant(std::move(mask));
    n->vjps = {[m](const Var& g) { return mul(g, m); }};
  }
  return n;
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a->value;
  Tensor mask(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = out[i] > 0.0 ? 1.0 : slope;
    out[i] = out[i] > 0.0 ? out[i] : slope * out[i];
  }
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) {
    Var m = constant(std::move(mask));
    n->vjps = {[m](const Var& g) { return mul(g, m); }};
  }
  return n;
}

Var sqrt_(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x = std::sqrt(x);
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[a](const Var& g) { return div(g, scale(sqrt_(a), 2.0)); }};
  return n;
}

Var square(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.data()) x *= x;
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[a](const Var& g) { return mul(g, scale(a, 2.0)); }};
  return n;
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 ||
      a->value.cols() != b->value.rows())
    fail(ErrorKind::contract, "matmul: incompatible shapes");
  std::size_t m = a->value.rows(), k = a->value.cols(), p = b->value.cols();
  Tensor out({m, p});
  const auto& av = a->value.data();
  const auto& bv = b->value.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      double aval = av[i * k + l];
      if (aval == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) ov[i * p + j] += aval * bv[l * p + j];
    }
  Var n = make_node(std::move(out), {a, b});
  if (n->requires_grad)
    n->vjps = {[b](const Var& g) { return matmul(g, transpose(b)); },
               [a](const Var& g) { return matmul(transpose(a), g); }};
  return n;
}

Var matvec(const Var& a, const Var& x) {
  if (a->value.rank() != 2 || x->value.rank() != 1 ||
      a->value.cols() != x->value.size())
    fail(ErrorKind::contract, "matvec: incompatible shapes");
  std::size_t m = a->value.rows(), k = a->value.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t l = 0; l < k; ++l) acc += a->value[i * k + l] * x->value[l];
    out[i] = acc;
  }
  Var n = make_node(std::move(out), {a, x});
  if (n->requires_grad)
    n->vjps = {[x](const Var& g) { return outer(g, x); },
               [a](const Var& g) { return matvec(transpose(a), g); }};
  return n;
}

Var transpose(const Var& a) {
  if (a->value.rank() != 2) fail(ErrorKind::contract, "transpose: rank != 2");
  std::size_t m = a->value.rows(), k = a->value.cols();
  Tensor out({k, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[j * m + i] = a->value[i * k + j];
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad) n->vjps = {[](const Var& g) { return transpose(g); }};
  return n;
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::contract, "concat: empty input");
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p->value.rank() != 1) fail(ErrorKind::contract, "concat: rank != 1 part");
    total += p->value.size();
  }
  Tensor out({total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p->value.data().begin(), p->value.data().end(), out.data().begin() + off);
    off += p->value.size();
  }
  Var n = make_node(std::move(out), std::vector<Var>(parts));
  if (n->requires_grad) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      std::size_t o = offset, len = p->value.size();
      n->vjps.push_back([o, len](const Var& g) { return slice(g, o, len); });
      offset += len;
    }
  }
  return n;
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) fail(ErrorKind::contract, "stack_rows: empty input");
  std::size_t d = rows[0]->value.size();
  for (const Var& r : rows)
    if (r->value.rank() != 1 || r->value.size() != d)
      fail(ErrorKind::contract, "stack_rows: inconsistent row shapes");
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i]->value.data().begin(), rows[i]->value.data().end(),
              out.data().begin() + i * d);
  Var n = make_node(std::move(out), std::vector<Var>(rows));
  if (n->requires_grad)
    for (std::size_t i = 0; i < rows.size(); ++i)
      n->vjps.push_back([i](const Var& g) { return row(g, i); });
  return n;
}

// internal: place a short vector into a zero vector of length total at offset
static Var embed_slice(const Var& v, std::size_t start, std::size_t total) {
  std::size_t len = v->value.size();
  Tensor out({total});
  std::copy(v->value.data().begin(), v->value.data().end(), out.data().begin() + start);
  Var n = make_node(std::move(out), {v});
  if (n->requires_grad)
    n->vjps = {[start, len](const Var& g) { return slice(g, start, len); }};
  return n;
}

Var slice(const Var& a, std::size_t start, std::size_t len) {
  if (a->value.rank() != 1 || start + len > a->value.size())
    fail(ErrorKind::contract, "slice: out of range");
  Tensor out({len});
  std::copy(a->value.data().begin() + start, a->value.data().begin() + start + len,
            out.data().begin());
  std::size_t total = a->value.size();
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[start, total](const Var& g) { return embed_slice(g, start, total); }};
  return n;
}

Var row(const Var& a, std::size_t r) {
  if (a->value.rank() != 2 || r >= a->value.rows())
    fail(ErrorKind::contract, "row: out of range");
  std::size_t d = a->value.cols();
  Tensor out({d});
  std::copy(a->value.data().begin() + r * d, a->value.data().begin() + (r + 1) * d,
            out.data().begin());
  std::size_t nrows = a->value.rows();
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[r, nrows](const Var& g) { return embed_row(g, r, nrows); }};
  return n;
}

Var embed_row(const Var& v, std::size_t r, std::size_t nrows) {
  if (v->value.rank() != 1 || r >= nrows)
    fail(ErrorKind::contract, "embed_row: out of range");
  std::size_t d = v->value.size();
  Tensor out({nrows, d});
  std::copy(v->value.data().begin(), v->value.data().end(), out.data().begin() + r * d);
  Var n = make_node(std::move(out), {v});
  if (n->requires_grad) n->vjps = {[r](const Var& g) { return row(g, r); }};
  return n;
}

Var submatrix(const Var& a, std::size_t r0, std::size_t c0, std::size_t nr,
              std::size_t nc) {
  if (a->value.rank() != 2 || r0 + nr > a->value.rows() || c0 + nc > a->value.cols())
    fail(ErrorKind::contract, "submatrix: out of range");
  std::size_t cols = a->value.cols();
  Tensor out({nr, nc});
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j)
      out[i * nc + j] = a->value[(r0 + i) * cols + (c0 + j)];
  std::size_t rows_total = a->value.rows(), cols_total = cols;
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[r0, c0, rows_total, cols_total](const Var& g) {
      return embed_submatrix(g, r0, c0, rows_total, cols_total);
    }};
  return n;
}

Var embed_submatrix(const Var& v, std::size_t r0, std::size_t c0, std::size_t nr,
                    std::size_t nc) {
  if (v->value.rank() != 2 || r0 + v->value.rows() > nr || c0 + v->value.cols() > nc)
    fail(ErrorKind::contract, "embed_submatrix: out of range");
  std::size_t sr = v->value.rows(), sc = v->value.cols();
  Tensor out({nr, nc});
  for (std::size_t i = 0; i < sr; ++i)
    for (std::size_t j = 0; j < sc; ++j)
      out[(r0 + i) * nc + (c0 + j)] = v->value[i * sc + j];
  Var n = make_node(std::move(out), {v});
  if (n->requires_grad)
    n->vjps = {[r0, c0, sr, sc](const Var& g) { return submatrix(g, r0, c0, sr, sc); }};
  return n;
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  std::size_t total = 1;
  for (std::size_t d : shape) total *= d;
  if (total != a->value.size()) fail(ErrorKind::contract, "reshape: size mismatch");
  Tensor out = Tensor::of(a->value.data(), shape);
  std::vector<std::size_t> orig = a->value.shape();
  Var n = make_node(std::move(out), {a});
  if (n->requires_grad)
    n->vjps = {[orig](const Var& g) { return reshape(g, orig); }};
  return n;
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double x : a->value.data()) acc += x;
  std::vector<std::size_t> shape = a->value.shape();
  Var n = make_node(Tensor::scalar(acc), {a});
  if (n->requires_grad)
    n->vjps = {[shape](const Var& g) { return bcast(g, shape); }};
  return n;
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a->value.size()));
}

Var dot(const Var& a, const Var& b) {
  if (a->value.rank() != 1 || !a->value.same_shape(b->value))
    fail(ErrorKind::contract, "dot: incompatible shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) acc += a->value[i] * b->value[i];
  Var n = make_node(Tensor::scalar(acc), {a, b});
  if (n->requires_grad)
    n->vjps = {[b](const Var& g) { return smul(g, b); },
               [a](const Var& g) { return smul(g, a); }};
  return n;
}

Var bcast(const Var& s, std::vector<std::size_t> shape) {
  if (s->value.size() != 1) fail(ErrorKind::contract, "bcast: source size != 1");
  Tensor out = Tensor::full(shape, s->value[0]);
  Var n = make_node(std::move(out), {s});
  if (n->requires_grad) n->vjps = {[](const Var& g) { return sum(g); }};
  return n;
}

Var softmax(const Var& a) {
  if (a->value.rank() != 1) fail(ErrorKind::contract, "softmax: rank != 1");
  double m = a->value[0];
  for (double x : a->value.data()) m = std::max(m, x);
  Var shifted = sub(a, constant(Tensor::full(a->value.shape(), m)));
  Var e = exp_(shifted);
  Var total = sum(e);
  Var inv = div(scalar(1.0), total);
  return smul(inv, e);
}

Var norm2(const Var& a) {
  // The Euclidean norm is nonsmooth at the origin; sqrt'(0) would inject an
  // infinity into any backward pass through it. Use the flat subgradient
  // (zero) there, which is exact whenever the input is pinned at zero over a
  // neighborhood (e.g. a fully inactive ReLU region).
  for (double v : a->value.data())
    if (v != 0.0) return sqrt_(sum(square(a)));
  return scalar(0.0);
}

Var outer(const Var& u, const Var& v) {
  if (u->value.rank() != 1 || v->value.rank() != 1)
    fail(ErrorKind::contract, "outer: rank != 1");
  return matmul(reshape(u, {u->value.size(), 1}), reshape(v, {1, v->value.size()}));
}

GradMap backward(const Var& root, bool create_graph) {
  if (!root || root->value.size() != 1)
    fail(ErrorKind::contract, "backward: root must have size 1");
  // reverse topological order via iterative postorder DFS
  std::vector<const Node*> order;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<const Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    const Node* node = stack.back().first;
    std::size_t idx = stack.back().second;
    if (idx < node->parents.size()) {
      stack.back().second = idx + 1;
      const Var& p = node->parents[idx];
      if (p && p->requires_grad && !visited.count(p.get())) {
        visited.insert(p.get());
        stack.emplace_back(p.get(), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  GradMap grads;
  grads[root.get()] = constant(Tensor::full(root->value.shape(), 1.0));

  std::unique_ptr<NoGradGuard> guard;
  if (!create_graph) guard = std::make_unique<NoGradGuard>();

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node* node = *it;
    auto git = grads.find(node);
    if (git == grads.end()) continue;
    Var g = git->second;
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      const Var& p = node->parents[i];
      if (!p || !p->requires_grad) continue;
      Var contrib = node->vjps[i](g);
      auto pit = grads.find(p.get());
      if (pit == grads.end())
        grads[p.get()] = contrib;
      else
        pit->second = add(pit->second, contrib);
    }
  }
  return grads;
}

Tensor grad_of(const GradMap& grads, const Var& node) {
  auto it = grads.find(node.get());
  if (it == grads.end()) return Tensor::zeros(node->value.shape());
  return it->second->value;
}

}  // namespace tkgr::ad
