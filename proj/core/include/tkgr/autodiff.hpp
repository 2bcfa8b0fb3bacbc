#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// Design notes:
//  * A Var is a shared pointer to an immutable-value graph node. Ops build
//    nodes eagerly; each node stores one vector-Jacobian-product closure per
//    parent.
//  * VJP closures are written in terms of the op set itself (they reference
//    parent Vars, never the node being built), so backward(create_graph=true)
//    yields gradients that are themselves differentiable. That is what the
//    gradient-norm penalty of the path discriminator needs: its parameter
//    gradient contains second derivatives.
//  * Piecewise-linear activations (relu, leaky_relu) capture their masks as
//    constants; their second derivative is zero almost everywhere.
//  * backward() traverses in reverse topological order determined purely by
//    graph structure, so gradient accumulation order is deterministic.

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "tkgr/tensor.hpp"

namespace tkgr::ad {

struct Node;
using Var = std::shared_ptr<Node>;
using Vjp = std::function<Var(const Var&)>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<Var> parents;
  std::vector<Vjp> vjps;  // parallel to parents; empty when !requires_grad
};

// Thread-local recording switch; when off, created nodes carry values only.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Forces recording to a chosen state; producers of shared, memoized graphs
// use this so a caller's NoGradGuard cannot leak gradient-free nodes into
// caches that gradient-tracked consumers read later.
class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool prev_;
};

Var constant(Tensor value);
Var scalar(double value);
Var leaf(Tensor value, bool requires_grad = true);

// --- elementwise / arithmetic ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var smul(const Var& s, const Var& a);  // size-1 s broadcast-multiplied into a
Var exp_(const Var& a);
Var log_(const Var& a);
Var tanh_(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sqrt_(const Var& a);
Var square(const Var& a);

// --- linear algebra / structure ---
Var matmul(const Var& a, const Var& b);
Var matvec(const Var& a, const Var& x);
Var transpose(const Var& a);
Var concat(const std::vector<Var>& parts);             // rank-1 concat
Var stack_rows(const std::vector<Var>& rows);          // rank-1 rows -> matrix
Var slice(const Var& a, std::size_t start, std::size_t len);  // rank-1
Var row(const Var& a, std::size_t r);                  // matrix row as vector
Var embed_row(const Var& v, std::size_t r, std::size_t nrows);
Var submatrix(const Var& a, std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc);
Var embed_submatrix(const Var& v, std::size_t r0, std::size_t c0, std::size_t nr,
                    std::size_t nc);
Var reshape(const Var& a, std::vector<std::size_t> shape);
Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);
Var bcast(const Var& s, std::vector<std::size_t> shape);  // size-1 -> filled shape

// --- composites ---
Var softmax(const Var& a);  // rank-1, max-shifted for stability
Var norm2(const Var& a);
Var outer(const Var& u, const Var& v);

using GradMap = std::unordered_map<const Node*, Var>;

// Gradients of a size-1 root w.r.t. every reachable node that requires grad.
// With create_graph=true the returned gradients are differentiable Vars.
GradMap backward(const Var& root, bool create_graph = false);

// Gradient tensor for one node; zeros of matching shape when absent.
Tensor grad_of(const GradMap& grads, const Var& node);

}  // namespace tkgr::ad
