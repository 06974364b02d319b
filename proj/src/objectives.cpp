#include "samlab/objectives.hpp"

#include <stdexcept>

namespace samlab {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(const std::vector<double>& diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

std::vector<double> DenseMatrix::multiply(const std::vector<double>& v) const {
  if (v.size() != cols) throw std::invalid_argument("matrix-vector size mismatch");
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += data[i * cols + j] * v[j];
    out[i] = acc;
  }
  return out;
}

QuadraticObjective::QuadraticObjective(DenseMatrix a, std::vector<double> b)
    : a_(std::move(a)), b_(std::move(b)), layout_(ParamLayout::flat(a_.rows)) {
  if (a_.rows != a_.cols || a_.rows == 0) throw std::invalid_argument("A must be square");
  if (!b_.empty() && b_.size() != a_.rows) throw std::invalid_argument("b has wrong length");
}

template <class T>
NodeId QuadraticObjective::forward(Tape<T>& tape, NodeId params, const Batch&) const {
  const std::size_t d = a_.rows;
  const NodeId x = tape.slice(params, 0, Shape{d, 1});
  const NodeId a = tape.constant(Tensor(Shape{d, d}, a_.data));
  const NodeId ax = tape.matmul(a, x);
  NodeId out = tape.scale(tape.sum(tape.mul(x, ax)), 0.5);
  if (!b_.empty()) {
    const NodeId b = tape.constant(Tensor(Shape{d, 1}, b_));
    out = tape.sub(out, tape.sum(tape.mul(b, x)));
  }
  return out;
}

PolynomialObjective::PolynomialObjective(std::size_t dim, std::vector<Monomial> terms)
    : terms_(std::move(terms)), layout_(ParamLayout::flat(dim)) {
  if (dim == 0) throw std::invalid_argument("polynomial needs at least one variable");
  for (const auto& t : terms_) {
    if (t.powers.size() != dim) throw std::invalid_argument("monomial has wrong arity");
    for (int p : t.powers) {
      if (p < 0) throw std::invalid_argument("negative exponent");
    }
  }
}

template <class T>
NodeId PolynomialObjective::forward(Tape<T>& tape, NodeId params, const Batch&) const {
  const std::size_t d = dim();
  std::vector<NodeId> coords(d);
  for (std::size_t i = 0; i < d; ++i) coords[i] = tape.slice(params, i, Shape{1});

  NodeId total = tape.constant(Tensor(Shape{1}, {0.0}));
  for (const auto& term : terms_) {
    NodeId prod = tape.constant(Tensor(Shape{1}, {term.coefficient}));
    for (std::size_t i = 0; i < d; ++i) {
      if (term.powers[i] == 0) continue;
      const NodeId factor =
          term.powers[i] == 1 ? coords[i] : tape.pow_int(coords[i], term.powers[i]);
      prod = tape.mul(prod, factor);
    }
    total = tape.add(total, prod);
  }
  return total;
}

template NodeId QuadraticObjective::forward(Tape<double>&, NodeId, const Batch&) const;
template NodeId QuadraticObjective::forward(Tape<Dual1>&, NodeId, const Batch&) const;
template NodeId QuadraticObjective::forward(Tape<Dual2>&, NodeId, const Batch&) const;
template NodeId PolynomialObjective::forward(Tape<double>&, NodeId, const Batch&) const;
template NodeId PolynomialObjective::forward(Tape<Dual1>&, NodeId, const Batch&) const;
template NodeId PolynomialObjective::forward(Tape<Dual2>&, NodeId, const Batch&) const;

}  // namespace samlab
