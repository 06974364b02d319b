#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "samlab/dense_matrix.hpp"
#include "samlab/model.hpp"

namespace samlab {

// f(x) = 1/2 x^T A x - b^T x. The batch is ignored.
class QuadraticObjective : public ModelBase<QuadraticObjective> {
 public:
  explicit QuadraticObjective(DenseMatrix a, std::vector<double> b = {});

  const std::shared_ptr<const ParamLayout>& layout() const override { return layout_; }
  const DenseMatrix& matrix() const { return a_; }

  template <class T>
  NodeId forward(Tape<T>& tape, NodeId params, const Batch& batch) const;

 private:
  DenseMatrix a_;
  std::vector<double> b_;
  std::shared_ptr<const ParamLayout> layout_;
};

struct Monomial {
  double coefficient = 0.0;
  std::vector<int> powers;  // one exponent per coordinate
};

// Sum of monomials, e.g. x^4/4 or x1^2 x2. The batch is ignored.
class PolynomialObjective : public ModelBase<PolynomialObjective> {
 public:
  PolynomialObjective(std::size_t dim, std::vector<Monomial> terms);

  const std::shared_ptr<const ParamLayout>& layout() const override { return layout_; }
  std::size_t dim() const { return layout_->size(); }

  template <class T>
  NodeId forward(Tape<T>& tape, NodeId params, const Batch& batch) const;

 private:
  std::vector<Monomial> terms_;
  std::shared_ptr<const ParamLayout> layout_;
};

}  // namespace samlab
