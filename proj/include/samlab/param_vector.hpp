#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "samlab/tensor.hpp"

namespace samlab {

struct ParamEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
};

// Ordered (name, shape, offset) records whose extents partition [0, d).
class ParamLayout {
 public:
  explicit ParamLayout(const std::vector<std::pair<std::string, Shape>>& blocks);

  // Single flat block named "x".
  static std::shared_ptr<const ParamLayout> flat(std::size_t d);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return size_; }
  const ParamEntry& find(const std::string& name) const;

  bool operator==(const ParamLayout& other) const;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t size_ = 0;
};

// Flat, ordered view of all model parameters.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::shared_ptr<const ParamLayout> layout);
  ParamVector(std::shared_ptr<const ParamLayout> layout, std::vector<double> values);

  // Convenience for analytic objectives: flat layout of the given values.
  static ParamVector from(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  const std::shared_ptr<const ParamLayout>& layout() const { return layout_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  std::span<const double> span() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  ParamVector zeros_like() const { return ParamVector(layout_); }

  ParamVector& operator+=(const ParamVector& o);
  ParamVector& operator-=(const ParamVector& o);
  ParamVector& operator*=(double s);
  // this += s * o
  ParamVector& axpy(double s, const ParamVector& o);

  double dot(const ParamVector& o) const;
  double norm() const;
  bool all_finite() const;

  std::vector<Tensor> unflatten() const;
  static ParamVector flatten(std::shared_ptr<const ParamLayout> layout,
                             const std::vector<Tensor>& blocks);

  bool operator==(const ParamVector& o) const { return values_ == o.values_; }

 private:
  void check_same(const ParamVector& o) const;

  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> values_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double s, ParamVector a);
ParamVector operator-(ParamVector a);

double max_abs_diff(const ParamVector& a, const ParamVector& b);

}  // namespace samlab
