#include "samlab/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace samlab {

ParamLayout::ParamLayout(const std::vector<std::pair<std::string, Shape>>& blocks) {
  for (const auto& [name, shape] : blocks) {
    entries_.push_back({name, shape, size_});
    size_ += numel(shape);
  }
}

std::shared_ptr<const ParamLayout> ParamLayout::flat(std::size_t d) {
  return std::make_shared<const ParamLayout>(
      std::vector<std::pair<std::string, Shape>>{{"x", Shape{d}}});
}

const ParamEntry& ParamLayout::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw std::out_of_range("no parameter block named '" + name + "'");
}

bool ParamLayout::operator==(const ParamLayout& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.shape != b.shape || a.offset != b.offset) return false;
  }
  return true;
}

ParamVector::ParamVector(std::shared_ptr<const ParamLayout> layout)
    : layout_(std::move(layout)), values_(layout_->size(), 0.0) {}

ParamVector::ParamVector(std::shared_ptr<const ParamLayout> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_->size()) {
    throw std::invalid_argument("parameter vector length " + std::to_string(values_.size()) +
                                " does not match layout size " +
                                std::to_string(layout_->size()));
  }
}

ParamVector ParamVector::from(std::vector<double> values) {
  auto layout = ParamLayout::flat(values.size());
  return ParamVector(std::move(layout), std::move(values));
}

void ParamVector::check_same(const ParamVector& o) const {
  if (o.values_.size() != values_.size()) {
    throw std::invalid_argument("parameter vectors of different length");
  }
}

ParamVector& ParamVector::operator+=(const ParamVector& o) {
  check_same(o);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& o) {
  check_same(o);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ParamVector& ParamVector::axpy(double s, const ParamVector& o) {
  check_same(o);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
  return *this;
}

double ParamVector::dot(const ParamVector& o) const {
  check_same(o);
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) acc += values_[i] * o.values_[i];
  return acc;
}

double ParamVector::norm() const { return std::sqrt(dot(*this)); }

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<Tensor> ParamVector::unflatten() const {
  std::vector<Tensor> out;
  out.reserve(layout_->entries().size());
  for (const auto& e : layout_->entries()) {
    const auto first = values_.begin() + static_cast<std::ptrdiff_t>(e.offset);
    out.emplace_back(e.shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(numel(e.shape))));
  }
  return out;
}

ParamVector ParamVector::flatten(std::shared_ptr<const ParamLayout> layout,
                                 const std::vector<Tensor>& blocks) {
  if (blocks.size() != layout->entries().size()) {
    throw std::invalid_argument("block count does not match layout");
  }
  ParamVector out(layout);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& e = layout->entries()[b];
    if (blocks[b].shape != e.shape) {
      throw std::invalid_argument("block '" + e.name + "' has shape " +
                                  shape_string(blocks[b].shape) + ", expected " +
                                  shape_string(e.shape));
    }
    std::copy(blocks[b].data.begin(), blocks[b].data.end(),
              out.values_.begin() + static_cast<std::ptrdiff_t>(e.offset));
  }
  return out;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double s, ParamVector a) { return a *= s; }
ParamVector operator-(ParamVector a) { return a *= -1.0; }

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace samlab
