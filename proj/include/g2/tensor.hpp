#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace g2 {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;
// Stacks equally shaped [d...] tensors into one [N,d...] batch tensor.
Tensor stack_batch(const std::vector<Tensor>& items);

// Dense row-major double tensor. Copies are shallow (shared storage);
// use clone() for a deep copy. A rank-0 shape is a scalar with one element.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, double fill);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  bool defined() const { return buf_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t extent(int axis) const { return shape_.at(axis); }
  int64_t numel() const { return buf_ ? static_cast<int64_t>(buf_->size()) : 0; }

  double* data() { return buf_->data(); }
  const double* data() const { return buf_->data(); }

  double& operator[](int64_t i) { return (*buf_)[i]; }
  double operator[](int64_t i) const { return (*buf_)[i]; }

  double& at(std::initializer_list<int64_t> idx);
  double at(std::initializer_list<int64_t> idx) const;

  // scalar access; throws unless numel() == 1
  double value() const;

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool v) {
    requires_grad_ = v;
    return *this;
  }

  Tensor clone() const;
  void fill(double v);
  void copy_from(const Tensor& other);  // same numel required

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Storage identity: two handles alias iff their ids are equal.
  const void* storage_id() const { return static_cast<const void*>(buf_.get()); }

  bool all_finite() const;
  double max_abs() const;

 private:
  std::shared_ptr<std::vector<double>> buf_;
  Shape shape_;
  bool requires_grad_ = false;
};

}  // namespace g2
