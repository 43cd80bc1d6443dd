#include "g2/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace g2 {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e < 0) throw std::invalid_argument("negative tensor extent");
    n *= e;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  buf_ = std::make_shared<std::vector<double>>(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  buf_ = std::make_shared<std::vector<double>>(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (static_cast<int64_t>(values.size()) != shape_numel(shape_)) {
    throw std::invalid_argument("tensor value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_to_string(shape_));
  }
  buf_ = std::make_shared<std::vector<double>>(std::move(values));
}

namespace {
int64_t flat_index(const Shape& shape, std::initializer_list<int64_t> idx) {
  if (idx.size() != shape.size()) throw std::invalid_argument("index rank mismatch");
  int64_t flat = 0;
  size_t d = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= shape[d]) throw std::out_of_range("tensor index out of range");
    flat = flat * shape[d] + i;
    ++d;
  }
  return flat;
}
}  // namespace

double& Tensor::at(std::initializer_list<int64_t> idx) {
  return (*buf_)[flat_index(shape_, idx)];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  return (*buf_)[flat_index(shape_, idx)];
}

double Tensor::value() const {
  if (!defined() || numel() != 1) {
    throw std::invalid_argument("value() requires a one-element tensor");
  }
  return (*buf_)[0];
}

Tensor Tensor::clone() const {
  if (!defined()) return Tensor();
  Tensor out;
  out.shape_ = shape_;
  out.buf_ = std::make_shared<std::vector<double>>(*buf_);
  out.requires_grad_ = requires_grad_;
  return out;
}

void Tensor::fill(double v) {
  for (double& x : *buf_) x = v;
}

void Tensor::copy_from(const Tensor& other) {
  if (numel() != other.numel()) throw std::invalid_argument("copy_from: size mismatch");
  *buf_ = *other.buf_;
}

bool Tensor::all_finite() const {
  for (double x : *buf_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double x : *buf_) m = std::max(m, std::fabs(x));
  return m;
}

Tensor stack_batch(const std::vector<Tensor>& items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: empty list");
  const Shape& inner = items[0].shape();
  Shape out_shape;
  out_shape.push_back(static_cast<int64_t>(items.size()));
  out_shape.insert(out_shape.end(), inner.begin(), inner.end());
  Tensor out(out_shape);
  const int64_t stride = items[0].numel();
  for (size_t i = 0; i < items.size(); ++i) {
    if (!items[i].same_shape(items[0])) {
      throw std::invalid_argument("stack_batch: mismatched item shapes");
    }
    std::copy(items[i].data(), items[i].data() + stride, out.data() + i * stride);
  }
  return out;
}

}  // namespace g2
