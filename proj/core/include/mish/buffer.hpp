#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mish {

enum class Precision { single_prec, double_prec };

inline std::string precision_name(Precision p) {
  return p == Precision::single_prec ? "single" : "double";
}

// Contiguous 1-D array of scalars with an explicit element precision.
// The unit of kernel work.
class Buffer {
 public:
  Buffer() = default;
  Buffer(Precision prec, size_t n) : prec_(prec) {
    if (prec == Precision::single_prec) {
      f32_.resize(n);
    } else {
      f64_.resize(n);
    }
  }
  explicit Buffer(std::vector<float> v)
      : prec_(Precision::single_prec), f32_(std::move(v)) {}
  explicit Buffer(std::vector<double> v)
      : prec_(Precision::double_prec), f64_(std::move(v)) {}

  Precision precision() const { return prec_; }
  size_t size() const {
    return prec_ == Precision::single_prec ? f32_.size() : f64_.size();
  }

  std::span<float> f32() {
    check(Precision::single_prec);
    return f32_;
  }
  std::span<const float> f32() const {
    check(Precision::single_prec);
    return f32_;
  }
  std::span<double> f64() {
    check(Precision::double_prec);
    return f64_;
  }
  std::span<const double> f64() const {
    check(Precision::double_prec);
    return f64_;
  }

 private:
  void check(Precision want) const {
    if (prec_ != want)
      throw std::invalid_argument("buffer: wrong element precision");
  }

  Precision prec_ = Precision::double_prec;
  std::vector<float> f32_;
  std::vector<double> f64_;
};

}  // namespace mish
