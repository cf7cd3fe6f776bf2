#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace motionduet::numkit {

using Shape = std::vector<std::size_t>;

std::size_t shapeSize(const Shape& shape);
std::string shapeString(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Dense row-major array of doubles. Rank 1 and 2 are the common cases; a
/// rank-1 tensor of extent n behaves as a single row for row-wise ops.
class Tensor {
 public:
  enum class Check { none, finite };

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data, Check check = Check::none);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Rank-2 view: rank-1 tensors are treated as 1×n.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols(), cols()};
  }
  const std::vector<double>& values() const noexcept { return data_; }

  Tensor reshaped(Shape shape) const;
  void fill(double v);
  bool allFinite() const noexcept;
  void requireFinite(const std::string& what) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Learnable tensor with its accumulated gradient.
struct Param {
  Param() = default;
  Param(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zeroGrad();
};

void requireSameShape(const Tensor& a, const Tensor& b, const char* op);

/// Seeded generator whose streams are identical across standard libraries:
/// uniform and normal draws are derived directly from the 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();  // [0, 1)
  double normal();   // N(0, 1), Box-Muller
  std::size_t below(std::size_t n);

  // Seeds derived from a parent seed and a stream tag, so independent
  // consumers never share a stream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool hasSpare_ = false;
  double spare_ = 0.0;
};

Tensor randomNormal(const Shape& shape, Rng& rng, double stddev = 1.0);

}  // namespace motionduet::numkit
