#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace bassl {

using Shape = std::vector<std::size_t>;

// Product of the dimensions; throws DimensionError on a zero dimension.
// The empty shape denotes a scalar and has one element.
std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major (last index fastest) array of doubles with an explicit
/// shape. Value semantics: copies are deep, moves are cheap.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value);
    static Tensor identity(std::size_t n);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return values_.size(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    double& operator[](std::size_t flat) noexcept { return values_[flat]; }
    double operator[](std::size_t flat) const noexcept { return values_[flat]; }

    // Bounds-checked multi-index access.
    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    // The single element of a one-element tensor.
    double item() const;

    Tensor reshaped(Shape shape) const;
    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t flat_index(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<double> values_;
};

// Elementwise helpers on plain tensors (no graph involved). Shapes must match.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

double max_abs(const Tensor& t) noexcept;
double l2_norm(const Tensor& t) noexcept;

}  // namespace bassl
