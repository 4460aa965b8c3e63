#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace streamhead::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape & shape);
std::string shape_str(const Shape & shape);

// Dense row-major array of doubles. A rank-0 array (empty shape) holds one value.
class Array {
public:
    Array() : Array(Shape{}) {}
    explicit Array(Shape shape);
    Array(Shape shape, std::vector<double> data);

    static Array zeros(Shape shape) { return Array(std::move(shape)); }
    static Array full(Shape shape, double value);
    static Array scalar(double value) { return Array(Shape{}, {value}); }
    static Array vector(std::vector<double> values);
    static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const Shape & shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double & operator[](std::size_t i) { return data_[i]; }

    double at(std::size_t r, std::size_t c) const;
    double & at(std::size_t r, std::size_t c);
    double at(std::size_t i, std::size_t j, std::size_t k) const;
    double & at(std::size_t i, std::size_t j, std::size_t k);

    // Scalar value of a single-element array.
    double item() const;

    Array reshaped(Shape shape) const;
    Array rows(std::size_t begin, std::size_t end) const;

    bool all_finite() const;

    // Bitwise element equality and identical shape.
    friend bool operator==(const Array & a, const Array & b);

private:
    Shape shape_;
    std::vector<double> data_;
};

Array concat_rows(std::span<const Array> parts);

} // namespace streamhead::numerics
