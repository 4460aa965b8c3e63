#include "streamhead/numerics/array.hpp"

#include "streamhead/errors.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace streamhead::numerics {

std::size_t shape_size(const Shape & shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape & shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Array::Array(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    STREAMHEAD_REQUIRE(shape_size(shape_) == data_.size(),
                       "shape " + shape_str(shape_) + " does not hold " + std::to_string(data_.size()) + " values");
}

Array Array::full(Shape shape, double value) {
    Array a(std::move(shape));
    std::fill(a.data_.begin(), a.data_.end(), value);
    return a;
}

Array Array::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Array(Shape{n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Array(Shape{rows, cols}, std::move(values));
}

std::size_t Array::dim(std::size_t axis) const {
    STREAMHEAD_REQUIRE(axis < shape_.size(), "axis out of range");
    return shape_[axis];
}

double Array::at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
double & Array::at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

double Array::at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double & Array::at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Array::item() const {
    STREAMHEAD_REQUIRE(data_.size() == 1, "item() on array of shape " + shape_str(shape_));
    return data_[0];
}

Array Array::reshaped(Shape shape) const {
    STREAMHEAD_REQUIRE(shape_size(shape) == data_.size(),
                       "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Array(std::move(shape), data_);
}

Array Array::rows(std::size_t begin, std::size_t end) const {
    STREAMHEAD_REQUIRE(rank() >= 1 && begin <= end && end <= shape_[0], "row range out of bounds");
    const std::size_t stride = shape_[0] == 0 ? 0 : data_.size() / shape_[0];
    Shape s = shape_;
    s[0] = end - begin;
    return Array(std::move(s), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                                   data_.begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

bool Array::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool operator==(const Array & a, const Array & b) {
    return a.shape_ == b.shape_ &&
           (a.data_.empty() || std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(double)) == 0);
}

Array concat_rows(std::span<const Array> parts) {
    STREAMHEAD_REQUIRE(!parts.empty(), "nothing to concatenate");
    Shape s = parts[0].shape();
    STREAMHEAD_REQUIRE(!s.empty(), "cannot row-concatenate scalars");
    std::size_t rows = 0;
    std::vector<double> data;
    for (const auto & p : parts) {
        STREAMHEAD_REQUIRE(p.rank() == s.size() && std::equal(s.begin() + 1, s.end(), p.shape().begin() + 1),
                           "trailing shapes differ");
        rows += p.dim(0);
        data.insert(data.end(), p.data().begin(), p.data().end());
    }
    s[0] = rows;
    return Array(std::move(s), std::move(data));
}

} // namespace streamhead::numerics
