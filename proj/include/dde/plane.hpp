#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "dde/error.hpp"

namespace dde {

// Derived planes (indices, probabilities, MDM) mark missing pixels with NaN.
inline constexpr float kNoDataF = std::numeric_limits<float>::quiet_NaN();
inline constexpr double kNoDataD = std::numeric_limits<double>::quiet_NaN();

template <class T>
inline bool is_missing(T v) {
    if constexpr (std::is_floating_point_v<T>) {
        return std::isnan(v);
    } else {
        return false;
    }
}

// Row-major 2-D array.
template <class T>
class Plane {
public:
    Plane() = default;
    Plane(std::size_t width, std::size_t height, T fill = T{})
        : width_(width), height_(height), data_(width * height, fill) {}
    Plane(std::size_t width, std::size_t height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (data_.size() != width_ * height_) {
            throw ArgumentError("plane payload size does not match dimensions");
        }
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
    const T& operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * width_, width_}; }
    std::span<T> row(std::size_t r) { return {data_.data() + r * width_, width_}; }

    bool same_shape(const Plane& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    template <class U>
    bool same_shape(const Plane<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Plane& a, const Plane& b) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<T> data_;
};

using FloatPlane = Plane<float>;
using DoublePlane = Plane<double>;
using MaskPlane = Plane<std::uint8_t>;

}  // namespace dde
