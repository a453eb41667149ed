// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace icdbert {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// Row-major 0/1 matrix (examples x labels).
struct BitMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> data;

    BitMatrix() = default;
    BitMatrix(std::size_t r, std::size_t c, std::uint8_t fill = 0) : rows(r), cols(c), data(r * c, fill) {}

    std::uint8_t& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    std::uint8_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    friend bool operator==(const BitMatrix&, const BitMatrix&) = default;
};

}  // namespace icdbert
