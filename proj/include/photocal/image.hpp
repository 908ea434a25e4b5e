#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "photocal/errors.hpp"

namespace photocal {

// Row-major 2-D grid. Sample coordinates are pixel indices: the value of
// pixel (i, j) lives at continuous coordinate (x=i, y=j).
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : w_(width), h_(height), data_(static_cast<size_t>(width) * height, fill) {
        if (width <= 0 || height <= 0)
            throw DomainError("Image: non-positive dimensions");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    bool empty() const { return data_.empty(); }

    T& at(int x, int y) { return data_[static_cast<size_t>(y) * w_ + x]; }
    const T& at(int x, int y) const { return data_[static_cast<size_t>(y) * w_ + x]; }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    bool inside(double x, double y, double border = 0.0) const {
        return x >= border && y >= border && x <= w_ - 1 - border && y <= h_ - 1 - border;
    }

    // Bilinear interpolation; caller guarantees inside(x, y).
    double bilinear(double x, double y) const {
        int x0 = static_cast<int>(std::floor(x));
        int y0 = static_cast<int>(std::floor(y));
        if (x0 >= w_ - 1) x0 = w_ - 2;
        if (y0 >= h_ - 1) y0 = h_ - 2;
        if (x0 < 0) x0 = 0;
        if (y0 < 0) y0 = 0;
        const double fx = x - x0;
        const double fy = y - y0;
        const double v00 = static_cast<double>(at(x0, y0));
        const double v10 = static_cast<double>(at(x0 + 1, y0));
        const double v01 = static_cast<double>(at(x0, y0 + 1));
        const double v11 = static_cast<double>(at(x0 + 1, y0 + 1));
        return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 +
               fx * fy * v11;
    }

    // Exact gradient of the bilinear interpolant at (x, y).
    std::pair<double, double> bilinear_grad(double x, double y) const {
        int x0 = static_cast<int>(std::floor(x));
        int y0 = static_cast<int>(std::floor(y));
        if (x0 >= w_ - 1) x0 = w_ - 2;
        if (y0 >= h_ - 1) y0 = h_ - 2;
        if (x0 < 0) x0 = 0;
        if (y0 < 0) y0 = 0;
        const double fx = x - x0;
        const double fy = y - y0;
        const double v00 = static_cast<double>(at(x0, y0));
        const double v10 = static_cast<double>(at(x0 + 1, y0));
        const double v01 = static_cast<double>(at(x0, y0 + 1));
        const double v11 = static_cast<double>(at(x0 + 1, y0 + 1));
        const double gx = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
        const double gy = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
        return {gx, gy};
    }

    bool operator==(const Image& other) const {
        return w_ == other.w_ && h_ == other.h_ && data_ == other.data_;
    }

private:
    int w_ = 0;
    int h_ = 0;
    std::vector<T> data_;
};

// 2x2 mean downsampling (odd trailing row/column folded into the last cell).
template <typename T>
Image<double> half_sample(const Image<T>& src) {
    const int w = src.width() / 2;
    const int h = src.height() / 2;
    Image<double> out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = 0.25 * (static_cast<double>(src.at(2 * x, 2 * y)) +
                                   static_cast<double>(src.at(2 * x + 1, 2 * y)) +
                                   static_cast<double>(src.at(2 * x, 2 * y + 1)) +
                                   static_cast<double>(src.at(2 * x + 1, 2 * y + 1)));
    return out;
}

// Coordinate mapping between pyramid levels: pixel centers align so that
// x_l = (x_0 + 0.5) / 2^l - 0.5.
inline double to_level(double x0, int level) {
    return (x0 + 0.5) / static_cast<double>(1 << level) - 0.5;
}

}  // namespace photocal
