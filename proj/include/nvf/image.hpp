#pragma once

#include <string>
#include <vector>

#include "nvf/vec.hpp"

namespace nvf {

// RGB image, values nominally in [0,1], row-major from the top-left.
class Image {
public:
    Image() = default;
    Image(int width, int height, const Vec3& fill = {0, 0, 0});

    int width() const { return width_; }
    int height() const { return height_; }
    int64_t pixel_count() const { return static_cast<int64_t>(width_) * height_; }

    Vec3 at(int x, int y) const;
    void set(int x, int y, const Vec3& c);

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    int width_ = 0, height_ = 0;
    std::vector<double> data_;  // 3 doubles per pixel
};

// Scalar raster (depth maps, entropy maps).
class ScalarImage {
public:
    ScalarImage() = default;
    ScalarImage(int width, int height, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    double at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }
    void set(int x, int y, double v) { data_[static_cast<size_t>(y) * width_ + x] = v; }
    const std::vector<double>& data() const { return data_; }
    double min_value() const;
    double max_value() const;
    double mean_value() const;

private:
    int width_ = 0, height_ = 0;
    std::vector<double> data_;
};

// Binary P6 PPM, 8-bit, values clamped to [0,1].
void write_ppm(const Image& img, const std::string& path);

// Linear grayscale->viridis-like ramp over [lo,hi]; writes the PPM plus a
// sidecar "<path>.scale.txt" recording min/max so maps remain comparable.
void write_scalar_ppm(const ScalarImage& img, const std::string& path);

double mse(const Image& a, const Image& b);

}  // namespace nvf
