#include "nvf/image.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include "nvf/errors.hpp"

namespace nvf {

Image::Image(int width, int height, const Vec3& fill)
    : width_(width), height_(height), data_(static_cast<size_t>(width) * height * 3) {
    for (int64_t i = 0; i < pixel_count(); ++i) {
        data_[static_cast<size_t>(3 * i) + 0] = fill.x;
        data_[static_cast<size_t>(3 * i) + 1] = fill.y;
        data_[static_cast<size_t>(3 * i) + 2] = fill.z;
    }
}

Vec3 Image::at(int x, int y) const {
    size_t i = (static_cast<size_t>(y) * width_ + x) * 3;
    return {data_[i], data_[i + 1], data_[i + 2]};
}

void Image::set(int x, int y, const Vec3& c) {
    size_t i = (static_cast<size_t>(y) * width_ + x) * 3;
    data_[i] = c.x;
    data_[i + 1] = c.y;
    data_[i + 2] = c.z;
}

ScalarImage::ScalarImage(int width, int height, double fill)
    : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

double ScalarImage::min_value() const {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}
double ScalarImage::max_value() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}
double ScalarImage::mean_value() const {
    if (data_.empty()) return 0.0;
    double s = 0.0;
    for (double v : data_) s += v;
    return s / static_cast<double>(data_.size());
}

static uint8_t to_byte(double v) {
    return static_cast<uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
}

void write_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            Vec3 c = img.at(x, y);
            row[static_cast<size_t>(3 * x) + 0] = to_byte(c.x);
            row[static_cast<size_t>(3 * x) + 1] = to_byte(c.y);
            row[static_cast<size_t>(3 * x) + 2] = to_byte(c.z);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

void write_scalar_ppm(const ScalarImage& img, const std::string& path) {
    double lo = img.min_value(), hi = img.max_value();
    double span = hi - lo;
    if (span < 1e-300) span = 1.0;
    Image rgb(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double t = (img.at(x, y) - lo) / span;
            // dark blue -> yellow linear ramp
            rgb.set(x, y, {t, 0.1 + 0.8 * t, 0.4 * (1.0 - t) + 0.1});
        }
    }
    write_ppm(rgb, path);
    std::ofstream side(path + ".scale.txt");
    side << "# linear colormap: value -> rgb(t, 0.1+0.8t, 0.5-0.4t), t=(v-min)/(max-min)\n";
    side << "min_nats " << lo << "\n";
    side << "max_nats " << hi << "\n";
}

double mse(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw EvalError("mse: image size mismatch");
    const auto& da = a.data();
    const auto& db = b.data();
    double s = 0.0;
    for (size_t i = 0; i < da.size(); ++i) {
        double d = da[i] - db[i];
        s += d * d;
    }
    return da.empty() ? 0.0 : s / static_cast<double>(da.size());
}

}  // namespace nvf
