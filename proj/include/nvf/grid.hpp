#pragma once

#include <cstdint>
#include <vector>

#include "nvf/vec.hpp"

namespace nvf {

// Dense multi-channel voxel grid. Values live at node centers arranged on a
// res^3 lattice; stored as f32 so the on-disk format round-trips bit-exactly.
class Grid3 {
public:
    Grid3() = default;
    Grid3(int nx, int ny, int nz, int channels, float fill = 0.0f)
        : nx_(nx), ny_(ny), nz_(nz), channels_(channels),
          data_(static_cast<size_t>(nx) * ny * nz * channels, fill) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    int channels() const { return channels_; }
    int64_t node_count() const { return static_cast<int64_t>(nx_) * ny_ * nz_; }

    size_t index(int ix, int iy, int iz, int c = 0) const {
        return ((static_cast<size_t>(iz) * ny_ + iy) * nx_ + ix) * channels_ + c;
    }
    float at(int ix, int iy, int iz, int c = 0) const { return data_[index(ix, iy, iz, c)]; }
    float& at(int ix, int iy, int iz, int c = 0) { return data_[index(ix, iy, iz, c)]; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    bool operator==(const Grid3& o) const = default;

    // Trilinear sample of one channel at continuous node coordinates
    // (0..n-1); clamps to the boundary.
    double sample(double gx, double gy, double gz, int c) const;

    // Corner nodes and weights used by `sample`; for scattering gradients
    // back to the parameter lattice.
    struct Stencil {
        size_t node[8];    // channel-0 index of each corner
        double weight[8];
    };
    Stencil stencil(double gx, double gy, double gz) const;

private:
    int nx_ = 0, ny_ = 0, nz_ = 0, channels_ = 1;
    std::vector<float> data_;
};

}  // namespace nvf
