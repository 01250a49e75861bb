#include "nvf/grid.hpp"

#include <algorithm>
#include <cmath>

namespace nvf {

Grid3::Stencil Grid3::stencil(double gx, double gy, double gz) const {
    gx = std::clamp(gx, 0.0, static_cast<double>(nx_ - 1));
    gy = std::clamp(gy, 0.0, static_cast<double>(ny_ - 1));
    gz = std::clamp(gz, 0.0, static_cast<double>(nz_ - 1));
    int x0 = std::min(static_cast<int>(gx), nx_ - 2 >= 0 ? nx_ - 2 : 0);
    int y0 = std::min(static_cast<int>(gy), ny_ - 2 >= 0 ? ny_ - 2 : 0);
    int z0 = std::min(static_cast<int>(gz), nz_ - 2 >= 0 ? nz_ - 2 : 0);
    double fx = gx - x0, fy = gy - y0, fz = gz - z0;
    int x1 = std::min(x0 + 1, nx_ - 1);
    int y1 = std::min(y0 + 1, ny_ - 1);
    int z1 = std::min(z0 + 1, nz_ - 1);

    Stencil s;
    const int xs[2] = {x0, x1}, ys[2] = {y0, y1}, zs[2] = {z0, z1};
    const double wx[2] = {1.0 - fx, fx}, wy[2] = {1.0 - fy, fy}, wz[2] = {1.0 - fz, fz};
    int k = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx, ++k) {
                s.node[k] = index(xs[dx], ys[dy], zs[dz], 0);
                s.weight[k] = wx[dx] * wy[dy] * wz[dz];
            }
    return s;
}

double Grid3::sample(double gx, double gy, double gz, int c) const {
    Stencil s = stencil(gx, gy, gz);
    double v = 0.0;
    for (int k = 0; k < 8; ++k) v += s.weight[k] * data_[s.node[k] + c];
    return v;
}

}  // namespace nvf
