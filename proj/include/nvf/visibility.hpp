#pragma once

#include <cmath>
#include <vector>

#include "nvf/geometry.hpp"

namespace nvf {

// Midpoint-rule transmittance exp(-integral sigma) along the segment a->b.
template <class DensityFn>
double transmittance_along_segment(DensityFn&& sigma_at, const Vec3& a, const Vec3& b,
                                   double step) {
    Vec3 d = b - a;
    double len = norm(d);
    if (len < 1e-12) return 1.0;
    int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    double h = len / n;
    Vec3 dir = d / len;
    double tau = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec3 x = a + dir * ((i + 0.5) * h);
        tau += sigma_at(x) * h;
    }
    return std::exp(-tau);
}

// Projection test with the boundary counted as inside (deterministic
// tie-break). Returns false for points at or behind the camera plane.
inline bool in_frustum(const Pose& pose, const CameraIntrinsics& intr, const Vec3& x) {
    Vec3 p_cam = pose.rotation.transposed() * (x - pose.translation);
    if (p_cam.z <= 1e-12) return false;
    double f = intr.focal();
    double px = f * p_cam.x / p_cam.z + 0.5 * intr.width;
    double py = f * p_cam.y / p_cam.z + 0.5 * intr.height;
    return px >= 0.0 && px <= intr.width && py >= 0.0 && py <= intr.height;
}

// v_P(x) = 1 - prod_p (1 - v_p(x)), v_p = transmittance camera->x when x is
// inside p's frustum, else 0. The empty pose set yields exactly 0.
template <class DensityFn>
double visibility_to_cameras(DensityFn&& sigma_at, const Vec3& x, const std::vector<Pose>& poses,
                             const CameraIntrinsics& intr, double march_step) {
    double prod = 1.0;
    for (const Pose& p : poses) {
        if (!in_frustum(p, intr, x)) continue;
        double vp = transmittance_along_segment(sigma_at, p.translation, x, march_step);
        prod *= (1.0 - vp);
        if (prod < 1e-15) return 1.0 - prod;
    }
    return 1.0 - prod;
}

}  // namespace nvf
