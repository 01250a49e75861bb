#pragma once

#include <array>

#include "nvf/rng.hpp"
#include "nvf/vec.hpp"

namespace nvf {

// Rigid camera-to-world transform. `rotation` columns are the camera axes in
// world coordinates; the optical axis is the +z column.
struct Pose {
    Mat3 rotation;
    Vec3 translation;

    Vec3 apply(const Vec3& p_cam) const { return rotation * p_cam + translation; }
    Vec3 optical_axis() const { return rotation.col(2); }

    Pose composed(const Pose& rhs) const {
        return {rotation * rhs.rotation, rotation * rhs.translation + translation};
    }
};

struct CameraIntrinsics {
    int width = 0;
    int height = 0;
    double vertical_fov = 1.0;  // radians, in (0, pi)

    // angular resolution per pixel
    double dphi() const { return vertical_fov / height; }
    double focal() const;  // pixels
};

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit
    double t_near = 0.0;
    double t_far = 0.0;

    Vec3 at(double t) const { return origin + direction * t; }
};

// Ray through the center of pixel (row m, column n), world frame.
// Throws IndexError when the pixel index is out of range.
Ray pixel_ray(const Pose& pose, const CameraIntrinsics& intr, int m, int n);

// Restrict a ray's [t_near, t_far] to its overlap with `box` (grown by
// `pad`). Returns false when the ray misses entirely.
bool clip_ray_to_box(Ray& ray, const Aabb& box, double pad = 0.0);

// Orientation looking from `eye` toward `target`, z-up preference.
Mat3 look_at(const Vec3& eye, const Vec3& target);

// Candidate-pose prior: position uniform in the shell between `bounds`
// (scaled about its center by `inner_scale`) and an outer box grown by
// `margin_scale * diagonal`; orientation looks at a point jittered inside
// `bounds` by `look_at_jitter` (fraction of the diagonal).
Pose sample_pose_shell(const Aabb& bounds, Rng& rng, double look_at_jitter,
                       double margin_scale = 0.5, double inner_scale = 1.0);

// Right-perturbation by the SE(3) exponential of (rotation, translation)
// increments; the rotation is re-orthonormalized after composition.
Pose perturb_pose(const Pose& pose, const std::array<double, 6>& delta);

}  // namespace nvf
