#include "nvf/geometry.hpp"

#include <cmath>
#include <string>

#include "nvf/errors.hpp"

namespace nvf {

double CameraIntrinsics::focal() const {
    return 0.5 * height / std::tan(0.5 * vertical_fov);
}

Ray pixel_ray(const Pose& pose, const CameraIntrinsics& intr, int m, int n) {
    if (m < 0 || m >= intr.height || n < 0 || n >= intr.width)
        throw IndexError("pixel_ray: pixel (" + std::to_string(m) + "," + std::to_string(n) +
                         ") outside " + std::to_string(intr.height) + "x" +
                         std::to_string(intr.width) + " image");
    double f = intr.focal();
    Vec3 dir_cam{(n + 0.5 - 0.5 * intr.width) / f, (m + 0.5 - 0.5 * intr.height) / f, 1.0};
    Ray ray;
    ray.origin = pose.translation;
    ray.direction = normalized(pose.rotation * dir_cam);
    ray.t_near = 0.0;
    ray.t_far = 1e9;
    return ray;
}

bool clip_ray_to_box(Ray& ray, const Aabb& box, double pad) {
    double t0, t1;
    if (!intersect_aabb(ray.origin, ray.direction, box.grown(pad), t0, t1)) return false;
    if (t1 <= 0.0) return false;
    ray.t_near = std::max(t0, 0.0);
    ray.t_far = t1;
    return ray.t_far > ray.t_near;
}

Mat3 look_at(const Vec3& eye, const Vec3& target) {
    Vec3 fwd = target - eye;
    double len = norm(fwd);
    if (len < 1e-12) return Mat3::identity();
    fwd = fwd / len;
    Vec3 up{0, 0, 1};
    if (std::abs(dot(fwd, up)) > 0.999) up = Vec3{0, 1, 0};
    Vec3 right = normalized(cross(up, fwd));
    Vec3 down = cross(fwd, right);  // camera +y points "down" in world z-up
    return Mat3::from_cols(right, down, fwd);
}

Pose sample_pose_shell(const Aabb& bounds, Rng& rng, double look_at_jitter,
                       double margin_scale, double inner_scale) {
    double diag = bounds.diagonal();
    Aabb outer = bounds.grown(margin_scale * diag);
    Aabb inner = bounds.scaled_about_center(inner_scale);
    bool degenerate_inner = inner_scale <= 0.0;

    Vec3 pos;
    for (int attempt = 0;; ++attempt) {
        pos = rng.uniform_in(outer);
        if (degenerate_inner || !inner.contains(pos)) break;
        if (attempt > 10000) break;  // inner ~ outer; accept rather than spin
    }

    Vec3 target = bounds.center();
    if (look_at_jitter > 0.0) {
        target += Vec3{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)} *
                  (look_at_jitter * diag);
        target = cwise_max(bounds.min, cwise_min(bounds.max, target));
    }
    return Pose{look_at(pos, target), pos};
}

Pose perturb_pose(const Pose& pose, const std::array<double, 6>& delta) {
    Vec3 w{delta[0], delta[1], delta[2]};
    Vec3 u{delta[3], delta[4], delta[5]};

    if (dot(w, w) == 0.0) {
        // pure translation: keep the rotation bit-exact
        return Pose{pose.rotation, pose.rotation * u + pose.translation};
    }

    Mat3 rot_d = rotation_exp(w);

    // V(w) * u : translation part of the SE(3) exponential
    double theta2 = dot(w, w);
    double theta = std::sqrt(theta2);
    double b, c;  // V = I + b*K + c*K^2
    if (theta < 1e-8) {
        b = 0.5 - theta2 / 24.0;
        c = 1.0 / 6.0 - theta2 / 120.0;
    } else {
        b = (1.0 - std::cos(theta)) / theta2;
        c = (theta - std::sin(theta)) / (theta2 * theta);
    }
    Vec3 wxu = cross(w, u);
    Vec3 t_d = u + b * wxu + c * cross(w, wxu);

    Pose out;
    out.rotation = orthonormalized(pose.rotation * rot_d);
    out.translation = pose.rotation * t_d + pose.translation;
    return out;
}

}  // namespace nvf
