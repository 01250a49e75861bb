#include "nvf/vec.hpp"

namespace nvf {

Mat3 rotation_exp(const Vec3& w) {
    double theta2 = dot(w, w);
    double theta = std::sqrt(theta2);
    // K = hat(w)
    Mat3 k;
    k(0, 0) = 0;     k(0, 1) = -w.z;  k(0, 2) = w.y;
    k(1, 0) = w.z;   k(1, 1) = 0;     k(1, 2) = -w.x;
    k(2, 0) = -w.y;  k(2, 1) = w.x;   k(2, 2) = 0;

    double a, b;  // R = I + a*K + b*K^2
    if (theta < 1e-8) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    Mat3 k2 = k * k;
    Mat3 r = Mat3::identity();
    for (int i = 0; i < 9; ++i) r.m[i] += a * k.m[i] + b * k2.m[i];
    return r;
}

Mat3 orthonormalized(const Mat3& m) {
    Vec3 c0 = normalized(m.col(0));
    Vec3 c1 = m.col(1) - c0 * dot(c0, m.col(1));
    c1 = normalized(c1);
    Vec3 c2 = cross(c0, c1);  // forces det = +1
    return Mat3::from_cols(c0, c1, c2);
}

bool intersect_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box,
                    double& t_enter, double& t_exit) {
    double t0 = -1e300, t1 = 1e300;
    for (int i = 0; i < 3; ++i) {
        double o = origin[i], d = dir[i];
        if (std::abs(d) < 1e-15) {
            if (o < box.min[i] || o > box.max[i]) return false;
            continue;
        }
        double inv = 1.0 / d;
        double ta = (box.min[i] - o) * inv;
        double tb = (box.max[i] - o) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    t_enter = t0;
    t_exit = t1;
    return true;
}

}  // namespace nvf
