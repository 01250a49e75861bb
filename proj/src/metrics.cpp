#include "nvf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nvf/errors.hpp"
#include "nvf/parallel.hpp"
#include "nvf/render.hpp"
#include "nvf/visibility.hpp"

namespace nvf {

double psnr(const Image& a, const Image& b) {
    double m = mse(a, b);
    if (m < 1e-10) return 99.0;
    return 10.0 * std::log10(1.0 / m);
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<size_t>(size));
    double sum = 0.0;
    int half = size / 2;
    for (int i = 0; i < size; ++i) {
        double d = i - half;
        k[static_cast<size_t>(i)] = std::exp(-0.5 * d * d / (sigma * sigma));
        sum += k[static_cast<size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// separable Gaussian filter, valid region only
void gaussian_filter_valid(const std::vector<double>& src, int w, int h,
                           const std::vector<double>& kernel, std::vector<double>& dst, int& vw,
                           int& vh) {
    int ks = static_cast<int>(kernel.size());
    int half = ks / 2;
    vw = w - 2 * half;
    vh = h - 2 * half;
    std::vector<double> tmp(static_cast<size_t>(vw) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int k = 0; k < ks; ++k) s += kernel[static_cast<size_t>(k)] * src[static_cast<size_t>(y) * w + x + k];
            tmp[static_cast<size_t>(y) * vw + x] = s;
        }
    dst.assign(static_cast<size_t>(vw) * vh, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int k = 0; k < ks; ++k) s += kernel[static_cast<size_t>(k)] * tmp[(static_cast<size_t>(y) + k) * vw + x];
            dst[static_cast<size_t>(y) * vw + x] = s;
        }
}

double ssim_channel(const std::vector<double>& x, const std::vector<double>& y, int w, int h) {
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    int win = std::min(11, std::min(w, h));
    if (win % 2 == 0) win -= 1;
    if (win < 1) return 1.0;
    std::vector<double> kernel = gaussian_kernel(win, 1.5);

    size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    int vw, vh;
    std::vector<double> mu_x, mu_y, e_xx, e_yy, e_xy;
    gaussian_filter_valid(x, w, h, kernel, mu_x, vw, vh);
    gaussian_filter_valid(y, w, h, kernel, mu_y, vw, vh);
    gaussian_filter_valid(xx, w, h, kernel, e_xx, vw, vh);
    gaussian_filter_valid(yy, w, h, kernel, e_yy, vw, vh);
    gaussian_filter_valid(xy, w, h, kernel, e_xy, vw, vh);

    double total = 0.0;
    size_t count = mu_x.size();
    for (size_t i = 0; i < count; ++i) {
        double sx = e_xx[i] - mu_x[i] * mu_x[i];
        double sy = e_yy[i] - mu_y[i] * mu_y[i];
        double sxy = e_xy[i] - mu_x[i] * mu_y[i];
        double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * sxy + c2);
        double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (sx + sy + c2);
        total += num / den;
    }
    return count ? total / static_cast<double>(count) : 1.0;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw EvalError("ssim: image size mismatch");
    int w = a.width(), h = a.height();
    size_t n = static_cast<size_t>(w) * h;
    std::vector<double> ca(n), cb(n);
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        for (size_t i = 0; i < n; ++i) {
            ca[i] = a.data()[3 * i + static_cast<size_t>(ch)];
            cb[i] = b.data()[3 * i + static_cast<size_t>(ch)];
        }
        total += ssim_channel(ca, cb, w, h);
    }
    return total / 3.0;
}

namespace {

// Minimal 3D kd-tree for nearest-neighbor queries.
class KdTree {
public:
    explicit KdTree(const std::vector<Vec3>& points) : pts_(points), idx_(points.size()) {
        std::iota(idx_.begin(), idx_.end(), size_t{0});
        if (!pts_.empty()) build(0, pts_.size(), 0);
    }

    double nearest_dist2(const Vec3& q) const {
        double best = 1e300;
        search(q, 0, pts_.size(), 0, best);
        return best;
    }

private:
    void build(size_t lo, size_t hi, int axis) {
        if (hi - lo <= 1) return;
        size_t mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + static_cast<long>(lo), idx_.begin() + static_cast<long>(mid),
                         idx_.begin() + static_cast<long>(hi),
                         [&](size_t a, size_t b) { return pts_[a][axis] < pts_[b][axis]; });
        build(lo, mid, (axis + 1) % 3);
        build(mid + 1, hi, (axis + 1) % 3);
    }

    void search(const Vec3& q, size_t lo, size_t hi, int axis, double& best) const {
        if (lo >= hi) return;
        size_t mid = (lo + hi) / 2;
        const Vec3& p = pts_[idx_[mid]];
        Vec3 d = p - q;
        best = std::min(best, dot(d, d));
        double delta = q[axis] - p[axis];
        int next = (axis + 1) % 3;
        if (delta < 0.0) {
            search(q, lo, mid, next, best);
            if (delta * delta < best) search(q, mid + 1, hi, next, best);
        } else {
            search(q, mid + 1, hi, next, best);
            if (delta * delta < best) search(q, lo, mid, next, best);
        }
    }

    const std::vector<Vec3>& pts_;
    std::vector<size_t> idx_;
};

}  // namespace

GeometryMetrics geometry_metrics(const std::vector<Vec3>& recon_points,
                                 const std::vector<Vec3>& gt_points, double threshold) {
    if (recon_points.empty() || gt_points.empty())
        throw EvalError("geometry_metrics: point sets must be non-empty");
    KdTree gt_tree(gt_points);
    KdTree recon_tree(recon_points);

    GeometryMetrics gm;
    gm.accuracy = parallel_reduce(static_cast<int64_t>(recon_points.size()), 0.0,
                                  [&](int64_t i, double& acc) {
                                      acc += std::sqrt(gt_tree.nearest_dist2(
                                          recon_points[static_cast<size_t>(i)]));
                                  }) /
                  static_cast<double>(recon_points.size());

    struct Acc {
        double dist = 0.0, below = 0.0;
        Acc& operator+=(const Acc& o) {
            dist += o.dist;
            below += o.below;
            return *this;
        }
    };
    Acc comp = parallel_reduce(static_cast<int64_t>(gt_points.size()), Acc{},
                               [&](int64_t i, Acc& acc) {
                                   double d = std::sqrt(
                                       recon_tree.nearest_dist2(gt_points[static_cast<size_t>(i)]));
                                   acc.dist += d;
                                   if (d < threshold) acc.below += 1.0;
                               });
    gm.completion = comp.dist / static_cast<double>(gt_points.size());
    gm.completion_ratio = comp.below / static_cast<double>(gt_points.size());
    return gm;
}

std::vector<Vec3> reconstruct_points(const VoxelField& field, const std::vector<Pose>& poses,
                                     const CameraIntrinsics& intr, int samples_per_ray) {
    std::vector<Vec3> points;
    for (const Pose& pose : poses) {
        ScalarImage depth, wsum;
        render_depth_image(field, pose, intr, samples_per_ray, depth, wsum);
        for (int m = 0; m < intr.height; ++m)
            for (int n = 0; n < intr.width; ++n) {
                if (wsum.at(n, m) < 0.5) continue;
                Ray ray = pixel_ray(pose, intr, m, n);
                points.push_back(ray.at(depth.at(n, m)));
            }
    }
    return points;
}

namespace {

template <bool Parallel>
double coverage_impl(const GroundTruthScene& scene, const std::vector<Pose>& poses,
                     const CameraIntrinsics& intr, double surface_threshold, double tau) {
    SurfaceElementSet elements = extract_surface(scene, surface_threshold);
    if (elements.empty()) return 0.0;
    if (poses.empty()) return 0.0;

    std::vector<char> visible(elements.size(), 0);
    double step = 0.5 * scene.voxel_size;
    auto sigma_at = [&](const Vec3& p) { return scene.density_at(p); };
    auto check = [&](int64_t i) {
        const SurfaceElement& e = elements[static_cast<size_t>(i)];
        for (const Pose& pose : poses) {
            if (dot(e.normal, pose.translation - e.position) <= 0.0) continue;  // back face
            if (!in_frustum(pose, intr, e.position)) continue;
            // stop the march half a voxel early so the face's own solid
            // voxel does not occlude it
            Vec3 target = e.position + e.normal * (0.5 * scene.voxel_size);
            double trans = transmittance_along_segment(sigma_at, pose.translation, target, step);
            if (trans > tau) {
                visible[static_cast<size_t>(i)] = 1;
                return;
            }
        }
    };
    if constexpr (Parallel) {
        parallel_for(static_cast<int64_t>(elements.size()), check);
    } else {
        for (int64_t i = 0; i < static_cast<int64_t>(elements.size()); ++i) check(i);
    }
    int64_t count = 0;
    for (char v : visible) count += v;
    return static_cast<double>(count) / static_cast<double>(elements.size());
}

}  // namespace

double visual_coverage(const GroundTruthScene& scene, const std::vector<Pose>& poses,
                       const CameraIntrinsics& intr, double surface_threshold, double tau) {
    return coverage_impl<true>(scene, poses, intr, surface_threshold, tau);
}

double visual_coverage_serial(const GroundTruthScene& scene, const std::vector<Pose>& poses,
                              const CameraIntrinsics& intr, double surface_threshold, double tau) {
    return coverage_impl<false>(scene, poses, intr, surface_threshold, tau);
}

std::vector<Pose> make_test_poses(const GroundTruthScene& scene, int count, uint64_t seed) {
    std::vector<Pose> poses;
    Rng rng(seed);
    if (scene.interior) {
        // collision-free interior poses, alternating look targets between
        // the two halves of the scene
        Aabb inner = scene.bounds.scaled_about_center(0.9);
        while (static_cast<int>(poses.size()) < count) {
            Vec3 pos = rng.uniform_in(inner);
            if (scene.density_at(pos) > 1.0) continue;
            Vec3 target = rng.uniform_in(scene.bounds.scaled_about_center(0.7));
            if (norm(target - pos) < 0.05) continue;
            poses.push_back({look_at(pos, target), pos});
        }
    } else {
        for (int i = 0; i < count; ++i)
            poses.push_back(sample_pose_shell(scene.bounds, rng, 0.1));
    }
    return poses;
}

MetricsRecord evaluate_field(const VoxelField& field, const GroundTruthScene& scene,
                             const std::vector<Pose>& trajectory, const EvalConfig& cfg,
                             uint64_t seed) {
    MetricsRecord rec;
    CameraIntrinsics intr{cfg.eval_resolution, cfg.eval_resolution, cfg.fov};
    std::vector<Pose> test_poses = make_test_poses(scene, cfg.test_views, seed);
    if (test_poses.empty()) throw EvalError("evaluate_field: empty test-pose set");

    double psnr_sum = 0.0, ssim_sum = 0.0, mse_sum = 0.0;
    for (size_t i = 0; i < test_poses.size(); ++i) {
        Image gt_img;
        ScalarImage gt_depth;
        gt_render(scene, test_poses[i], intr, cfg.eval_samples, seed ^ (0x9e37 + i), gt_img,
                  gt_depth);
        Image pred = render_image(field, test_poses[i], intr, cfg.eval_samples,
                                  seed ^ (0x51ed + i), false);
        psnr_sum += psnr(pred, gt_img);
        ssim_sum += ssim(pred, gt_img);
        mse_sum += mse(pred, gt_img);
    }
    double inv = 1.0 / static_cast<double>(test_poses.size());
    rec.psnr_db = psnr_sum * inv;
    rec.ssim_value = ssim_sum * inv;
    rec.rgb_mse = mse_sum * inv;

    // geometry: gt surface centers vs back-projected depth points
    SurfaceElementSet elements = extract_surface(scene, cfg.surface_threshold);
    std::vector<Vec3> gt_points;
    gt_points.reserve(elements.size());
    if (static_cast<int>(elements.size()) > cfg.max_gt_points) {
        Rng rng(seed ^ 0xfeedULL);
        double keep = static_cast<double>(cfg.max_gt_points) / static_cast<double>(elements.size());
        for (const auto& e : elements)
            if (rng.uniform() < keep) gt_points.push_back(e.position);
    } else {
        for (const auto& e : elements) gt_points.push_back(e.position);
    }
    std::vector<Vec3> recon = reconstruct_points(field, trajectory, intr, cfg.eval_samples);
    rec.cr_threshold = cfg.cr_threshold_frac * scene.bounds.diagonal();
    if (!recon.empty() && !gt_points.empty()) {
        GeometryMetrics gm = geometry_metrics(recon, gt_points, rec.cr_threshold);
        rec.accuracy = gm.accuracy;
        rec.completion = gm.completion;
        rec.completion_ratio = gm.completion_ratio;
    } else {
        rec.completion = scene.bounds.diagonal();  // nothing reconstructed
    }
    rec.visual_coverage =
        visual_coverage(scene, trajectory, intr, cfg.surface_threshold, cfg.coverage_tau);
    return rec;
}

std::string metrics_csv_header() {
    return "step,psnr,ssim,rgb,acc,comp,cr,cr_threshold,vis";
}

std::string metrics_csv_row(int step, const MetricsRecord& rec) {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", step, rec.psnr_db,
                  rec.ssim_value, rec.rgb_mse, rec.accuracy, rec.completion, rec.completion_ratio,
                  rec.cr_threshold, rec.visual_coverage);
    return buf;
}

}  // namespace nvf
