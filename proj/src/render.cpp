#include "nvf/render.hpp"

#include <cmath>

#include "nvf/errors.hpp"
#include "nvf/parallel.hpp"

namespace nvf {

std::vector<double> sample_ray(const Ray& ray, int n, Rng* rng, bool stratified) {
    if (n < 2) throw ConfigError("sample_ray: need at least 2 samples");
    std::vector<double> t(static_cast<size_t>(n));
    double bin = (ray.t_far - ray.t_near) / n;
    for (int i = 0; i < n; ++i) {
        double u = stratified ? rng->uniform() : 0.5;
        t[static_cast<size_t>(i)] = ray.t_near + (i + u) * bin;
    }
    return t;
}

RaySamples gather_samples(const VoxelField& field, const Ray& ray,
                          const std::vector<double>& depths) {
    RaySamples out;
    size_t n = depths.size();
    out.t = depths;
    out.s.resize(n);
    out.values.resize(n);
    double bin = n > 0 ? (ray.t_far - ray.t_near) / static_cast<double>(n) : 0.0;
    for (size_t i = 0; i < n; ++i) {
        out.s[i] = (i + 1 < n) ? depths[i + 1] - depths[i] : bin;
        out.values[i] = field.query(ray.at(depths[i]));
    }
    return out;
}

std::vector<double> transmittance(const RaySamples& samples) {
    size_t n = samples.size();
    std::vector<double> t_out(n);
    double tau = 0.0;
    for (size_t i = 0; i < n; ++i) {
        t_out[i] = std::exp(-tau);
        tau += samples.values[i].sigma * samples.s[i];
    }
    return t_out;
}

void weights_from_alphas(const std::vector<double>& alphas, std::vector<double>& w, double& w_bg) {
    size_t n = alphas.size();
    w.resize(n);
    double prod = 1.0;
    for (size_t i = 0; i < n; ++i) {
        w[i] = alphas[i] * prod;
        prod *= (1.0 - alphas[i]);
    }
    w_bg = prod;
}

RayWeights alpha_weights(const RaySamples& samples) {
    RayWeights out;
    size_t n = samples.size();
    out.alpha.resize(n);
    for (size_t i = 0; i < n; ++i)
        out.alpha[i] = 1.0 - std::exp(-samples.values[i].sigma * samples.s[i]);
    weights_from_alphas(out.alpha, out.w, out.w_bg);
    return out;
}

std::vector<double> composite_alphas(const RaySamples& samples, double beta, double sigma0) {
    size_t n = samples.size();
    std::vector<double> a(n);
    for (size_t i = 0; i < n; ++i) {
        const FieldSample& fs = samples.values[i];
        double v = fs.vis;
        double alpha_pred = 1.0 - std::exp(-fs.sigma * samples.s[i]);
        double alpha_prior = 1.0 - std::exp(-sigma0 * samples.s[i]);
        a[i] = (v + (1.0 - v) * beta) * alpha_pred + (1.0 - beta) * (1.0 - v) * alpha_prior;
    }
    return a;
}

Vec3 render_color(const VoxelField& field, const Ray& ray, int n, Rng* rng, bool stratified) {
    if (ray.t_far <= ray.t_near) return field.background();
    RaySamples samples = gather_samples(field, ray, sample_ray(ray, n, rng, stratified));
    RayWeights rw = alpha_weights(samples);
    Vec3 c{0, 0, 0};
    for (size_t i = 0; i < samples.size(); ++i) c += samples.values[i].mu_c * rw.w[i];
    return c + field.background() * rw.w_bg;
}

double render_depth(const VoxelField& field, const Ray& ray, int n, Rng* rng,
                    DepthWeightMode mode, double beta, double sigma0, bool stratified) {
    if (ray.t_far <= ray.t_near) return 0.0;
    RaySamples samples = gather_samples(field, ray, sample_ray(ray, n, rng, stratified));
    std::vector<double> w;
    double w_bg;
    if (mode == DepthWeightMode::standard) {
        RayWeights rw = alpha_weights(samples);
        w = std::move(rw.w);
    } else {
        weights_from_alphas(composite_alphas(samples, beta, sigma0), w, w_bg);
    }
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        num += w[i] * samples.t[i];
        den += w[i];
    }
    return den < 1e-6 ? 0.0 : num / den;
}

namespace {

template <bool Parallel>
Image render_image_impl(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                        int n, uint64_t seed, bool stratified) {
    Image img(intr.width, intr.height, field.background());
    Rng base(seed);
    auto shade = [&](int64_t idx) {
        int m = static_cast<int>(idx) / intr.width;
        int col = static_cast<int>(idx) % intr.width;
        Ray ray = pixel_ray(pose, intr, m, col);
        if (!clip_ray_to_box(ray, field.bounds(), field.voxel_size())) return;
        Rng rng = base.substream(static_cast<uint64_t>(idx));
        img.set(col, m, render_color(field, ray, n, &rng, stratified));
    };
    int64_t count = static_cast<int64_t>(intr.width) * intr.height;
    if constexpr (Parallel) {
        parallel_for(count, shade);
    } else {
        for (int64_t i = 0; i < count; ++i) shade(i);
    }
    return img;
}

}  // namespace

Image render_image(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                   int samples_per_ray, uint64_t seed, bool stratified) {
    return render_image_impl<true>(field, pose, intr, samples_per_ray, seed, stratified);
}

Image render_image_serial(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                          int samples_per_ray, uint64_t seed, bool stratified) {
    return render_image_impl<false>(field, pose, intr, samples_per_ray, seed, stratified);
}

void render_depth_image(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                        int samples_per_ray, ScalarImage& depth_out, ScalarImage& wsum_out) {
    depth_out = ScalarImage(intr.width, intr.height, 0.0);
    wsum_out = ScalarImage(intr.width, intr.height, 0.0);
    parallel_for(static_cast<int64_t>(intr.width) * intr.height, [&](int64_t idx) {
        int m = static_cast<int>(idx) / intr.width;
        int col = static_cast<int>(idx) % intr.width;
        Ray ray = pixel_ray(pose, intr, m, col);
        if (!clip_ray_to_box(ray, field.bounds(), field.voxel_size())) return;
        RaySamples samples =
            gather_samples(field, ray, sample_ray(ray, samples_per_ray, nullptr, false));
        RayWeights rw = alpha_weights(samples);
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < samples.size(); ++i) {
            num += rw.w[i] * samples.t[i];
            den += rw.w[i];
        }
        wsum_out.set(col, m, den);
        depth_out.set(col, m, den < 1e-6 ? 0.0 : num / den);
    });
}

}  // namespace nvf
