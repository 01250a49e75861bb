#include "nvf/train.hpp"

#include <cmath>
#include <cstring>

#include "nvf/errors.hpp"
#include "nvf/parallel.hpp"
#include "nvf/uncertainty.hpp"

namespace nvf {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

struct Adam {
    std::vector<double> m, v;
    double beta1, beta2, eps;
    int64_t t = 0;

    Adam(size_t n, const TrainConfig& cfg)
        : m(n, 0.0), v(n, 0.0), beta1(cfg.adam_beta1), beta2(cfg.adam_beta2), eps(cfg.adam_eps) {}

    void step(std::vector<float>& params, const std::vector<double>& grad, double lr) {
        ++t;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            double g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            double mh = m[i] / c1;
            double vh = v[i] / c2;
            params[i] = static_cast<float>(params[i] - lr * mh / (std::sqrt(vh) + eps));
        }
    }
};

int grad_threads() {
#ifdef _OPENMP
    int n = num_threads();
    return n > 0 ? n : omp_get_max_threads();
#else
    return 1;
#endif
}

// Per-thread dense gradient buffers merged in thread order, so batch
// gradients are identical from run to run for a fixed thread count.
struct GradBank {
    std::vector<std::vector<double>> slots;

    GradBank(int threads, size_t n) : slots(static_cast<size_t>(std::max(1, threads))) {
        for (auto& s : slots) s.assign(n, 0.0);
    }
    std::vector<double>& local() {
#ifdef _OPENMP
        int t = omp_in_parallel() ? omp_get_thread_num() : 0;
        return slots[static_cast<size_t>(t) % slots.size()];
#else
        return slots[0];
#endif
    }
    void reduce_into(std::vector<double>& out) const {
        out.assign(slots[0].size(), 0.0);
        for (const auto& s : slots)
            for (size_t i = 0; i < s.size(); ++i) out[i] += s[i];
    }
};

struct TracedSample {
    Grid3::Stencil st;
    double t = 0.0, s = 0.0;
};

// Sample positions and interpolation stencils along a ray; false on miss.
bool trace_samples(const VoxelField& field, const Ray& ray_in, int n, bool stratified,
                   uint64_t noise_seed, std::vector<TracedSample>& out) {
    Ray ray = ray_in;
    // pad 0: every traced sample stays inside the bounds, where the clamped
    // stencil agrees with field.query
    if (!clip_ray_to_box(ray, field.bounds(), 0.0)) return false;
    Rng rng(noise_seed);
    std::vector<double> depths = sample_ray(ray, n, &rng, stratified);
    out.resize(depths.size());
    double bin = (ray.t_far - ray.t_near) / static_cast<double>(n);
    for (size_t i = 0; i < depths.size(); ++i) {
        Vec3 x = ray.at(depths[i]);
        double gx, gy, gz;
        field.grid_coords(x, gx, gy, gz);
        out[i].st = field.raw_density().stencil(gx, gy, gz);
        out[i].t = depths[i];
        out[i].s = (i + 1 < depths.size()) ? depths[i + 1] - depths[i] : bin;
    }
    return true;
}

double interp1(const Grid3& g, const Grid3::Stencil& st) {
    const float* data = g.data().data();
    double v = 0.0;
    for (int k = 0; k < 8; ++k) v += st.weight[k] * data[st.node[k]];
    return v;
}

Vec3 interp3(const Grid3& g, const Grid3::Stencil& st) {
    const float* data = g.data().data();
    Vec3 v{0, 0, 0};
    for (int k = 0; k < 8; ++k) {
        double w = st.weight[k];
        size_t base = st.node[k] * 3;
        v.x += w * data[base];
        v.y += w * data[base + 1];
        v.z += w * data[base + 2];
    }
    return v;
}

}  // namespace

double mse_loss_and_grad(const VoxelField& field, const std::vector<RayTask>& rays,
                         int samples_per_ray, bool stratified, std::vector<double>* grad_density,
                         std::vector<double>* grad_color) {
    if (rays.empty()) return 0.0;
    const Grid3& gd = field.raw_density();
    const Grid3& gc = field.raw_color();
    size_t nodes = static_cast<size_t>(gd.node_count());
    const Vec3 bg = field.background();
    const bool want_grad = grad_density != nullptr && grad_color != nullptr;

    GradBank bank_d(want_grad ? grad_threads() : 1, want_grad ? nodes : 0);
    GradBank bank_c(want_grad ? grad_threads() : 1, want_grad ? 3 * nodes : 0);

    const double inv_rays = 1.0 / static_cast<double>(rays.size());
    double loss = parallel_reduce(static_cast<int64_t>(rays.size()), 0.0, [&](int64_t ri, double& acc) {
        const RayTask& task = rays[static_cast<size_t>(ri)];
        thread_local std::vector<TracedSample> sten;
        if (!trace_samples(field, task.ray, samples_per_ray, stratified, task.noise_seed, sten)) {
            Vec3 r = bg - task.target;
            acc += (r.x * r.x + r.y * r.y + r.z * r.z) / 3.0;
            return;
        }
        const size_t n = sten.size();
        thread_local std::vector<double> raw_d, sigma, alpha, trans;
        thread_local std::vector<Vec3> color;
        raw_d.resize(n);
        sigma.resize(n);
        alpha.resize(n);
        trans.resize(n + 1);
        color.resize(n);

        for (size_t i = 0; i < n; ++i) {
            raw_d[i] = interp1(gd, sten[i].st);
            sigma[i] = softplus(raw_d[i]);
            alpha[i] = 1.0 - std::exp(-sigma[i] * sten[i].s);
            Vec3 rc = interp3(gc, sten[i].st);
            color[i] = {sigmoid(rc.x), sigmoid(rc.y), sigmoid(rc.z)};
        }
        trans[0] = 1.0;
        for (size_t i = 0; i < n; ++i) trans[i + 1] = trans[i] * (1.0 - alpha[i]);

        Vec3 c_hat{0, 0, 0};
        for (size_t i = 0; i < n; ++i) c_hat += color[i] * (trans[i] * alpha[i]);
        c_hat += bg * trans[n];

        Vec3 resid = c_hat - task.target;
        acc += (resid.x * resid.x + resid.y * resid.y + resid.z * resid.z) / 3.0;
        if (!want_grad) return;

        Vec3 dC = resid * (2.0 / 3.0 * inv_rays);

        // tail[i]: color the ray would return when it reaches sample i
        thread_local std::vector<Vec3> tail;
        tail.resize(n + 1);
        tail[n] = bg;
        for (size_t i = n; i-- > 0;) tail[i] = color[i] * alpha[i] + tail[i + 1] * (1.0 - alpha[i]);

        std::vector<double>& gdst = bank_d.local();
        std::vector<double>& gcst = bank_c.local();
        for (size_t i = 0; i < n; ++i) {
            const auto& st = sten[i].st;
            double w_i = trans[i] * alpha[i];
            Vec3 dcol{dC.x * w_i * color[i].x * (1.0 - color[i].x),
                      dC.y * w_i * color[i].y * (1.0 - color[i].y),
                      dC.z * w_i * color[i].z * (1.0 - color[i].z)};
            // d c_hat / d alpha_i = T_i (c_i - tail_{i+1})
            double dalpha = dot(dC, (color[i] - tail[i + 1]) * trans[i]);
            double dsigma = dalpha * sten[i].s * std::exp(-sigma[i] * sten[i].s);
            double draw = dsigma * sigmoid(raw_d[i]);  // softplus'
            for (int k = 0; k < 8; ++k) {
                double w = st.weight[k];
                gdst[st.node[k]] += w * draw;
                size_t cbase = st.node[k] * 3;
                gcst[cbase] += w * dcol.x;
                gcst[cbase + 1] += w * dcol.y;
                gcst[cbase + 2] += w * dcol.z;
            }
        }
    });

    if (want_grad) {
        bank_d.reduce_into(*grad_density);
        bank_c.reduce_into(*grad_color);
    }
    return loss * inv_rays;
}

double nll_loss_and_grad(const VoxelField& field, const std::vector<RayTask>& rays,
                         int samples_per_ray, bool stratified, std::vector<double>* grad_variance,
                         int* skipped) {
    if (skipped) *skipped = 0;
    if (rays.empty()) return 0.0;
    const Grid3& gd = field.raw_density();
    const Grid3& gc = field.raw_color();
    const Grid3& gq = field.raw_variance();
    size_t nodes = static_cast<size_t>(gd.node_count());
    const double floor_v = field.variance_floor();
    const bool want_grad = grad_variance != nullptr;
    constexpr double kTwoPi = 6.283185307179586;
    constexpr double kWeightEps = 1e-12;

    GradBank bank_q(want_grad ? grad_threads() : 1, want_grad ? 3 * nodes : 0);

    struct Acc {
        double loss = 0.0;
        double count = 0.0;
        Acc& operator+=(const Acc& o) {
            loss += o.loss;
            count += o.count;
            return *this;
        }
    };

    Acc total = parallel_reduce(static_cast<int64_t>(rays.size()), Acc{}, [&](int64_t ri, Acc& acc) {
        const RayTask& task = rays[static_cast<size_t>(ri)];
        thread_local std::vector<TracedSample> sten;
        if (!trace_samples(field, task.ray, samples_per_ray, stratified, task.noise_seed, sten))
            return;  // escaped (missed bounds entirely)
        const size_t n = sten.size();

        thread_local std::vector<double> w, ll, raw_q0, raw_q1, raw_q2;
        thread_local std::vector<Vec3> q, mu;
        w.resize(n);
        ll.resize(n);
        raw_q0.resize(n);
        raw_q1.resize(n);
        raw_q2.resize(n);
        q.resize(n);
        mu.resize(n);

        double prod = 1.0;
        for (size_t i = 0; i < n; ++i) {
            double sig = softplus(interp1(gd, sten[i].st));
            double a = 1.0 - std::exp(-sig * sten[i].s);
            w[i] = a * prod;
            prod *= (1.0 - a);
            Vec3 rc = interp3(gc, sten[i].st);
            mu[i] = {sigmoid(rc.x), sigmoid(rc.y), sigmoid(rc.z)};
            Vec3 rq = interp3(gq, sten[i].st);
            raw_q0[i] = rq.x;
            raw_q1[i] = rq.y;
            raw_q2[i] = rq.z;
            q[i] = {softplus(rq.x) + floor_v, softplus(rq.y) + floor_v, softplus(rq.z) + floor_v};
        }

        double best = -1e300;
        bool any = false;
        for (size_t i = 0; i < n; ++i) {
            if (w[i] < kWeightEps) {
                ll[i] = -1e300;
                continue;
            }
            any = true;
            double e = std::log(w[i]);
            for (int ch = 0; ch < 3; ++ch) {
                double d = task.target[ch] - mu[i][ch];
                e += -0.5 * std::log(kTwoPi * q[i][ch]) - 0.5 * d * d / q[i][ch];
            }
            ll[i] = e;
            best = std::max(best, e);
        }
        if (!any) return;  // escaped ray: all weights vanished

        double z = 0.0;
        for (size_t i = 0; i < n; ++i)
            if (ll[i] > -1e299) z += std::exp(ll[i] - best);
        double lse = best + std::log(z);
        acc.loss += -lse;
        acc.count += 1.0;
        if (!want_grad) return;

        std::vector<double>& gqst = bank_q.local();
        for (size_t i = 0; i < n; ++i) {
            if (ll[i] <= -1e299) continue;
            double resp = std::exp(ll[i] - lse);  // posterior responsibility
            const double* rawq[3] = {&raw_q0[i], &raw_q1[i], &raw_q2[i]};
            for (int ch = 0; ch < 3; ++ch) {
                double d = task.target[ch] - mu[i][ch];
                double qc = q[i][ch];
                // d(-log L)/dq = -resp * (-1/(2q) + d^2/(2q^2))
                double dq = -resp * (-0.5 / qc + 0.5 * d * d / (qc * qc));
                double draw = dq * sigmoid(*rawq[ch]);  // softplus'
                const auto& st = sten[i].st;
                for (int k = 0; k < 8; ++k)
                    gqst[st.node[k] * 3 + static_cast<size_t>(ch)] += st.weight[k] * draw;
            }
        }
    });

    int64_t skipped_count = static_cast<int64_t>(rays.size()) - static_cast<int64_t>(total.count);
    if (skipped) *skipped = static_cast<int>(skipped_count);
    if (total.count < 0.5) return 0.0;

    if (want_grad) {
        bank_q.reduce_into(*grad_variance);
        double inv = 1.0 / total.count;
        for (double& g : *grad_variance) g *= inv;
    }
    return total.loss / total.count;
}

double bce_loss_and_grad(const VoxelField& field, const std::vector<PointTask>& points,
                         std::vector<double>* grad_visibility) {
    if (points.empty()) return 0.0;
    const Grid3& gv = field.raw_visibility();
    size_t nodes = static_cast<size_t>(gv.node_count());
    const bool want_grad = grad_visibility != nullptr;
    GradBank bank_v(want_grad ? grad_threads() : 1, want_grad ? nodes : 0);

    const double inv = 1.0 / static_cast<double>(points.size());
    double loss = parallel_reduce(static_cast<int64_t>(points.size()), 0.0,
                                  [&](int64_t pi, double& acc) {
        const PointTask& pt = points[static_cast<size_t>(pi)];
        double gx, gy, gz;
        field.grid_coords(pt.x, gx, gy, gz);
        Grid3::Stencil st = gv.stencil(gx, gy, gz);
        double raw = 0.0;
        for (int k = 0; k < 8; ++k) raw += st.weight[k] * gv.data()[st.node[k]];
        double v = sigmoid(raw);
        double vc = std::clamp(v, 1e-9, 1.0 - 1e-9);
        acc += -(pt.label * std::log(vc) + (1.0 - pt.label) * std::log(1.0 - vc));
        if (!want_grad) return;
        double draw = (v - pt.label) * inv;  // BCE through sigmoid
        std::vector<double>& g = bank_v.local();
        for (int k = 0; k < 8; ++k) g[st.node[k]] += st.weight[k] * draw;
    });

    if (want_grad) bank_v.reduce_into(*grad_visibility);
    return loss * inv;
}

namespace {

std::vector<RayTask> draw_ray_batch(const TrainingSet& data, int batch, Rng& rng) {
    std::vector<RayTask> rays;
    rays.reserve(static_cast<size_t>(batch));
    for (int i = 0; i < batch; ++i) {
        size_t img = rng.uniform_index(data.size());
        int px = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(data.intr.width)));
        int py = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(data.intr.height)));
        RayTask task;
        task.ray = pixel_ray(data.poses[img], data.intr, py, px);
        task.target = data.images[img].at(px, py);
        task.noise_seed = rng.next_u64();
        rays.push_back(task);
    }
    return rays;
}

}  // namespace

std::vector<double> train_backbone(VoxelField& field, const TrainingSet& data,
                                   const TrainConfig& cfg, Rng rng) {
    if (data.size() == 0) throw ConfigError("train_backbone: empty training set");
    std::vector<double> curve;
    if (cfg.backbone_iters <= 0) return curve;
    curve.reserve(static_cast<size_t>(cfg.backbone_iters));

    Grid3& gd = field.raw_density();
    Grid3& gc = field.raw_color();
    Adam adam_d(gd.data().size(), cfg);
    Adam adam_c(gc.data().size(), cfg);
    std::vector<double> grad_d, grad_c;

    for (int it = 0; it < cfg.backbone_iters; ++it) {
        Rng iter_rng = rng.substream(static_cast<uint64_t>(it));
        std::vector<RayTask> rays = draw_ray_batch(data, cfg.backbone_batch, iter_rng);
        double loss =
            mse_loss_and_grad(field, rays, cfg.samples_per_ray, cfg.stratified, &grad_d, &grad_c);
        adam_d.step(gd.data(), grad_d, cfg.backbone_lr);
        adam_c.step(gc.data(), grad_c, cfg.backbone_lr);
        curve.push_back(loss);
    }
    return curve;
}

std::vector<double> train_variance_head(VoxelField& field, const TrainingSet& data,
                                        const TrainConfig& cfg, Rng rng, int* skipped_rays) {
    if (data.size() == 0) throw ConfigError("train_variance_head: empty training set");
    if (skipped_rays) *skipped_rays = 0;
    std::vector<double> curve;
    if (cfg.head_iters <= 0) return curve;
    curve.reserve(static_cast<size_t>(cfg.head_iters));

    Grid3& gq = field.raw_variance();
    Adam adam_q(gq.data().size(), cfg);
    std::vector<double> grad_q;
    int total_skipped = 0;

    for (int it = 0; it < cfg.head_iters; ++it) {
        Rng iter_rng = rng.substream(static_cast<uint64_t>(it));
        std::vector<RayTask> rays = draw_ray_batch(data, cfg.head_batch, iter_rng);
        int skipped = 0;
        double loss = nll_loss_and_grad(field, rays, cfg.samples_per_ray, cfg.stratified, &grad_q,
                                        &skipped);
        total_skipped += skipped;
        adam_q.step(gq.data(), grad_q, cfg.variance_lr);
        curve.push_back(loss);
    }
    if (skipped_rays) *skipped_rays = total_skipped;
    return curve;
}

namespace {

template <bool Parallel>
std::vector<PointTask> label_pool_impl(const VoxelField& field, const std::vector<Pose>& poses,
                                       const CameraIntrinsics& intr, int count, Rng rng) {
    std::vector<PointTask> pool(static_cast<size_t>(count));
    for (auto& p : pool) p.x = rng.uniform_in(field.bounds());
    auto fill = [&](int64_t i) {
        pool[static_cast<size_t>(i)].label =
            visibility_exact(field, pool[static_cast<size_t>(i)].x, poses, intr);
    };
    if constexpr (Parallel) {
        parallel_for(count, fill);
    } else {
        for (int64_t i = 0; i < count; ++i) fill(i);
    }
    return pool;
}

}  // namespace

std::vector<PointTask> visibility_label_pool(const VoxelField& field, const std::vector<Pose>& poses,
                                             const CameraIntrinsics& intr, int count, Rng rng) {
    return label_pool_impl<true>(field, poses, intr, count, rng);
}

std::vector<PointTask> visibility_label_pool_serial(const VoxelField& field,
                                                    const std::vector<Pose>& poses,
                                                    const CameraIntrinsics& intr, int count,
                                                    Rng rng) {
    return label_pool_impl<false>(field, poses, intr, count, rng);
}

std::vector<double> train_visibility_head(VoxelField& field, const std::vector<Pose>& poses,
                                          const CameraIntrinsics& intr, const TrainConfig& cfg,
                                          Rng rng) {
    if (poses.empty()) throw ConfigError("train_visibility_head: empty pose list");
    std::vector<double> curve;
    if (cfg.head_iters <= 0) return curve;
    curve.reserve(static_cast<size_t>(cfg.head_iters));

    std::vector<PointTask> pool =
        visibility_label_pool(field, poses, intr, cfg.vis_pool, rng.substream("vispool"));

    Grid3& gv = field.raw_visibility();
    Adam adam_v(gv.data().size(), cfg);
    std::vector<double> grad_v;
    std::vector<PointTask> batch(static_cast<size_t>(cfg.vis_batch));

    Rng draw = rng.substream("visbatch");
    for (int it = 0; it < cfg.head_iters; ++it) {
        for (auto& b : batch) b = pool[draw.uniform_index(pool.size())];
        double loss = bce_loss_and_grad(field, batch, &grad_v);
        adam_v.step(gv.data(), grad_v, cfg.visibility_lr);
        curve.push_back(loss);
    }
    return curve;
}

}  // namespace nvf
