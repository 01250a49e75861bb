#include "nvf/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "nvf/errors.hpp"
#include "nvf/parallel.hpp"
#include "nvf/visibility.hpp"

namespace nvf {

namespace {
constexpr double kLog2PiE = 2.8378770664093453;  // log(2 pi e)
constexpr double kWeightEps = 1e-12;

double binary_entropy(double p) {
    double h = 0.0;
    if (p > kWeightEps) h -= p * std::log(p);
    if (1.0 - p > kWeightEps) h -= (1.0 - p) * std::log(1.0 - p);
    return h;
}

double gaussian_entropy_diag(const Vec3& q) {
    return 0.5 * (3.0 * kLog2PiE + std::log(q.x) + std::log(q.y) + std::log(q.z));
}

// Eigenvalues of a symmetric 3x3 matrix (trigonometric method).
void eigenvalues_sym3(const double a[3][3], double eig[3]) {
    double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (p1 < 1e-300) {
        eig[0] = a[0][0];
        eig[1] = a[1][1];
        eig[2] = a[2][2];
        return;
    }
    double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) +
                (a[2][2] - q) * (a[2][2] - q) + 2.0 * p1;
    double p = std::sqrt(p2 / 6.0);
    double b[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
    double detb = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                  b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                  b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    double r = std::clamp(detb / 2.0, -1.0, 1.0);
    double phi = std::acos(r) / 3.0;
    eig[0] = q + 2.0 * p * std::cos(phi);
    eig[2] = q + 2.0 * p * std::cos(phi + 2.0 * 3.141592653589793 / 3.0);
    eig[1] = 3.0 * q - eig[0] - eig[2];
}

}  // namespace

void UncertaintyPriors::validate() const {
    if (beta < 0.0 || beta > 1.0)
        throw ConfigError("priors: beta must lie in [0,1], got " + std::to_string(beta));
    if (q0.x <= 0.0 || q0.y <= 0.0 || q0.z <= 0.0)
        throw ConfigError("priors: Q_0 components must be > 0");
    if (sigma0 < 0.0) throw ConfigError("priors: sigma_0 must be >= 0");
}

CompositeWeights composite_alpha_star(const RaySamples& samples, const UncertaintyPriors& priors) {
    CompositeWeights out;
    out.alpha_star = composite_alphas(samples, priors.beta, priors.sigma0);
    weights_from_alphas(out.alpha_star, out.w_star, out.w_bg);
    return out;
}

Vec3 RayMixture::mean() const {
    Vec3 m{0, 0, 0};
    for (const auto& c : components) m += c.mean * c.weight;
    return m;
}

double RayMixture::total_weight() const {
    double s = 0.0;
    for (const auto& c : components) s += c.weight;
    return s;
}

RayMixture ray_mixture(const RaySamples& samples, const UncertaintyPriors& priors) {
    CompositeWeights cw = composite_alpha_star(samples, priors);
    RayMixture mix;
    mix.components.reserve(samples.size() + 1);
    double prior_mass = cw.w_bg;
    for (size_t i = 0; i < samples.size(); ++i) {
        const FieldSample& fs = samples.values[i];
        mix.components.push_back({cw.w_star[i] * fs.vis, fs.mu_c, fs.q_c});
        prior_mass += cw.w_star[i] * (1.0 - fs.vis);
    }
    mix.components.push_back({prior_mass, priors.mu0, priors.q0});
    return mix;
}

RayMixture bn_enumerate(const RaySamples& samples, const UncertaintyPriors& priors) {
    int n = static_cast<int>(samples.size());
    if (n > 12) throw ResourceError("bn_enumerate: 4^N enumeration limited to N <= 12");

    // Per-interval probabilities straight from the conditional table:
    // P(D=1 | V=1) = 1 - exp(-sigma_i s_i)
    // P(D=1 | V=0) = 1 - rho_i, rho_i = (1-beta) exp(-sigma0 s_i) + beta exp(-sigma_i s_i)
    std::vector<double> v(static_cast<size_t>(n)), d_occ(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const FieldSample& fs = samples.values[static_cast<size_t>(i)];
        double e_pred = std::exp(-fs.sigma * samples.s[static_cast<size_t>(i)]);
        double e_prior = std::exp(-priors.sigma0 * samples.s[static_cast<size_t>(i)]);
        double rho_i = (1.0 - priors.beta) * e_prior + priors.beta * e_pred;
        v[static_cast<size_t>(i)] = fs.vis;
        // marginal occlusion probability of the interval
        d_occ[static_cast<size_t>(i)] =
            fs.vis * (1.0 - e_pred) + (1.0 - fs.vis) * (1.0 - rho_i);
    }

    std::vector<double> visible_mass(static_cast<size_t>(n), 0.0);
    double prior_mass = 0.0;

    uint64_t total = 1ull << (2 * n);  // joint (D, V) assignments
    for (uint64_t bits = 0; bits < total; ++bits) {
        double p = 1.0;
        for (int i = 0; i < n; ++i) {
            bool di = (bits >> i) & 1ull;
            bool vi = (bits >> (n + i)) & 1ull;
            p *= di ? d_occ[static_cast<size_t>(i)] : 1.0 - d_occ[static_cast<size_t>(i)];
            p *= vi ? v[static_cast<size_t>(i)] : 1.0 - v[static_cast<size_t>(i)];
        }
        if (p == 0.0) continue;
        int first = -1;
        for (int i = 0; i < n; ++i)
            if ((bits >> i) & 1ull) {
                first = i;
                break;
            }
        if (first < 0) {
            prior_mass += p;  // ray escapes
        } else if ((bits >> (n + first)) & 1ull) {
            visible_mass[static_cast<size_t>(first)] += p;
        } else {
            prior_mass += p;  // occluding interval invisible -> prior color
        }
    }

    RayMixture mix;
    mix.components.reserve(static_cast<size_t>(n) + 1);
    for (int i = 0; i < n; ++i)
        mix.components.push_back({visible_mass[static_cast<size_t>(i)],
                                  samples.values[static_cast<size_t>(i)].mu_c,
                                  samples.values[static_cast<size_t>(i)].q_c});
    mix.components.push_back({prior_mass, priors.mu0, priors.q0});
    return mix;
}

Method parse_method(const std::string& tag) {
    for (size_t i = 0; i < method_tags().size(); ++i)
        if (method_tags()[i] == tag) return static_cast<Method>(i);
    std::string valid;
    for (const auto& t : method_tags()) valid += (valid.empty() ? "" : ", ") + t;
    throw ConfigError("unknown method '" + tag + "' (valid: " + valid + ")");
}

const char* method_name(Method m) { return method_tags()[static_cast<size_t>(m)].c_str(); }

const std::vector<std::string>& method_tags() {
    static const std::vector<std::string> tags = {"nvf", "nvf-loose", "no-vis", "no-var",
                                                  "wd",  "activermap", "air",    "activenerf"};
    return tags;
}

EntropyEstimate gmm_entropy_huber(const RayMixture& m) {
    EntropyEstimate est;
    est.method = Method::nvf;
    for (const auto& c : m.components) {
        if (c.weight < kWeightEps) continue;
        est.discrete_term -= c.weight * std::log(c.weight);
        est.differential_term += c.weight * gaussian_entropy_diag(c.var);
    }
    est.value = est.discrete_term + est.differential_term;
    return est;
}

EntropyEstimate gmm_entropy_moment(const RayMixture& m) {
    EntropyEstimate est;
    est.method = Method::nvf_loose;
    Vec3 mu_bar{0, 0, 0};
    double wsum = 0.0;
    for (const auto& c : m.components) {
        if (c.weight < kWeightEps) continue;
        mu_bar += c.mean * c.weight;
        wsum += c.weight;
    }
    if (wsum < kWeightEps) return est;
    mu_bar = mu_bar / wsum;

    double cov[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (const auto& c : m.components) {
        if (c.weight < kWeightEps) continue;
        Vec3 d = c.mean - mu_bar;
        for (int i = 0; i < 3; ++i) {
            cov[i][i] += c.weight * c.var[i];
            for (int j = 0; j < 3; ++j) cov[i][j] += c.weight * d[i] * d[j];
        }
    }
    double eig[3];
    eigenvalues_sym3(cov, eig);
    double log_det = 0.0;
    for (double e : eig) log_det += std::log(std::max(e, 1e-12));
    est.differential_term = 0.5 * (3.0 * kLog2PiE + log_det);
    est.value = est.differential_term;
    return est;
}

void gmm_entropy_mc(const RayMixture& m, int64_t n_samples, uint64_t seed, double& estimate,
                    double& standard_error) {
    estimate = 0.0;
    standard_error = 0.0;
    if (n_samples <= 0) return;
    double wsum = m.total_weight();
    if (wsum < kWeightEps) return;

    std::vector<const RayMixture::Component*> comps;
    std::vector<double> cdf;
    double acc = 0.0;
    for (const auto& c : m.components) {
        if (c.weight < kWeightEps) continue;
        acc += c.weight / wsum;
        comps.push_back(&c);
        cdf.push_back(acc);
    }
    if (comps.empty()) return;
    cdf.back() = 1.0;

    auto log_pdf = [&](const Vec3& x) {
        double best = -1e300;
        std::vector<double> terms(comps.size());
        for (size_t k = 0; k < comps.size(); ++k) {
            const auto& c = *comps[k];
            double e = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                double d = x[ch] - c.mean[ch];
                e += -0.5 * d * d / c.var[ch] - 0.5 * std::log(2.0 * 3.141592653589793 * c.var[ch]);
            }
            terms[k] = std::log(c.weight / wsum) + e;
            best = std::max(best, terms[k]);
        }
        double s = 0.0;
        for (double t : terms) s += std::exp(t - best);
        return best + std::log(s);
    };

    struct Acc {
        double s = 0.0, s2 = 0.0;
        Acc& operator+=(const Acc& o) {
            s += o.s;
            s2 += o.s2;
            return *this;
        }
    };
    Rng base(seed);
    Acc total = parallel_reduce(n_samples, Acc{}, [&](int64_t i, Acc& local) {
        Rng rng = base.substream(static_cast<uint64_t>(i));
        double u = rng.uniform();
        size_t k = static_cast<size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (k >= comps.size()) k = comps.size() - 1;
        const auto& c = *comps[k];
        Vec3 x{c.mean.x + std::sqrt(c.var.x) * rng.normal(),
               c.mean.y + std::sqrt(c.var.y) * rng.normal(),
               c.mean.z + std::sqrt(c.var.z) * rng.normal()};
        double lp = log_pdf(x);
        local.s += -lp;
        local.s2 += lp * lp;
    });
    double n = static_cast<double>(n_samples);
    estimate = total.s / n;
    double var = std::max(0.0, total.s2 / n - estimate * estimate);
    standard_error = std::sqrt(var / n);
}

double rho(double distance, const CorrelationConfig& cfg) {
    double xi = cfg.xi();
    if (xi <= 0.0) throw ConfigError("correlation: xi must be > 0");
    if (distance >= xi) return 0.0;
    double r = distance / xi;
    return 1.0 - r * r;
}

namespace {

EntropyEstimate entropy_from_samples(RaySamples& samples, Method method,
                                     const UncertaintyPriors& priors, const EntropyConfig& cfg) {
    switch (method) {
        case Method::no_vis:
            for (auto& fs : samples.values) fs.vis = 1.0;
            break;
        case Method::no_var:
            for (auto& fs : samples.values) fs.q_c = Vec3::all(cfg.novar_q);
            break;
        default:
            break;
    }

    EntropyEstimate est;
    est.method = method;
    switch (method) {
        case Method::nvf:
        case Method::no_vis:
        case Method::no_var: {
            est = gmm_entropy_huber(ray_mixture(samples, priors));
            est.method = method;
            return est;
        }
        case Method::nvf_loose: {
            est = gmm_entropy_moment(ray_mixture(samples, priors));
            est.method = method;
            return est;
        }
        case Method::wd: {
            RayWeights rw = alpha_weights(samples);
            double h = 0.0;
            for (double w : rw.w)
                if (w > kWeightEps) h -= w * std::log(w);
            if (rw.w_bg > kWeightEps) h -= rw.w_bg * std::log(rw.w_bg);
            est.discrete_term = h;
            est.value = h;
            return est;
        }
        case Method::activermap: {
            RayWeights rw = alpha_weights(samples);
            double h = 0.0;
            for (double a : rw.alpha) h += binary_entropy(a);
            est.discrete_term = h;
            est.value = h;
            return est;
        }
        case Method::air: {
            RayWeights rw = alpha_weights(samples);
            double h = 0.0;
            for (size_t i = 0; i < rw.alpha.size(); ++i) h += rw.w[i] * binary_entropy(rw.alpha[i]);
            est.discrete_term = h;
            est.value = h;
            return est;
        }
        case Method::activenerf: {
            RayWeights rw = alpha_weights(samples);
            Vec3 var{0, 0, 0};
            for (size_t i = 0; i < samples.size(); ++i) var += samples.values[i].q_c * rw.w[i];
            double log_det = std::log(std::max(var.x, 1e-12)) + std::log(std::max(var.y, 1e-12)) +
                             std::log(std::max(var.z, 1e-12));
            est.differential_term = 0.5 * (3.0 * kLog2PiE + log_det);
            est.value = est.differential_term;
            return est;
        }
    }
    return est;
}

}  // namespace

EntropyEstimate ray_entropy(const VoxelField& field, const Ray& ray, Method method,
                            const UncertaintyPriors& priors, const EntropyConfig& cfg) {
    Ray r = ray;
    RaySamples samples;
    if (clip_ray_to_box(r, field.bounds(), field.voxel_size()))
        samples = gather_samples(field, r, sample_ray(r, cfg.samples_per_ray, nullptr, false));
    return entropy_from_samples(samples, method, priors, cfg);
}

PixelEntropy pixel_entropy(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                           int m, int n, Method method, const UncertaintyPriors& priors,
                           const EntropyConfig& cfg) {
    PixelEntropy out;
    Ray ray = pixel_ray(pose, intr, m, n);
    RaySamples samples;
    if (clip_ray_to_box(ray, field.bounds(), field.voxel_size()))
        samples = gather_samples(field, ray, sample_ray(ray, cfg.samples_per_ray, nullptr, false));

    // composited expected depth from the same samples
    std::vector<double> w;
    double w_bg;
    weights_from_alphas(composite_alphas(samples, priors.beta, priors.sigma0), w, w_bg);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        num += w[i] * samples.t[i];
        den += w[i];
    }
    out.depth = den < 1e-6 ? 0.0 : num / den;
    out.h = entropy_from_samples(samples, method, priors, cfg).value;
    return out;
}

namespace {

template <bool Parallel>
ImageEntropy image_entropy_impl(const VoxelField& field, const Pose& pose,
                                const CameraIntrinsics& intr, Method method,
                                const UncertaintyPriors& priors, const EntropyConfig& cfg,
                                CorrelationConfig corr, bool correlated) {
    ImageEntropy out;
    out.per_pixel = ScalarImage(intr.width, intr.height, 0.0);
    out.depth = ScalarImage(intr.width, intr.height, 0.0);
    if (corr.dphi <= 0.0) corr.dphi = intr.dphi();

    int64_t count = static_cast<int64_t>(intr.width) * intr.height;
    auto shade = [&](int64_t idx) {
        int m = static_cast<int>(idx) / intr.width;
        int n = static_cast<int>(idx) % intr.width;
        PixelEntropy pe = pixel_entropy(field, pose, intr, m, n, method, priors, cfg);
        out.per_pixel.set(n, m, pe.h);
        out.depth.set(n, m, pe.depth);
    };
    if constexpr (Parallel) {
        parallel_for(count, shade);
    } else {
        for (int64_t i = 0; i < count; ++i) shade(i);
    }

    // serial total over the stored rasters keeps the sum thread-invariant
    double total = 0.0;
    for (int m = 0; m < intr.height; ++m)
        for (int n = 0; n < intr.width; ++n) {
            double h = out.per_pixel.at(n, m);
            if (correlated) h *= 1.0 - rho(out.depth.at(n, m) * corr.dphi, corr);
            total += h;
        }
    out.total = total;
    return out;
}

}  // namespace

ImageEntropy image_entropy(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                           Method method, const UncertaintyPriors& priors, const EntropyConfig& cfg,
                           const CorrelationConfig& corr, bool correlated) {
    return image_entropy_impl<true>(field, pose, intr, method, priors, cfg, corr, correlated);
}

ImageEntropy image_entropy_serial(const VoxelField& field, const Pose& pose,
                                  const CameraIntrinsics& intr, Method method,
                                  const UncertaintyPriors& priors, const EntropyConfig& cfg,
                                  const CorrelationConfig& corr, bool correlated) {
    return image_entropy_impl<false>(field, pose, intr, method, priors, cfg, corr, correlated);
}

double subset_entropy(const VoxelField& field, const Pose& pose, const CameraIntrinsics& intr,
                      const std::vector<int>& pixel_indices, Method method,
                      const UncertaintyPriors& priors, const EntropyConfig& cfg,
                      const CorrelationConfig& corr_in, bool correlated) {
    CorrelationConfig corr = corr_in;
    if (corr.dphi <= 0.0) corr.dphi = intr.dphi();
    std::vector<double> contrib(pixel_indices.size());
    parallel_for(static_cast<int64_t>(pixel_indices.size()), [&](int64_t k) {
        int idx = pixel_indices[static_cast<size_t>(k)];
        int m = idx / intr.width;
        int n = idx % intr.width;
        PixelEntropy pe = pixel_entropy(field, pose, intr, m, n, method, priors, cfg);
        double h = pe.h;
        if (correlated) h *= 1.0 - rho(pe.depth * corr.dphi, corr);
        contrib[static_cast<size_t>(k)] = h;
    });
    double total = 0.0;
    for (double h : contrib) total += h;
    return total;
}

double visibility_exact(const VoxelField& field, const Vec3& x, const std::vector<Pose>& poses,
                        const CameraIntrinsics& intr) {
    double step = field.voxel_size();
    auto sigma_at = [&](const Vec3& p) { return field.density_at(p); };
    return visibility_to_cameras(sigma_at, x, poses, intr, step);
}

}  // namespace nvf
