#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nvf/config.hpp"
#include "nvf/errors.hpp"
#include "nvf/parallel.hpp"
#include "nvf/planner.hpp"
#include "nvf/render.hpp"
#include "nvf/train.hpp"

namespace fs = std::filesystem;
using namespace nvf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPlanning = 3;
constexpr int kExitEval = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::string method_override;
    int64_t seed_override = -1;
    int threads = -1;
};

RunConfig resolve_config(const CommonArgs& args, bool require_file) {
    RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = load_config(args.config_path);
    } else if (require_file) {
        throw ConfigError("missing --config");
    }
    if (args.seed_override >= 0) cfg.seed = static_cast<uint64_t>(args.seed_override);
    if (!args.out_override.empty()) cfg.out_dir = args.out_override;
    if (!args.method_override.empty()) cfg.planner.method = args.method_override;
    if (args.threads >= 0) cfg.threads = args.threads;
    if (cfg.planner.method != "random") parse_method(cfg.planner.method);  // validates the tag
    set_num_threads(cfg.threads);
    return cfg;
}

std::string run_dir(const RunConfig& cfg) {
    return cfg.out_dir + "/run-seed" + std::to_string(cfg.seed);
}

Pose parse_pose_spec(const std::string& spec) {
    // "px,py,pz:tx,ty,tz" -> camera at p looking at t
    auto parse3 = [](const std::string& s) {
        Vec3 v;
        if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &v.x, &v.y, &v.z) != 3)
            throw ConfigError("bad pose spec component '" + s + "'");
        return v;
    };
    size_t colon = spec.find(':');
    if (colon == std::string::npos)
        throw ConfigError("pose spec must look like px,py,pz:tx,ty,tz");
    Vec3 eye = parse3(spec.substr(0, colon));
    Vec3 target = parse3(spec.substr(colon + 1));
    return Pose{look_at(eye, target), eye};
}

int cmd_run(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args, true);
    GroundTruthScene scene = build_scene(cfg.scene);
    std::string dir = run_dir(cfg);
    fs::create_directories(dir);

    {
        std::ofstream config_copy(dir + "/config.txt");
        config_copy << serialize_config(cfg);
    }

    std::string failure;
    MappingRun run;
    try {
        run = run_active_mapping(scene, cfg, dir);
    } catch (const PlanningError& e) {
        failure = e.what();
    }

    std::ofstream manifest(dir + "/manifest.txt");
    manifest << "seed " << cfg.seed << "\n";
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    manifest << "config_hash " << hash_buf << "\n";
    manifest << "threads " << num_threads() << "\n";
    manifest << "method " << cfg.planner.method << "\n";
    for (const auto& ms : run.steps) {
        manifest << "step " << ms.step << " train_s " << ms.train_seconds << " plan_s "
                 << ms.plan_seconds << " candidates " << ms.candidates.items.size()
                 << " shortfall " << ms.candidates.shortfall << "\n";
    }
    if (!failure.empty()) {
        manifest << "status failed_at_step " << run.steps.size() << " error " << failure << "\n";
        std::cerr << "planning failure: " << failure << "\n";
        return kExitPlanning;
    }
    manifest << "status ok\n";

    {
        std::ofstream metrics(dir + "/metrics.csv");
        metrics << metrics_csv_header() << "\n";
        for (const auto& [step, rec] : run.per_step_metrics)
            metrics << metrics_csv_row(step, rec) << "\n";
        metrics << metrics_csv_row(cfg.planner.horizon, run.metrics) << "\n";
    }
    save_field(run.final_field, dir + "/field.nvff");
    save_scene(scene, dir + "/scene.nvfs");

    // per-step artifacts from the final field: rendered observation + map
    CameraIntrinsics map_intr{cfg.planner.entropy_resolution, cfg.planner.entropy_resolution,
                              cfg.fov};
    UncertaintyPriors priors = cfg.resolved_priors(scene.bounds.diagonal());
    CorrelationConfig corr = cfg.correlation(scene.bounds.diagonal());
    for (size_t i = 0; i < run.selected.size(); ++i) {
        char name[96];
        std::snprintf(name, sizeof(name), "%s/step_%02zu_render.ppm", dir.c_str(), i);
        Image obs = render_image(run.final_field, run.selected[i], map_intr,
                                 cfg.entropy.samples_per_ray, cfg.seed, false);
        write_ppm(obs, name);
        if (cfg.planner.method != "random") {
            ImageEntropy ie = image_entropy(run.final_field, run.selected[i], map_intr,
                                            parse_method(cfg.planner.method), priors, cfg.entropy,
                                            corr, cfg.planner.correlated);
            std::snprintf(name, sizeof(name), "%s/step_%02zu_entropy.ppm", dir.c_str(), i);
            write_scalar_ppm(ie.per_pixel, name);
        }
    }
    std::cout << "run complete: " << dir << "\n";
    std::cout << metrics_csv_header() << "\n"
              << metrics_csv_row(cfg.planner.horizon, run.metrics) << "\n";
    return kExitOk;
}

int cmd_entropy_map(const CommonArgs& args, const std::string& field_path,
                    const std::string& pose_spec, const std::string& method_tag) {
    RunConfig cfg = resolve_config(args, false);
    Method method = parse_method(method_tag.empty() ? cfg.planner.method : method_tag);
    VoxelField field = load_field(field_path);
    Pose pose = parse_pose_spec(pose_spec);

    double diag = field.bounds().diagonal();
    UncertaintyPriors priors = cfg.resolved_priors(diag);
    priors.validate();
    CorrelationConfig corr = cfg.correlation(diag);
    CameraIntrinsics intr{cfg.eval.eval_resolution, cfg.eval.eval_resolution, cfg.fov};

    fs::create_directories(cfg.out_dir);
    ImageEntropy ie =
        image_entropy(field, pose, intr, method, priors, cfg.entropy, corr, cfg.planner.correlated);
    std::string base = cfg.out_dir + "/entropy-" + method_name(method);
    write_scalar_ppm(ie.per_pixel, base + ".ppm");
    Image rgb = render_image(field, pose, intr, cfg.eval.eval_samples, cfg.seed, false);
    write_ppm(rgb, cfg.out_dir + "/render.ppm");
    std::printf("total %.9g nats, per-pixel mean %.9g nats -> %s.ppm\n", ie.total,
                ie.per_pixel.mean_value(), base.c_str());
    return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& field_path) {
    RunConfig cfg = resolve_config(args, true);
    if (cfg.eval.test_views < 1) throw ConfigError("eval: test_views must be >= 1");
    VoxelField field = load_field(field_path);
    GroundTruthScene scene = build_scene(cfg.scene);
    Rng root(cfg.seed);
    std::vector<Pose> test_poses =
        make_test_poses(scene, cfg.eval.test_views, root.substream("eval").next_u64());
    MetricsRecord rec =
        evaluate_field(field, scene, test_poses, cfg.eval, root.substream("eval").next_u64());
    fs::create_directories(cfg.out_dir);
    std::ofstream metrics(cfg.out_dir + "/metrics.csv");
    metrics << metrics_csv_header() << "\n" << metrics_csv_row(0, rec) << "\n";
    std::cout << metrics_csv_header() << "\n" << metrics_csv_row(0, rec) << "\n";
    return kExitOk;
}

// Independent cross-checks: closed-form mixture vs enumeration, entropy
// bounds vs Monte Carlo, analytic gradients vs central differences.
int cmd_oracle_check(uint64_t seed, int trials, double beta_flag) {
    if (beta_flag < 0.0 || beta_flag > 1.0)
        throw ConfigError("oracle-check: --beta must lie in [0,1]");
    Rng rng(seed);
    bool ok = true;

    // 1. mixture vs brute-force enumeration
    double max_mix_dev = 0.0;
    for (int t = 0; t < trials; ++t) {
        int n = 1 + static_cast<int>(rng.uniform_index(8));
        RaySamples samples;
        samples.t.resize(static_cast<size_t>(n));
        samples.s.resize(static_cast<size_t>(n));
        samples.values.resize(static_cast<size_t>(n));
        double t_acc = 0.1;
        for (int i = 0; i < n; ++i) {
            samples.t[static_cast<size_t>(i)] = t_acc;
            samples.s[static_cast<size_t>(i)] = rng.uniform(0.01, 0.2);
            t_acc += samples.s[static_cast<size_t>(i)];
            FieldSample& fs = samples.values[static_cast<size_t>(i)];
            fs.sigma = rng.uniform(0.0, 30.0);
            fs.mu_c = {rng.uniform(), rng.uniform(), rng.uniform()};
            fs.q_c = {rng.uniform(1e-4, 0.3), rng.uniform(1e-4, 0.3), rng.uniform(1e-4, 0.3)};
            fs.vis = rng.uniform();
        }
        UncertaintyPriors priors;
        priors.beta = rng.uniform();
        priors.sigma0 = rng.uniform(0.0, 30.0);
        RayMixture a = ray_mixture(samples, priors);
        RayMixture b = bn_enumerate(samples, priors);
        for (size_t i = 0; i < a.components.size(); ++i) {
            max_mix_dev = std::max(max_mix_dev,
                                   std::abs(a.components[i].weight - b.components[i].weight));
            for (int c = 0; c < 3; ++c) {
                max_mix_dev = std::max(max_mix_dev, std::abs(a.components[i].mean[c] -
                                                             b.components[i].mean[c]));
                max_mix_dev = std::max(max_mix_dev, std::abs(a.components[i].var[c] -
                                                             b.components[i].var[c]));
            }
        }
    }
    bool mix_ok = max_mix_dev <= 1e-9;
    ok = ok && mix_ok;
    std::printf("%-34s max dev %.3e  tol 1.0e-09  %s\n", "mixture vs enumeration", max_mix_dev,
                mix_ok ? "ok" : "FAIL");

    // 2. entropy bounds vs Monte Carlo
    double worst_margin = 1e300;
    for (int t = 0; t < std::min(trials, 50); ++t) {
        RayMixture m;
        int comps = 1 + static_cast<int>(rng.uniform_index(8));
        double wsum = 0.0;
        for (int i = 0; i < comps; ++i) {
            double w = rng.uniform(0.05, 1.0);
            wsum += w;
            m.components.push_back({w,
                                    {rng.uniform(), rng.uniform(), rng.uniform()},
                                    {rng.uniform(1e-4, 1.0), rng.uniform(1e-4, 1.0),
                                     rng.uniform(1e-4, 1.0)}});
        }
        for (auto& c : m.components) c.weight /= wsum;
        double mc, se;
        gmm_entropy_mc(m, 20000, rng.next_u64(), mc, se);
        double floor_line = mc - 3.0 * se;
        worst_margin = std::min(worst_margin, gmm_entropy_huber(m).value - floor_line);
        worst_margin = std::min(worst_margin, gmm_entropy_moment(m).value - floor_line);
    }
    bool bound_ok = trials == 0 || worst_margin >= 0.0;
    ok = ok && bound_ok;
    std::printf("%-34s min margin %+.3e nats      %s\n", "entropy bounds vs monte carlo",
                trials == 0 ? 0.0 : worst_margin, bound_ok ? "ok" : "FAIL");

    // 3. gradient checks on toy rays
    double max_rel = 0.0;
    for (int t = 0; t < std::min(trials, 20); ++t) {
        VoxelField field(4, {{0, 0, 0}, {1, 1, 1}}, 1e-6);
        Rng frng = rng.substream(static_cast<uint64_t>(t));
        for (auto* g : {&field.raw_density(), &field.raw_color(), &field.raw_variance()})
            for (float& x : g->data())
                x = static_cast<float>(std::floor(frng.uniform(-256.0, 256.0)) / 256.0);
        std::vector<RayTask> rays(1);
        rays[0].ray = {{frng.uniform(0.1, 0.3), frng.uniform(0.1, 0.9), frng.uniform(0.1, 0.9)},
                       normalized({1.0, frng.uniform(-0.3, 0.3), frng.uniform(-0.3, 0.3)}),
                       0.0,
                       0.6},
        rays[0].target = {frng.uniform(), frng.uniform(), frng.uniform()};
        rays[0].noise_seed = frng.next_u64();

        const double h = 1.0 / 256.0;
        std::vector<double> gd, gc, gq;
        mse_loss_and_grad(field, rays, 3, true, &gd, &gc);
        for (size_t p = 0; p < gd.size(); p += 7) {
            float saved = field.raw_density().data()[p];
            field.raw_density().data()[p] = static_cast<float>(saved + h);
            double up = mse_loss_and_grad(field, rays, 3, true, nullptr, nullptr);
            field.raw_density().data()[p] = static_cast<float>(saved - h);
            double dn = mse_loss_and_grad(field, rays, 3, true, nullptr, nullptr);
            field.raw_density().data()[p] = saved;
            double fd = (up - dn) / (2.0 * h);
            max_rel = std::max(max_rel, std::abs(fd - gd[p]) /
                                            std::max({1e-6, std::abs(fd), std::abs(gd[p])}));
        }
        int skipped = 0;
        nll_loss_and_grad(field, rays, 3, true, &gq, &skipped);
        for (size_t p = 0; p < gq.size(); p += 11) {
            float saved = field.raw_variance().data()[p];
            field.raw_variance().data()[p] = static_cast<float>(saved + h);
            double up = nll_loss_and_grad(field, rays, 3, true, nullptr, &skipped);
            field.raw_variance().data()[p] = static_cast<float>(saved - h);
            double dn = nll_loss_and_grad(field, rays, 3, true, nullptr, &skipped);
            field.raw_variance().data()[p] = saved;
            double fd = (up - dn) / (2.0 * h);
            max_rel = std::max(max_rel, std::abs(fd - gq[p]) /
                                            std::max({1e-6, std::abs(fd), std::abs(gq[p])}));
        }
    }
    bool grad_ok = trials == 0 || max_rel <= 1e-4;
    ok = ok && grad_ok;
    std::printf("%-34s max rel err %.3e  tol 1.0e-04  %s\n", "loss gradients vs differences",
                trials == 0 ? 0.0 : max_rel, grad_ok ? "ok" : "FAIL");

    return ok ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active-mapping testbed: visibility-aware ray uncertainty for voxel radiance fields"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string field_path, pose_spec, method_tag;
    uint64_t oracle_seed = 7;
    int oracle_trials = 200;
    double oracle_beta = 0.5;

    auto add_common = [&](CLI::App* cmd, bool with_method) {
        cmd->add_option("--config", common.config_path, "configuration file");
        cmd->add_option("--seed", common.seed_override, "override [run] seed");
        cmd->add_option("--out", common.out_override, "override [run] out");
        cmd->add_option("--threads", common.threads, "override [run] threads");
        if (with_method) cmd->add_option("--method", common.method_override, "override method tag");
    };

    CLI::App* run = app.add_subcommand("run", "execute an active-mapping run");
    add_common(run, true);

    CLI::App* emap = app.add_subcommand("entropy-map", "write a per-pixel entropy map for a pose");
    add_common(emap, false);
    emap->add_option("--field", field_path, "field file (.nvff)")->required();
    emap->add_option("--pose", pose_spec, "px,py,pz:tx,ty,tz")->required();
    emap->add_option("--method", method_tag, "registry method tag");

    CLI::App* ev = app.add_subcommand("eval", "evaluate a saved field against the config's scene");
    add_common(ev, false);
    ev->add_option("--field", field_path, "field file (.nvff)")->required();

    CLI::App* oracle = app.add_subcommand("oracle-check", "run the independent oracle suites");
    oracle->add_option("--seed", oracle_seed, "suite seed");
    oracle->add_option("--trials", oracle_trials, "random trials");
    oracle->add_option("--beta", oracle_beta, "priors beta (validated)");
    oracle->add_option("--threads", common.threads, "worker threads");

    CLI::App* cref = app.add_subcommand("config-reference", "print every key with its default");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(common);
        if (emap->parsed()) return cmd_entropy_map(common, field_path, pose_spec, method_tag);
        if (ev->parsed()) return cmd_eval(common, field_path);
        if (oracle->parsed()) {
            if (common.threads >= 0) set_num_threads(common.threads);
            return cmd_oracle_check(oracle_seed, oracle_trials, oracle_beta);
        }
        if (cref->parsed()) {
            std::cout << config_reference();
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PlanningError& e) {
        std::cerr << "planning error: " << e.what() << "\n";
        return kExitPlanning;
    } catch (const EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return kExitEval;
    }
    return kExitConfig;
}
