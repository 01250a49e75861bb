#include "nvf/planner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "nvf/errors.hpp"
#include "nvf/parallel.hpp"
#include "nvf/render.hpp"

namespace nvf {

namespace {
double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace

double collision_sigma_threshold(const VoxelField& field, double collision_alpha) {
    return -std::log(1.0 - collision_alpha) / field.voxel_size();
}

double segment_max_density(const VoxelField& field, const Vec3& a, const Vec3& b,
                           double skip_radius) {
    double len = norm(b - a);
    double step = field.voxel_size();
    int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    Vec3 dir = len > 1e-12 ? (b - a) / len : Vec3{0, 0, 0};
    double max_sigma = 0.0;
    for (int i = 0; i <= n; ++i) {
        double d = len * i / n;
        if (d < skip_radius) continue;
        max_sigma = std::max(max_sigma, field.density_at(a + dir * d));
    }
    return max_sigma;
}

CandidateSet sample_candidates(const VoxelField& field, const Aabb& bounds,
                               const Pose& current_pose, int n, Rng& rng,
                               const PlannerConfig& cfg) {
    if (n < 1) throw ConfigError("sample_candidates: n must be >= 1");
    CandidateSet set;
    set.seed = rng.next_u64();
    Rng local(set.seed);
    double sigma_thresh = collision_sigma_threshold(field, cfg.collision_alpha);

    int attempts = cfg.attempt_factor * n;
    double depart_radius = 3.0 * field.voxel_size();
    Aabb region = bounds.scaled_about_center(cfg.candidate_region_scale);
    for (int a = 0; a < attempts && static_cast<int>(set.items.size()) < n; ++a) {
        Pose pose = sample_pose_shell(region, local, cfg.lookat_jitter, cfg.shell_margin,
                                      cfg.candidate_inner_scale);
        if (field.density_at(pose.translation) >= sigma_thresh) continue;
        if (segment_max_density(field, current_pose.translation, pose.translation,
                                depart_radius) >= sigma_thresh)
            continue;
        set.items.push_back({pose, 0.0, true});
    }
    if (set.items.empty())
        throw PlanningError("sample_candidates: no feasible candidate in " +
                            std::to_string(attempts) + " attempts");
    set.shortfall = n - static_cast<int>(set.items.size());
    return set;
}

size_t argmax_entropy(const CandidateSet& candidates) {
    size_t best = 0;
    double best_entropy = -1e300;
    for (size_t i = 0; i < candidates.items.size(); ++i) {
        if (candidates.items[i].entropy > best_entropy) {
            best_entropy = candidates.items[i].entropy;
            best = i;
        }
    }
    return best;
}

size_t select_nbv(const VoxelField& field, CandidateSet& candidates, Method method,
                  const UncertaintyPriors& priors, const EntropyConfig& ecfg,
                  const CorrelationConfig& corr, const PlannerConfig& pcfg,
                  const CameraIntrinsics& intr) {
    if (candidates.items.empty()) throw PlanningError("select_nbv: empty candidate set");
    for (size_t i = 0; i < candidates.items.size(); ++i) {
        candidates.items[i].entropy = image_entropy(field, candidates.items[i].pose, intr, method,
                                                    priors, ecfg, corr, pcfg.correlated)
                                          .total;
    }
    return argmax_entropy(candidates);
}

RefineResult refine_pose(const VoxelField& field, const Pose& pose, Method method,
                         const UncertaintyPriors& priors, const EntropyConfig& ecfg,
                         const CorrelationConfig& corr, const PlannerConfig& pcfg,
                         const CameraIntrinsics& intr, int steps, double lr,
                         int pixel_subset_size, Rng& rng) {
    double sigma_thresh = collision_sigma_threshold(field, pcfg.collision_alpha);
    if (field.density_at(pose.translation) >= sigma_thresh)
        throw PlanningError("refine_pose: infeasible start pose");

    // fixed random pixel subset, chosen once
    int total_px = intr.width * intr.height;
    int subset = std::min(pixel_subset_size, total_px);
    std::vector<int> pixels;
    pixels.reserve(static_cast<size_t>(subset));
    while (static_cast<int>(pixels.size()) < subset) {
        int p = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(total_px)));
        bool dup = false;
        for (int q : pixels) dup = dup || (q == p);
        if (!dup) pixels.push_back(p);
    }

    auto subset_h = [&](const Pose& p) {
        return subset_entropy(field, p, intr, pixels, method, priors, ecfg, corr, pcfg.correlated);
    };

    double diag = field.bounds().diagonal();
    const double h_rot = 1e-3, h_trans = 1e-3 * diag;

    RefineResult result;
    Pose current = pose;
    double current_h = subset_h(current);
    result.trace.push_back(current_h);

    for (int it = 0; it < steps; ++it) {
        std::array<double, 6> grad{};
        for (int d = 0; d < 6; ++d) {
            double h = d < 3 ? h_rot : h_trans;
            std::array<double, 6> delta{};
            delta[static_cast<size_t>(d)] = h;
            double e_plus = subset_h(perturb_pose(current, delta));
            delta[static_cast<size_t>(d)] = -h;
            double e_minus = subset_h(perturb_pose(current, delta));
            grad[static_cast<size_t>(d)] = (e_plus - e_minus) / (2.0 * h);
        }
        std::array<double, 6> step_vec{};
        for (int d = 0; d < 6; ++d) step_vec[static_cast<size_t>(d)] = lr * grad[static_cast<size_t>(d)];
        Pose proposal = perturb_pose(current, step_vec);
        if (field.density_at(proposal.translation) >= sigma_thresh) continue;
        double proposal_h = subset_h(proposal);
        if (proposal_h < current_h) continue;  // ascent only
        current = proposal;
        current_h = proposal_h;
        result.trace.push_back(current_h);
    }

    // never return a pose that scores below the start on the full image
    double full_start = image_entropy(field, pose, intr, method, priors, ecfg, corr,
                                      pcfg.correlated).total;
    double full_refined = image_entropy(field, current, intr, method, priors, ecfg, corr,
                                        pcfg.correlated).total;
    if (full_refined >= full_start) {
        result.pose = current;
        result.full_entropy = full_refined;
    } else {
        result.pose = pose;
        result.full_entropy = full_start;
        result.reverted = true;
    }
    return result;
}

RefineResult refine_topk(const VoxelField& field, const CandidateSet& candidates, int k,
                         Method method, const UncertaintyPriors& priors, const EntropyConfig& ecfg,
                         const CorrelationConfig& corr, const PlannerConfig& pcfg,
                         const CameraIntrinsics& intr, Rng& rng) {
    if (candidates.items.empty()) throw PlanningError("refine_topk: empty candidate set");
    std::vector<size_t> order(candidates.items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return candidates.items[a].entropy > candidates.items[b].entropy;
    });
    size_t take = std::min(static_cast<size_t>(std::max(1, k)), order.size());

    RefineResult best;
    bool first = true;
    for (size_t i = 0; i < take; ++i) {
        RefineResult r = refine_pose(field, candidates.items[order[i]].pose, method, priors, ecfg,
                                     corr, pcfg, intr, pcfg.refine_steps, pcfg.refine_lr,
                                     pcfg.refine_pixels, rng);
        if (first || r.full_entropy > best.full_entropy) {
            best = r;
            first = false;
        }
    }
    return best;
}

bool method_needs_variance(const std::string& tag) {
    return tag == "nvf" || tag == "nvf-loose" || tag == "no-vis" || tag == "activenerf";
}

bool method_needs_visibility(const std::string& tag) {
    return tag == "nvf" || tag == "nvf-loose" || tag == "no-var";
}

void train_for_method(VoxelField& field, const TrainingSet& data, const std::string& method_tag,
                      const TrainConfig& cfg, Rng rng) {
    train_backbone(field, data, cfg, rng.substream("backbone"));
    if (method_needs_variance(method_tag))
        train_variance_head(field, data, cfg, rng.substream("variance"));
    if (method_needs_visibility(method_tag))
        train_visibility_head(field, data.poses, data.intr, cfg, rng.substream("visibility"));
}

namespace {

std::vector<Pose> initial_poses(const GroundTruthScene& scene, const PlannerConfig& cfg, Rng rng) {
    std::vector<Pose> poses;
    for (int i = 0; i < cfg.n_initial; ++i) {
        if (scene.interior) {
            // inside the initial room, looking across it
            poses.push_back(sample_pose_shell(scene.init_box, rng, 0.9, 0.0, 0.0));
        } else {
            poses.push_back(sample_pose_shell(scene.bounds, rng, cfg.lookat_jitter,
                                              cfg.shell_margin, 1.0));
        }
    }
    return poses;
}

void append_candidate_rows(std::ofstream& csv, int step, const CandidateSet& set,
                           size_t selected) {
    if (!csv.is_open()) return;
    for (size_t i = 0; i < set.items.size(); ++i) {
        const Pose& p = set.items[i].pose;
        csv << step << "," << i;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.9g", p.rotation(r, c));
                csv << "," << buf;
            }
        for (int d = 0; d < 3; ++d) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9g", p.translation[d]);
            csv << "," << buf;
        }
        char ebuf[32];
        std::snprintf(ebuf, sizeof(ebuf), "%.9g", set.items[i].entropy);
        csv << "," << ebuf << "," << (i == selected ? 1 : 0) << "\n";
    }
}

}  // namespace

MappingRun run_active_mapping(const GroundTruthScene& scene, const RunConfig& cfg,
                              const std::string& out_dir) {
    MappingRun run;
    run.config_digest = config_hash(cfg);
    Rng root(cfg.seed);
    double diag = scene.bounds.diagonal();
    UncertaintyPriors priors = cfg.resolved_priors(diag);
    priors.validate();
    CorrelationConfig corr = cfg.correlation(diag);
    bool random_method = cfg.planner.method == "random";
    Method method = random_method ? Method::nvf : parse_method(cfg.planner.method);

    CameraIntrinsics train_intr{cfg.train_image_resolution, cfg.train_image_resolution, cfg.fov};
    CameraIntrinsics plan_intr{cfg.planner.entropy_resolution, cfg.planner.entropy_resolution,
                               cfg.fov};

    std::ofstream csv;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        csv.open(out_dir + "/candidates.csv");
        csv << "step,candidate,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,entropy,selected\n";
    }

    // initial observations
    run.training.intr = train_intr;
    run.training.poses = initial_poses(scene, cfg.planner, root.substream("init"));
    Rng obs_rng = root.substream("obs");
    for (const Pose& p : run.training.poses) {
        Image img;
        ScalarImage depth;
        gt_render(scene, p, train_intr, cfg.eval.eval_samples, obs_rng.next_u64(), img, depth);
        run.training.images.push_back(img);
    }

    Pose current_pose = run.training.poses.empty() ? Pose{} : run.training.poses.back();
    VoxelField field;

    auto retrain = [&](int step_index) {
        field = VoxelField(cfg.field_resolution, scene.bounds, cfg.variance_floor,
                           scene.background);
        Rng train_rng = root.substream("train").substream(static_cast<uint64_t>(step_index));
        train_for_method(field, run.training, cfg.planner.method, cfg.train, train_rng);
    };

    uint64_t eval_seed = root.substream("eval").next_u64();

    for (int step = 0; step < cfg.planner.horizon; ++step) {
        MappingStep ms;
        ms.step = step;
        auto t0 = std::chrono::steady_clock::now();
        retrain(step);
        ms.train_seconds = seconds_since(t0);
        if (cfg.eval.eval_every > 0 && step % cfg.eval.eval_every == 0)
            run.per_step_metrics.emplace_back(
                step, evaluate_field(field, scene, run.training.poses, cfg.eval, eval_seed));

        auto t1 = std::chrono::steady_clock::now();
        Rng cand_rng = root.substream("cand").substream(static_cast<uint64_t>(step));
        ms.candidates = sample_candidates(field, scene.bounds, current_pose,
                                          cfg.planner.candidates, cand_rng, cfg.planner);
        size_t pick;
        if (random_method) {
            pick = cand_rng.uniform_index(ms.candidates.items.size());
            ms.selected = ms.candidates.items[pick].pose;
        } else {
            pick = select_nbv(field, ms.candidates, method, priors, cfg.entropy, corr, cfg.planner,
                              plan_intr);
            ms.selected = ms.candidates.items[pick].pose;
            if (cfg.planner.refine) {
                Rng refine_rng = root.substream("refine").substream(static_cast<uint64_t>(step));
                ms.selected = refine_topk(field, ms.candidates, cfg.planner.refine_topk, method,
                                          priors, cfg.entropy, corr, cfg.planner, plan_intr,
                                          refine_rng)
                                  .pose;
            }
        }
        ms.selected_index = pick;
        ms.plan_seconds = seconds_since(t1);
        append_candidate_rows(csv, step, ms.candidates, pick);
        csv.flush();  // keep partial output on a later planning failure

        Image img;
        ScalarImage depth;
        gt_render(scene, ms.selected, train_intr, cfg.eval.eval_samples, obs_rng.next_u64(), img,
                  depth);
        run.training.poses.push_back(ms.selected);
        run.training.images.push_back(img);
        run.selected.push_back(ms.selected);
        current_pose = ms.selected;
        run.steps.push_back(std::move(ms));
    }

    // final retrain over everything collected, then evaluate
    retrain(cfg.planner.horizon);
    run.final_field = field;
    run.metrics = evaluate_field(field, scene, run.training.poses, cfg.eval, eval_seed);
    return run;
}

}  // namespace nvf
