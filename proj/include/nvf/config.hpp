#pragma once

#include <cstdint>
#include <string>

#include "nvf/metrics.hpp"
#include "nvf/scene.hpp"
#include "nvf/train.hpp"
#include "nvf/uncertainty.hpp"

namespace nvf {

struct PlannerConfig {
    std::string method = "nvf";  // registry tag or "random"
    int candidates = 64;
    int horizon = 20;
    bool refine = false;
    int refine_topk = 3;
    int refine_steps = 5;
    double refine_lr = 1e-4;
    int refine_pixels = 64;
    double collision_alpha = 0.1;  // occlusion over one voxel at the threshold
    double shell_margin = 0.5;
    double candidate_inner_scale = 1.0;  // 0 = sample the whole space
    // Candidate positions are drawn inside the bounds scaled by this factor;
    // enclosed scenes shrink it so "the space" excludes the outer shell's
    // never-observed interior.
    double candidate_region_scale = 1.0;
    double lookat_jitter = 0.25;
    int entropy_resolution = 32;
    int n_initial = 9;
    bool correlated = true;
    int attempt_factor = 20;
};

struct RunConfig {
    SceneSpec scene;
    int field_resolution = 48;
    double variance_floor = 1e-6;
    int train_image_resolution = 64;
    TrainConfig train;
    UncertaintyPriors priors;
    double prior_sigma0 = 0.0;  // 0 = derive from the mean sample spacing
    double correlation_k = 0.25;
    EntropyConfig entropy;
    PlannerConfig planner;
    EvalConfig eval;
    double fov = 1.0;
    uint64_t seed = 7;
    std::string out_dir = "out";
    int threads = 0;  // 0 = library default

    // sigma_0 so that one mean sample spacing occludes with probability 1/2
    double resolved_sigma0(double scene_diagonal) const;
    UncertaintyPriors resolved_priors(double scene_diagonal) const;
    CorrelationConfig correlation(double scene_diagonal) const;
};

// Flat `[section] key = value` text. Unknown sections or keys are rejected
// with the offending line; parse(serialize(c)) == c on all recognized keys.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

// FNV-1a over the canonical serialization.
uint64_t config_hash(const RunConfig& cfg);

// Key-by-key reference with defaults and one-line docs.
std::string config_reference();

}  // namespace nvf
