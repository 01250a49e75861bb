#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvf/config.hpp"
#include "nvf/field.hpp"
#include "nvf/metrics.hpp"
#include "nvf/scene.hpp"
#include "nvf/train.hpp"
#include "nvf/uncertainty.hpp"

namespace nvf {

struct Candidate {
    Pose pose;
    double entropy = 0.0;
    bool feasible = true;
};

struct CandidateSet {
    std::vector<Candidate> items;
    uint64_t seed = 0;
    int shortfall = 0;  // requested minus delivered after the attempt cap
};

// Collision threshold: density whose per-voxel occlusion equals
// `collision_alpha`.
double collision_sigma_threshold(const VoxelField& field, double collision_alpha);

// Max interpolated density along the straight segment a -> b, marched at the
// field's voxel spacing. Samples within `skip_radius` of `a` are ignored so
// an agent whose own position densified after retraining can still depart.
double segment_max_density(const VoxelField& field, const Vec3& a, const Vec3& b,
                           double skip_radius = 0.0);

// n feasible candidates (free pose position, free straight segment from the
// current pose), resampling up to attempt_factor * n times. Throws
// PlanningError when nothing feasible turns up.
CandidateSet sample_candidates(const VoxelField& field, const Aabb& bounds,
                               const Pose& current_pose, int n, Rng& rng,
                               const PlannerConfig& cfg);

// First index with the maximal entropy (the deterministic tie-break).
size_t argmax_entropy(const CandidateSet& candidates);

// Fills candidate entropies and returns the argmax index (first index wins
// ties). Throws PlanningError on an empty set.
size_t select_nbv(const VoxelField& field, CandidateSet& candidates, Method method,
                  const UncertaintyPriors& priors, const EntropyConfig& ecfg,
                  const CorrelationConfig& corr, const PlannerConfig& pcfg,
                  const CameraIntrinsics& intr);

struct RefineResult {
    Pose pose;
    std::vector<double> trace;   // subset entropy after each accepted step
    double full_entropy = 0.0;   // full-image entropy of the returned pose
    bool reverted = false;       // refinement lost to the starting pose
};

// Finite-difference ascent of the subset entropy over the 6-vector pose
// parameterization; steps are accepted only when the re-evaluated entropy
// does not decrease, and the returned pose never scores below the start
// under the full-image entropy.
RefineResult refine_pose(const VoxelField& field, const Pose& pose, Method method,
                         const UncertaintyPriors& priors, const EntropyConfig& ecfg,
                         const CorrelationConfig& corr, const PlannerConfig& pcfg,
                         const CameraIntrinsics& intr, int steps, double lr,
                         int pixel_subset_size, Rng& rng);

// Refines the k best candidates and returns the full-image-entropy argmax.
RefineResult refine_topk(const VoxelField& field, const CandidateSet& candidates, int k,
                         Method method, const UncertaintyPriors& priors, const EntropyConfig& ecfg,
                         const CorrelationConfig& corr, const PlannerConfig& pcfg,
                         const CameraIntrinsics& intr, Rng& rng);

struct MappingStep {
    int step = 0;
    Pose selected;
    size_t selected_index = 0;
    CandidateSet candidates;
    double train_seconds = 0.0;
    double plan_seconds = 0.0;
};

struct MappingRun {
    TrainingSet training;          // grows by one view per step
    std::vector<Pose> selected;    // chosen pose per step
    std::vector<MappingStep> steps;
    VoxelField final_field;
    MetricsRecord metrics;
    std::vector<std::pair<int, MetricsRecord>> per_step_metrics;  // when eval_every > 0
    uint64_t config_digest = 0;
};

// Greedy next-best-view loop: retrain from scratch, sample candidates,
// select (optionally refine), observe, repeat; evaluation runs after the
// final retrain. Deterministic per seed. When `out_dir` is non-empty the
// per-step candidate CSV and artifacts are written there.
MappingRun run_active_mapping(const GroundTruthScene& scene, const RunConfig& cfg,
                              const std::string& out_dir = "");

// Training schedule shared by the mapping loop and the CLI: backbone always,
// heads only when the method consumes them.
void train_for_method(VoxelField& field, const TrainingSet& data, const std::string& method_tag,
                      const TrainConfig& cfg, Rng rng);

bool method_needs_variance(const std::string& tag);
bool method_needs_visibility(const std::string& tag);

}  // namespace nvf
