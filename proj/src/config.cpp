#include "nvf/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "nvf/errors.hpp"

namespace nvf {

double RunConfig::resolved_sigma0(double scene_diagonal) const {
    if (prior_sigma0 > 0.0) return prior_sigma0;
    // one mean sample spacing occludes with probability 1/2
    double mean_spacing = scene_diagonal / entropy.samples_per_ray;
    return std::log(2.0) / mean_spacing;
}

UncertaintyPriors RunConfig::resolved_priors(double scene_diagonal) const {
    UncertaintyPriors p = priors;
    p.sigma0 = resolved_sigma0(scene_diagonal);
    return p;
}

CorrelationConfig RunConfig::correlation(double scene_diagonal) const {
    CorrelationConfig c;
    c.k = correlation_k;
    c.scene_diameter = scene_diagonal;
    c.dphi = 0.0;  // filled from the intrinsics at the call site
    return c;
}

namespace {

std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
std::string fmt_vec3(const Vec3& v) { return fmt_f64(v.x) + " " + fmt_f64(v.y) + " " + fmt_f64(v.z); }

double parse_f64(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ConfigError("expected a number, got '" + s + "'");
    return v;
}
int64_t parse_i64(const std::string& s) {
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str()) throw ConfigError("expected an integer, got '" + s + "'");
    return v;
}
uint64_t parse_u64(const std::string& s) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str()) throw ConfigError("expected an unsigned integer, got '" + s + "'");
    return v;
}
bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("expected true/false, got '" + s + "'");
}
Vec3 parse_vec3(const std::string& s) {
    std::istringstream in(s);
    Vec3 v;
    if (!(in >> v.x >> v.y >> v.z)) throw ConfigError("expected three numbers, got '" + s + "'");
    return v;
}

struct KeySpec {
    std::string section, key, doc;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define F64_KEY(sec, name, ref, doc)                                                    \
    {sec, name, doc, [](const RunConfig& c) { return fmt_f64(c.ref); },                 \
     [](RunConfig& c, const std::string& s) { c.ref = parse_f64(s); }}
#define INT_KEY(sec, name, ref, doc)                                                    \
    {sec, name, doc, [](const RunConfig& c) { return std::to_string(c.ref); },          \
     [](RunConfig& c, const std::string& s) { c.ref = static_cast<int>(parse_i64(s)); }}
#define U64_KEY(sec, name, ref, doc)                                                    \
    {sec, name, doc, [](const RunConfig& c) { return std::to_string(c.ref); },          \
     [](RunConfig& c, const std::string& s) { c.ref = parse_u64(s); }}
#define BOOL_KEY(sec, name, ref, doc)                                                   \
    {sec, name, doc, [](const RunConfig& c) { return c.ref ? "true" : "false"; },       \
     [](RunConfig& c, const std::string& s) { c.ref = parse_bool(s); }}
#define STR_KEY(sec, name, ref, doc)                                                    \
    {sec, name, doc, [](const RunConfig& c) { return c.ref; },                          \
     [](RunConfig& c, const std::string& s) { c.ref = s; }}
#define VEC3_KEY(sec, name, ref, doc)                                                   \
    {sec, name, doc, [](const RunConfig& c) { return fmt_vec3(c.ref); },                \
     [](RunConfig& c, const std::string& s) { c.ref = parse_vec3(s); }}

const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = {
        STR_KEY("scene", "generator", scene.generator, "two-room | blocks | hubble"),
        INT_KEY("scene", "resolution", scene.resolution, "ground-truth grid resolution"),
        U64_KEY("scene", "seed", scene.seed, "procedural generation seed"),
        F64_KEY("scene", "sigma_solid", scene.sigma_solid, "density of solid voxels"),
        VEC3_KEY("scene", "background", scene.background, "escape color, three values in [0,1]"),
        INT_KEY("scene", "blocks_count", scene.blocks_count, "box count for the blocks generator"),

        INT_KEY("field", "resolution", field_resolution, "trainable grid resolution"),
        F64_KEY("field", "variance_floor", variance_floor, "lower bound on color variance"),
        INT_KEY("field", "train_image_resolution", train_image_resolution,
                "resolution of captured training views"),

        INT_KEY("train", "backbone_iters", train.backbone_iters, "photometric iterations"),
        F64_KEY("train", "backbone_lr", train.backbone_lr, "Adam step for density/color"),
        INT_KEY("train", "backbone_batch", train.backbone_batch, "rays per photometric batch"),
        INT_KEY("train", "head_iters", train.head_iters, "iterations for each head phase"),
        F64_KEY("train", "variance_lr", train.variance_lr, "Adam step for the variance head"),
        F64_KEY("train", "visibility_lr", train.visibility_lr, "Adam step for the visibility head"),
        INT_KEY("train", "head_batch", train.head_batch, "rays per variance batch"),
        INT_KEY("train", "vis_batch", train.vis_batch, "points per visibility batch"),
        INT_KEY("train", "vis_pool", train.vis_pool, "precomputed visibility label pool"),
        INT_KEY("train", "samples_per_ray", train.samples_per_ray, "samples per training ray"),
        BOOL_KEY("train", "stratified", train.stratified, "stratified depth jitter while training"),
        F64_KEY("train", "adam_beta1", train.adam_beta1, "Adam beta1"),
        F64_KEY("train", "adam_beta2", train.adam_beta2, "Adam beta2"),

        VEC3_KEY("priors", "mu0", priors.mu0, "prior color mean"),
        VEC3_KEY("priors", "q0", priors.q0, "prior color variance (diagonal)"),
        F64_KEY("priors", "beta", priors.beta, "occlusion-prediction accuracy in [0,1]"),
        F64_KEY("priors", "sigma0", prior_sigma0, "prior density; 0 derives it from spacing"),

        F64_KEY("correlation", "k", correlation_k, "correlation length factor"),
        BOOL_KEY("correlation", "correlated", planner.correlated,
                 "apply the adjacent-ray correction to image entropy"),

        INT_KEY("entropy", "samples_per_ray", entropy.samples_per_ray, "samples per entropy ray"),
        F64_KEY("entropy", "novar_q", entropy.novar_q, "constant variance for the no-var ablation"),

        STR_KEY("planner", "method", planner.method, "registry tag or 'random'"),
        INT_KEY("planner", "candidates", planner.candidates, "candidate poses per step"),
        INT_KEY("planner", "horizon", planner.horizon, "mapping steps"),
        BOOL_KEY("planner", "refine", planner.refine, "gradient-based pose refinement"),
        INT_KEY("planner", "refine_topk", planner.refine_topk, "candidates refined per step"),
        INT_KEY("planner", "refine_steps", planner.refine_steps, "ascent steps per refinement"),
        F64_KEY("planner", "refine_lr", planner.refine_lr, "ascent step scale"),
        INT_KEY("planner", "refine_pixels", planner.refine_pixels, "pixel subset for refinement"),
        F64_KEY("planner", "collision_alpha", planner.collision_alpha,
                "per-voxel occlusion at the collision threshold"),
        F64_KEY("planner", "shell_margin", planner.shell_margin, "candidate shell margin"),
        F64_KEY("planner", "inner_scale", planner.candidate_inner_scale,
                "inner exclusion box scale; 0 samples the whole space"),
        F64_KEY("planner", "region_scale", planner.candidate_region_scale,
                "candidate positions stay inside the bounds scaled by this"),
        F64_KEY("planner", "lookat_jitter", planner.lookat_jitter, "look-at target jitter"),
        INT_KEY("planner", "entropy_resolution", planner.entropy_resolution,
                "planning entropy image resolution"),
        INT_KEY("planner", "n_initial", planner.n_initial, "initial training views"),
        INT_KEY("planner", "attempt_factor", planner.attempt_factor,
                "rejection attempts per requested candidate"),

        INT_KEY("eval", "test_views", eval.test_views, "fixed test viewpoints"),
        INT_KEY("eval", "resolution", eval.eval_resolution, "evaluation render resolution"),
        INT_KEY("eval", "samples", eval.eval_samples, "samples per evaluation ray"),
        F64_KEY("eval", "cr_threshold_frac", eval.cr_threshold_frac,
                "completion-ratio threshold as a diameter fraction"),
        F64_KEY("eval", "coverage_tau", eval.coverage_tau, "transmittance for 'observed'"),
        F64_KEY("eval", "surface_threshold", eval.surface_threshold,
                "density threshold for surface extraction"),
        INT_KEY("eval", "max_gt_points", eval.max_gt_points, "cap on ground-truth points"),
        INT_KEY("eval", "every", eval.eval_every, "evaluate every k-th step; 0 = final only"),

        U64_KEY("run", "seed", seed, "root seed; all substreams derive from it"),
        STR_KEY("run", "out", out_dir, "output directory"),
        INT_KEY("run", "threads", threads, "worker threads; 0 = library default"),
        F64_KEY("run", "fov", fov, "vertical field of view (radians)"),
    };
    return table;
}

#undef F64_KEY
#undef INT_KEY
#undef U64_KEY
#undef BOOL_KEY
#undef STR_KEY
#undef VEC3_KEY

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& k : key_table())
                if (k.section == section) known = true;
            if (!known)
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const auto& k : key_table()) {
            if (k.section == section && k.key == key) {
                try {
                    k.set(cfg, value);
                } catch (const ConfigError& e) {
                    throw ConfigError("line " + std::to_string(line_no) + ", key " + section + "." +
                                      key + ": " + e.what());
                }
                found = true;
                break;
            }
        }
        if (!found)
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key +
                              "' in section [" + section + "]");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& k : key_table()) {
        if (k.section != section) {
            if (!section.empty()) out << "\n";
            section = k.section;
            out << "[" << section << "]\n";
        }
        out << k.key << " = " << k.get(cfg) << "\n";
    }
    return out.str();
}

uint64_t config_hash(const RunConfig& cfg) {
    std::string text = serialize_config(cfg);
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : text) h = (h ^ static_cast<uint64_t>(static_cast<unsigned char>(c))) * 0x100000001b3ull;
    return h;
}

std::string config_reference() {
    std::ostringstream out;
    RunConfig defaults;
    std::string section;
    for (const auto& k : key_table()) {
        if (k.section != section) {
            if (!section.empty()) out << "\n";
            section = k.section;
            out << "[" << section << "]\n";
        }
        out << "  " << k.key << " = " << k.get(defaults) << "\n      " << k.doc << "\n";
    }
    return out.str();
}

}  // namespace nvf
