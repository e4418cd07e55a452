#include "anchorpano/attention_steering.hpp"
#include "anchorpano/hole_assignment.hpp"
#include "anchorpano/losses_metrics.hpp"
#include "anchorpano/pano_selection.hpp"
#include "anchorpano/scene_ops.hpp"
#include "anchorpano/serialize.hpp"
#include "anchorpano/synthetic_scenes.hpp"

#include "cli_common.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace anchorpano::cli {

namespace {

struct PipelineOptions {
    std::uint64_t seed = 0;
    int input_views = 3;
    int input_height = 128;
    double input_fov = 100.0;
    double point_noise = 0.002;
    int point_stride = 2;
    int max_planes = 12;
    std::size_t min_inliers = 100;
    int ransac_iterations = 300;
    double inlier_threshold = 0.02;
    int voxel_res = 32;
    int candidates = 6;
    int candidate_height = 64;
    double h_star = 0.4;
    double sigma_h = 0.2;
    int grid_rows = 64;
    int grid_cols = 128;
    int patch = 16;
    int band_width = 3;
    double sigma_d = 4.0;
    double w_geo = 0.5;
    double w_bnd = 0.5;
    double confidence_floor = 0.05;
    double lambda = 0.4;
    double tau = 0.5;
    double t = 0.8;
    int layer = 20;
    int heads = 2;
    int head_dim = 16;
    std::size_t diagnostic_samples = 256;

    void validate() const {
        auto require = [](bool ok, const char* m) {
            if (!ok) throw ConfigError(m);
        };
        require(input_views >= 1, "input-views must be at least 1");
        require(input_height >= 8 && candidate_height >= 8, "render heights must be at least 8");
        require(input_fov > 0.0 && input_fov <= 360.0, "input-fov must lie in (0, 360]");
        require(point_noise >= 0.0, "point-noise must be non-negative");
        require(point_stride >= 1, "point-stride must be at least 1");
        require(voxel_res >= 1, "voxel-res must be at least 1");
        require(candidates >= 1, "candidates must be at least 1");
        require(grid_rows > 0 && grid_cols == 2 * grid_rows && patch > 0, "token grid must be 2:1 with a positive patch");
        require(sigma_h > 0.0 && sigma_d > 0.0, "sigma-h and sigma-d must be positive");
        require(t >= 0.0 && t <= 1.0, "t must lie in [0, 1]");
        require(heads >= 1 && head_dim >= 1, "heads and head-dim must be positive");
        require(diagnostic_samples >= 1, "diagnostic-samples must be at least 1");
    }
};

// Everything outside a horizontal window of `fov` degrees around the camera's
// forward direction and +-fov/3 in latitude.
HoleSpec outside_window(double fov_deg) {
    constexpr double pi = std::numbers::pi;
    const double half_lon = std::min(fov_deg, 360.0) * pi / 360.0;
    const double half_lat = std::min(fov_deg / 3.0, 90.0) * pi / 180.0;
    HoleSpec s;
    if (half_lon < pi) {
        s.rects.push_back({-pi - 1e-9, -half_lon, -pi / 2 - 1e-9, pi / 2 + 1e-9});
        s.rects.push_back({half_lon, pi + 1e-9, -pi / 2 - 1e-9, pi / 2 + 1e-9});
    }
    s.rects.push_back({-half_lon, half_lon, half_lat, pi / 2 + 1e-9});
    s.rects.push_back({-half_lon, half_lon, -pi / 2 - 1e-9, -half_lat});
    return s;
}

Image masked_input(const Image& full, const Mask& holes) {
    Image out = full;
    for (int r = 0; r < full.height; ++r)
        for (int c = 0; c < full.width; ++c)
            if (holes.at(r, c))
                for (int ch = 0; ch < out.channels; ++ch) out.at(r, c, ch) = 0.0f;
    return out;
}

// Fitted plane matching a ground-truth plane, by normal and offset.
std::optional<int> match_truth(const Plane& fitted, std::span<const Plane> truth) {
    for (const auto& t : truth)
        if (t.is_layout() && fitted.normal.dot(t.normal) > std::cos(5.0 * std::numbers::pi / 180.0) &&
            std::abs(fitted.offset - t.offset) < 0.1)
            return t.id;
    return std::nullopt;
}

// Synthetic attention state whose observed keys cluster by plane. Every
// token shares a bias direction and each plane gets its own direction from a
// random orthonormal basis, so centroid dot products stay positive. Planes
// beyond the head dimension reuse directions.
AttentionState synthetic_attention(const LatentTokenGrid& grid, const PlaneTokenSets& sets, int layer, int heads,
                                   int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3), gauss(0.0, 1.0);
    AttentionState s(layer, heads, grid.count(), dim, 0);

    Eigen::MatrixXd m(dim, dim);
    for (int c = 0; c < dim; ++c)
        for (int r = 0; r < dim; ++r) m(r, c) = gauss(rng);
    const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    const Eigen::VectorXd bias = basis.col(0);
    std::map<int, Eigen::VectorXd> dir;
    int next = 0;
    for (const auto& [g, toks] : sets.observed)
        dir[g] = dim > 1 ? Eigen::VectorXd(basis.col(1 + next++ % (dim - 1))) : Eigen::VectorXd::Zero(dim);

    std::vector<int> owner(static_cast<std::size_t>(grid.count()), kNoPlane);
    std::vector<int> target(static_cast<std::size_t>(grid.count()), kNoPlane);
    for (const auto& [g, toks] : sets.observed)
        for (int t : toks) owner[static_cast<std::size_t>(t)] = g;
    // Hole queries lean weakly toward their assigned plane.
    for (const auto& [g, toks] : sets.holes)
        if (dir.contains(g))
            for (int t : toks) target[static_cast<std::size_t>(t)] = g;
    for (int h = 0; h < heads; ++h)
        for (int i = 0; i < grid.count(); ++i) {
            auto q = s.q_row(h, i);
            auto k = s.k_row(h, i);
            const int g = owner[static_cast<std::size_t>(i)];
            const int a = target[static_cast<std::size_t>(i)];
            for (int d = 0; d < dim; ++d) {
                const double kb = g == kNoPlane ? 0.0 : 2.0 * (bias(d) + dir[g](d));
                const double qb = bias(d) + (a == kNoPlane ? 0.0 : 0.5 * dir[a](d));
                k[static_cast<std::size_t>(d)] = static_cast<float>(kb + noise(rng));
                q[static_cast<std::size_t>(d)] = static_cast<float>(qb + noise(rng));
            }
        }
    return s;
}

double mean_assigned_mass(const AttentionState& s, std::span<const int> sample, const PlaneTokenSets& sets) {
    if (sample.empty()) return 0.0;
    double total = 0.0;
    for (int i : sample) {
        const auto m = attention_mass_report(s, 0, i, sets);
        const auto g = sets.hole_plane(i);
        if (g && m.per_plane.count(*g)) total += m.per_plane.at(*g);
    }
    return total / static_cast<double>(sample.size());
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

CommandPtr make_pipeline(CLI::App& root) {
    auto o = std::make_shared<PipelineOptions>();
    auto cmd = make_command(root, "pipeline", "Run every stage on a seeded synthetic scene");
    auto& p = *cmd->params;
    p.add("seed", o->seed, "Root seed");
    p.add("input-views", o->input_views, "Number of sparse input views");
    p.add("input-height", o->input_height, "Render height of the input views");
    p.add("input-fov", o->input_fov, "Horizontal field of view of each input view, degrees");
    p.add("point-noise", o->point_noise, "Gaussian noise added to back-projected points");
    p.add("point-stride", o->point_stride, "Pixel stride for back-projection");
    p.add("max-planes", o->max_planes, "Upper bound on extracted planes");
    p.add("min-inliers", o->min_inliers, "Smallest plane support");
    p.add("ransac-iterations", o->ransac_iterations, "Hypotheses per plane");
    p.add("inlier-threshold", o->inlier_threshold, "Point-to-plane inlier distance");
    p.add("voxel-res", o->voxel_res, "Voxels per axis of the visibility grid");
    p.add("candidates", o->candidates, "Candidate panorama poses");
    p.add("candidate-height", o->candidate_height, "Render height for candidate scoring");
    p.add("h-star", o->h_star, "Preferred hole ratio");
    p.add("sigma-h", o->sigma_h, "Width of the hole-ratio preference");
    p.add("grid-rows", o->grid_rows, "Token grid rows");
    p.add("grid-cols", o->grid_cols, "Token grid columns");
    p.add("patch", o->patch, "Pixels per token side");
    p.add("band-width", o->band_width, "Boundary band in tokens");
    p.add("sigma-d", o->sigma_d, "Distance scale of the boundary confidence");
    p.add("w-geo", o->w_geo, "Weight of the geometric confidence");
    p.add("w-bnd", o->w_bnd, "Weight of the boundary confidence");
    p.add("confidence-floor", o->confidence_floor, "Smallest confidence that is steered");
    p.add("lambda", o->lambda, "Steering strength");
    p.add("tau", o->tau, "Steering is active while t > tau");
    p.add("t", o->t, "Flow timestep of the steering demonstration");
    p.add("layer", o->layer, "Layer index of the steering demonstration");
    p.add("heads", o->heads, "Attention heads of the synthetic state");
    p.add("head-dim", o->head_dim, "Head dimension of the synthetic state");
    p.add("diagnostic-samples", o->diagnostic_samples, "Hole tokens sampled for diagnostics");

    cmd->run = [o](RunRecord& run) {
        const PipelineOptions& opt = *o;
        opt.validate();
        SteeringConfig steer_cfg;
        steer_cfg.lambda = opt.lambda;
        steer_cfg.tau = opt.tau;
        steer_cfg.confidence_floor = opt.confidence_floor;
        steer_cfg.validate();

        // Scene and sparse inputs.
        const SyntheticRoom room = make_seeded_room(opt.seed);
        run.write_json_output("scene/planes_truth.json", planes_to_json(room.planes));
        const HoleSpec window = outside_window(opt.input_fov);
        PointCloud cloud;
        std::vector<DepthView> views;
        std::vector<double> heights;
        std::mt19937_64 noise_rng(derive_seed(opt.seed, "point-noise"));
        std::normal_distribution<double> noise(0.0, opt.point_noise > 0.0 ? opt.point_noise : 1.0);
        json input_poses = json::array();
        for (int v = 0; v < opt.input_views; ++v) {
            const CameraPose pose =
                seeded_interior_pose(room, derive_seed(derive_seed(opt.seed, "input-view"), static_cast<std::uint64_t>(v)));
            const ErpRender r = render_erp(room, pose, opt.input_height, 2 * opt.input_height, window);
            DepthMap depth = r.depth;
            for (std::size_t i = 0; i < depth.data.size(); ++i)
                if (r.holes.data[i]) depth.data[i] = 0.0;
            views.push_back({depth, pose});
            heights.push_back(pose.center.y());
            for (const Vec3& x : backproject(depth, pose, nullptr, opt.point_stride).points) {
                Vec3 y = x;
                if (opt.point_noise > 0.0)
                    for (int a = 0; a < 3; ++a) y[a] += noise(noise_rng);
                cloud.points.push_back(y);
            }
            run.write_png_output("inputs/view" + std::to_string(v) + ".png", r.image);
            input_poses.push_back(pose_to_json(pose));
        }
        run.write_json_output("inputs/poses.json", input_poses);
        write_point_cloud(run.path("inputs/points.f32"), cloud);
        run.tensor_output("inputs/points.f32");

        // Planes.
        ExtractOptions eo;
        eo.max_planes = opt.max_planes;
        eo.min_inliers = opt.min_inliers;
        eo.ransac = {opt.ransac_iterations, opt.inlier_threshold, derive_seed(opt.seed, "ransac")};
        ExtractedPlanes ex = extract_planes(cloud, eo);
        label_planes_heuristically(ex.planes, cloud.points, heights, Vec3::UnitY(), 2.0 * opt.inlier_threshold);
        const std::vector<Plane>& planes = ex.planes;
        run.write_json_output("planes/planes.json", planes_to_json(planes));
        int layout_count = 0;
        for (const auto& pl : planes) layout_count += pl.is_layout() ? 1 : 0;
        if (layout_count == 0) throw DataError("no layout planes were recovered");

        // Visibility and candidate selection.
        const double diagonal = bounding_diagonal(cloud.points);
        Bounds3 bounds{cloud.points.front(), cloud.points.front()};
        for (const auto& x : cloud.points) {
            bounds.min = bounds.min.cwiseMin(x);
            bounds.max = bounds.max.cwiseMax(x);
        }
        bounds = bounds.inflated(0.05);
        const VoxelVisibilityGrid vis = build_visibility_grid(views, bounds, {opt.voxel_res, opt.voxel_res, opt.voxel_res});
        write_tensor(run.path("selection/visibility.u8"),
                     RawTensor::from_u8({opt.voxel_res, opt.voxel_res, opt.voxel_res}, vis.observed));
        run.tensor_output("selection/visibility.u8");

        ScoreParams sp;
        sp.h_star = opt.h_star;
        sp.sigma_h = opt.sigma_h;
        std::vector<PanoCandidate> cands;
        for (int i = 0; i < opt.candidates; ++i) {
            PanoCandidate c;
            c.index = i;
            c.pose = seeded_interior_pose(room, derive_seed(derive_seed(opt.seed, "candidate"), static_cast<std::uint64_t>(i)));
            const ErpRender r = render_erp(room, c.pose, opt.candidate_height, 2 * opt.candidate_height);
            const Mask holes = unobserved_mask(r.depth, c.pose, vis);
            c.hole_ratio = mask_fraction(holes);
            c.new_voxels = count_new_voxels(c.pose, holes, vis, {diagonal, 1});
            const PlaneIdMap ids = label_pixels(r.depth, c.pose, planes, 2.0 * opt.inlier_threshold, &holes);
            const std::size_t min_pixels = ids.size() / 100;
            for (const auto& pl : planes) {
                if (!pl.is_layout()) continue;
                const auto n = static_cast<std::size_t>(std::count(ids.data.begin(), ids.data.end(), pl.id));
                if (n > 0 && n >= min_pixels) ++c.layout_planes;
            }
            score_candidate(c, sp);
            cands.push_back(c);
        }
        const auto ranking = rank_candidates(cands);
        json ranking_json = json::array();
        for (const auto& c : ranking) ranking_json.push_back(candidate_to_json(c));
        run.write_json_output("selection/ranking.json", ranking_json);
        const PanoCandidate& best = ranking.front();

        // Hole assignment on the chosen panorama.
        const int H = opt.grid_rows * opt.patch, W = opt.grid_cols * opt.patch;
        const ErpRender target = render_erp(room, best.pose, H, W);
        const Mask holes = unobserved_mask(target.depth, best.pose, vis);
        const PlaneIdMap ids = label_pixels(target.depth, best.pose, planes, 2.0 * opt.inlier_threshold, &holes);
        const Image input = masked_input(target.image, holes);
        run.write_png_output("completion/input.png", input);
        run.write_png_output("completion/target.png", target.image);
        write_plane_map(run.path("completion/plane_ids.i32"), ids);
        run.tensor_output("completion/plane_ids.i32");
        write_mask(run.path("completion/holes.u8"), holes);
        run.tensor_output("completion/holes.u8");

        const double sigma_l = diagonal / 4.0;
        const LatentTokenGrid grid = downsample_plane_map(ids, holes, opt.grid_rows, opt.grid_cols, opt.patch);
        const auto geo = assign_geometric(grid, best.pose, planes, sigma_l);
        const auto bnd = assign_boundary(grid, planes, {opt.band_width, opt.sigma_d, 1e-6});
        const auto fused = fuse_assignments(geo, bnd, opt.w_geo, opt.w_bnd);
        const PlaneTokenSets sets = build_token_sets(grid, fused, planes, opt.confidence_floor);
        const Grid<double> conf = confidence_map(fused, grid);
        run.write_json_output("assign/assignments.json", assignments_to_json(fused, grid));
        run.write_json_output("assign/token_sets.json", token_sets_to_json(sets));
        write_plane_map(run.path("assign/assignment_map.i32"), assignment_map(fused, grid));
        run.tensor_output("assign/assignment_map.i32");
        write_png_gray(run.path("assign/confidence.png"), conf, 0.0, 1.0);
        run.output("assign/confidence.png");

        // Agreement with the analytic oracle on the true room.
        std::vector<bool> hole_tokens(static_cast<std::size_t>(grid.count()), false);
        for (int i : grid.hole_tokens()) hole_tokens[static_cast<std::size_t>(i)] = true;
        const auto truth = ground_truth_assignment(room, best.pose, opt.grid_rows, opt.grid_cols, opt.patch, hole_tokens);
        std::size_t assigned = 0, agree = 0;
        for (const auto& a : fused) {
            if (!a.plane_id) continue;
            ++assigned;
            const auto m = match_truth(*find_plane(planes, *a.plane_id), room.planes);
            if (m && truth[static_cast<std::size_t>(a.token)] == *m) ++agree;
        }

        // Plane-mean fill of the holes, against a global-mean fill.
        std::map<int, std::array<double, 4>> plane_color;
        std::array<double, 4> global{0, 0, 0, 0};
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                if (holes.at(r, c)) continue;
                auto& acc = plane_color[ids.at(r, c)];
                for (int ch = 0; ch < 3; ++ch) {
                    acc[static_cast<std::size_t>(ch)] += target.image.at(r, c, ch);
                    global[static_cast<std::size_t>(ch)] += target.image.at(r, c, ch);
                }
                acc[3] += 1.0;
                global[3] += 1.0;
            }
        const Grid<int> token_plane = assignment_map(fused, grid);
        Image completed = input, baseline = input;
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                if (!holes.at(r, c)) continue;
                const int g = token_plane.at(r / opt.patch, c / opt.patch);
                const auto it = plane_color.find(g);
                const auto& fill = (g != kNoPlane && it != plane_color.end()) ? it->second : global;
                for (int ch = 0; ch < 3; ++ch) {
                    completed.at(r, c, ch) = static_cast<float>(fill[static_cast<std::size_t>(ch)] / std::max(fill[3], 1.0));
                    baseline.at(r, c, ch) = static_cast<float>(global[static_cast<std::size_t>(ch)] / std::max(global[3], 1.0));
                }
                completed.at(r, c, 3) = 1.0f;
                baseline.at(r, c, 3) = 1.0f;
            }
        run.write_png_output("completion/completed.png", completed);
        run.write_png_output("completion/baseline.png", baseline);
        const Image target_rgb = rgb_only(target.image);
        const Image completed_rgb = rgb_only(completed), baseline_rgb = rgb_only(baseline);

        // Steering on a synthetic attention state shaped like the token grid.
        const AttentionState state =
            synthetic_attention(grid, sets, opt.layer, opt.heads, opt.head_dim, derive_seed(opt.seed, "attention"));
        const AttentionState steered = apply_steering(state, steer_cfg, sets, opt.t);
        write_attention_state(run.path("steer/q_in.f32"), run.path("steer/k_in.f32"), state);
        write_attention_state(run.path("steer/q.f32"), run.path("steer/k.f32"), steered);
        for (const char* rel : {"steer/q_in.f32", "steer/k_in.f32", "steer/q.f32", "steer/k.f32"}) run.tensor_output(rel);
        const auto sample = sample_hole_tokens(sets, opt.diagnostic_samples, derive_seed(opt.seed, "diagnostic-sample"));
        const std::uint64_t other_seed = derive_seed(opt.seed, "diagnostic-other");
        auto affinity_json = [&](const AttentionState& st) {
            return sample.empty() ? json(nullptr) : optional_json(affinity_ratio(st, sample, sets, 1e-6, other_seed));
        };

        json summary = {
            {"room", {{"shape", room.shape == RoomShape::box ? "box" : "l"}, {"dims", vec3_to_json(room.dims)}}},
            {"points", cloud.points.size()},
            {"planes", {{"count", planes.size()}, {"layout", layout_count}}},
            {"selection", {{"best_index", best.index}, {"best_score", best.score}, {"hole_ratio", best.hole_ratio}}},
            {"assignment",
             {{"sigma_l", sigma_l},
              {"hole_tokens", fused.size()},
              {"assigned", assigned},
              {"oracle_agreement", assigned ? static_cast<double>(agree) / static_cast<double>(assigned) : 0.0}}},
            {"completion",
             {{"plane_fill_psnr", psnr(completed_rgb, target_rgb)},
              {"plane_fill_ssim", ssim(completed_rgb, target_rgb)},
              {"mean_fill_psnr", psnr(baseline_rgb, target_rgb)},
              {"mean_fill_ssim", ssim(baseline_rgb, target_rgb)}}},
            {"steering",
             {{"config", steering_config_to_json(steer_cfg)},
              {"gate_open", gate(opt.layer, opt.t, steer_cfg)},
              {"sampled_tokens", sample.size()},
              {"affinity_before", affinity_json(state)},
              {"affinity_after", affinity_json(steered)},
              {"assigned_mass_before", mean_assigned_mass(state, sample, sets)},
              {"assigned_mass_after", mean_assigned_mass(steered, sample, sets)}}}};
        run.write_json_output("summary.json", summary);
    };
    return cmd;
}

}  // namespace anchorpano::cli
