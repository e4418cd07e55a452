#include "anchorpano/attention_steering.hpp"
#include "anchorpano/hole_assignment.hpp"
#include "anchorpano/losses_metrics.hpp"
#include "anchorpano/pano_selection.hpp"
#include "anchorpano/plane_classifier.hpp"
#include "anchorpano/scene_ops.hpp"
#include "anchorpano/serialize.hpp"
#include "anchorpano/synthetic_scenes.hpp"

#include "cli_common.hpp"

#include <algorithm>
#include <cstdlib>

namespace anchorpano::cli {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

std::size_t rows_changed(const std::vector<float>& a, const std::vector<float>& b, int dim) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); i += static_cast<std::size_t>(dim))
        if (!std::equal(a.begin() + static_cast<std::ptrdiff_t>(i), a.begin() + static_cast<std::ptrdiff_t>(i) + dim,
                        b.begin() + static_cast<std::ptrdiff_t>(i)))
            ++n;
    return n;
}

}  // namespace

CommandPtr make_synth(CLI::App& root) {
    struct Opts {
        std::uint64_t seed = 0;
        std::string shape = "auto";
        int erp_height = 1024;
        int face_res = 128;
        int holes = 4;
        double hole_size = 0.25;
        int point_stride = 4;
        bool table = false;
    };
    auto o = std::make_shared<Opts>();
    auto cmd = make_command(root, "synth", "Generate a synthetic room with panoramic renders");
    auto& p = *cmd->params;
    p.add("seed", o->seed, "Root seed");
    p.add("shape", o->shape, "Room shape: auto, box or l");
    p.add("erp-height", o->erp_height, "Panorama height (width is twice this)");
    p.add("face-res", o->face_res, "Cubemap face resolution");
    p.add("holes", o->holes, "Number of rectangular holes");
    p.add("hole-size", o->hole_size, "Largest hole side as a fraction of the panorama extent");
    p.add("point-stride", o->point_stride, "Pixel stride of the exported point cloud");
    p.flag("table", o->table, "Add a table top (non-layout plane)");

    cmd->run = [o](RunRecord& run) {
        require(o->shape == "auto" || o->shape == "box" || o->shape == "l", "shape must be auto, box or l");
        require(o->erp_height > 0 && o->face_res > 0, "render sizes must be positive");
        require(o->holes >= 0, "hole count must be non-negative");
        require(o->hole_size > 0.0 && o->hole_size <= 1.0, "hole size must lie in (0, 1]");
        require(o->point_stride >= 1, "point stride must be at least 1");

        std::optional<RoomShape> shape;
        if (o->shape == "box") shape = RoomShape::box;
        if (o->shape == "l") shape = RoomShape::l_shape;
        SyntheticRoom room = make_seeded_room(o->seed, shape);
        if (o->table) {
            const Vec3 lo = -0.5 * room.dims;
            add_tabletop(room, lo.x() + 0.2, lo.x() + 1.0, lo.z() + 0.2, lo.z() + 1.0, lo.y() + 0.75);
        }
        const CameraPose pose = seeded_interior_pose(room, o->seed);
        const HoleSpec holes = HoleSpec::random_patches(o->holes, o->hole_size, derive_seed(o->seed, "holes"));

        const ErpRender erp = render_erp(room, pose, o->erp_height, 2 * o->erp_height, holes);
        const CubemapRender cube = render_cubemap(room, pose, o->face_res);

        run.write_json_output("room.json", {{"shape", room.shape == RoomShape::box ? "box" : "l"},
                                            {"dims", vec3_to_json(room.dims)},
                                            {"cut", {room.cut_w, room.cut_d}},
                                            {"diagonal", room.diagonal()}});
        run.write_json_output("planes.json", planes_to_json(room.planes));
        run.write_json_output("pose.json", pose_to_json(pose));
        run.write_png_output("erp.png", erp.image);
        write_grid_f32(run.path("depth.f32"), erp.depth);
        run.tensor_output("depth.f32");
        write_plane_map(run.path("plane_ids.i32"), erp.plane_ids);
        run.tensor_output("plane_ids.i32");
        write_mask(run.path("holes.u8"), erp.holes);
        run.tensor_output("holes.u8");
        for (CubeFace f : kAllFaces)
            run.write_png_output(std::string("faces/") + face_name(f) + ".png", cube.faces.face(f));
        write_point_cloud(run.path("points.f32"), backproject(erp.depth, pose, &erp.holes, o->point_stride));
        run.tensor_output("points.f32");
    };
    return cmd;
}

CommandPtr make_planes_fit(CLI::App& root) {
    struct Opts {
        std::string points;
        int max_planes = 12;
        std::size_t min_inliers = 200;
        int iterations = 1000;
        double threshold = 0.01;
        double merge_angle = 5.0;
        double merge_offset = 0.05;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto cmd = make_command(root, "planes-fit", "Extract planes from a point cloud with RANSAC");
    auto& p = *cmd->params;
    p.add("points", o->points, "Point cloud tensor (f32, N x 3)");
    p.add("max-planes", o->max_planes, "Upper bound on extracted planes");
    p.add("min-inliers", o->min_inliers, "Stop once the best plane has fewer inliers");
    p.add("ransac-iterations", o->iterations, "Hypotheses per plane");
    p.add("inlier-threshold", o->threshold, "Point-to-plane inlier distance");
    p.add("merge-angle", o->merge_angle, "Normal tolerance for merging, degrees");
    p.add("merge-offset", o->merge_offset, "Offset tolerance for merging");
    p.add("seed", o->seed, "Root seed");

    cmd->run = [o](RunRecord& run) {
        require(!o->points.empty(), "--points is required");
        run.input(o->points);
        const PointCloud cloud = read_point_cloud(o->points);
        ExtractOptions eo;
        eo.max_planes = o->max_planes;
        eo.min_inliers = o->min_inliers;
        eo.ransac = {o->iterations, o->threshold, derive_seed(o->seed, "ransac")};
        eo.merge = {o->merge_angle, o->merge_offset};
        const ExtractedPlanes ex = extract_planes(cloud, eo);

        json support = json::array();
        for (std::size_t k = 0; k < ex.planes.size(); ++k)
            support.push_back({{"id", ex.planes[k].id}, {"support", ex.support[k]}});
        run.write_json_output("planes.json", planes_to_json(ex.planes));
        run.write_json_output("report.json", {{"points", cloud.points.size()}, {"planes", support}});
    };
    return cmd;
}

CommandPtr make_classify(CLI::App& root) {
    struct Opts {
        std::string planes;
        std::string backend = "heuristic";
        std::string points;
        std::vector<std::string> poses;
        double tolerance = 0.02;
        double min_wall_extent = 1.0;
        std::vector<std::string> images;
        std::vector<std::string> plane_maps;
        std::string fixture;
        std::string endpoint;
        std::string model;
        int timeout = 60;
        bool save_highlights = false;
    };
    auto o = std::make_shared<Opts>();
    auto cmd = make_command(root, "classify", "Label planes as layout or non-layout");
    auto& p = *cmd->params;
    p.add("planes", o->planes, "Plane set JSON");
    p.add("backend", o->backend, "heuristic, fixture or http");
    p.add("points", o->points, "Point cloud for plane extents (heuristic)");
    p.add("pose", o->poses, "Camera pose JSON, repeatable (heuristic)");
    p.add("tolerance", o->tolerance, "Point-to-plane distance for plane support (heuristic)");
    p.add("min-wall-extent", o->min_wall_extent, "Smallest in-plane extent of a wall (heuristic)");
    p.add("image", o->images, "View image PNG, repeatable (fixture, http)");
    p.add("plane-map", o->plane_maps, "Per-pixel plane ids for each image, repeatable (fixture, http)");
    p.add("fixture", o->fixture, "Recorded transcripts {request_hash: response}");
    p.add("endpoint", o->endpoint, "Chat-completions endpoint base URL");
    p.add("model", o->model, "Model name sent to the endpoint");
    p.add("timeout", o->timeout, "Request timeout in seconds");
    p.flag("save-highlights", o->save_highlights, "Write the highlighted views that were queried");

    cmd->run = [o](RunRecord& run) {
        require(!o->planes.empty(), "--planes is required");
        require(o->backend == "heuristic" || o->backend == "fixture" || o->backend == "http",
                "backend must be heuristic, fixture or http");
        run.input(o->planes);
        std::vector<Plane> planes = read_planes(o->planes);
        json verdicts = json::array();

        if (o->backend == "heuristic") {
            require(!o->points.empty(), "heuristic backend needs --points");
            require(!o->poses.empty(), "heuristic backend needs at least one --pose");
            run.input(o->points);
            const PointCloud cloud = read_point_cloud(o->points);
            std::vector<double> heights;
            for (const auto& path : o->poses) {
                run.input(path);
                heights.push_back(pose_from_json(read_json(path)).center.y());
            }
            HeuristicOptions ho;
            ho.min_wall_extent = o->min_wall_extent;
            label_planes_heuristically(planes, cloud.points, heights, Vec3::UnitY(), o->tolerance, ho);
            for (const auto& pl : planes)
                verdicts.push_back({{"plane_id", pl.id},
                                    {"label", to_string(pl.label)},
                                    {"semantic", pl.semantic ? json(*pl.semantic) : json(nullptr)}});
        } else {
            require(!o->images.empty() && o->images.size() == o->plane_maps.size(),
                    "give one --plane-map per --image");
            std::unique_ptr<VlmClient> client;
            if (o->backend == "fixture") {
                require(!o->fixture.empty(), "fixture backend needs --fixture");
                run.input(o->fixture);
                client = std::make_unique<FixtureVlmClient>(FixtureVlmClient::from_json(read_json(o->fixture)));
            } else {
                require(!o->endpoint.empty(), "http backend needs --endpoint");
                require(o->timeout > 0, "timeout must be positive");
                const char* token = std::getenv("ANCHORPANO_VLM_TOKEN");
                client = std::make_unique<HttpVlmClient>(
                    HttpVlmConfig{o->endpoint, o->model, token ? token : "", o->timeout});
            }
            std::vector<Image> images;
            std::vector<PlaneIdMap> maps;
            for (std::size_t v = 0; v < o->images.size(); ++v) {
                run.input(o->images[v]);
                run.input(o->plane_maps[v]);
                images.push_back(read_png(o->images[v]));
                maps.push_back(read_plane_map(o->plane_maps[v]));
                if (!maps.back().same_shape(images.back().height, images.back().width))
                    throw DataError("plane map " + o->plane_maps[v] + " does not match its image");
            }
            for (auto& pl : planes) {
                std::vector<PlaneView> views;
                json view_info = json::array();
                for (std::size_t v = 0; v < images.size(); ++v) {
                    const Mask mask = plane_mask(maps[v], pl.id);
                    PlaneView view;
                    view.bbox = mask_bbox(mask);
                    json info = {{"view", v}, {"bbox_width", view.bbox.width()}, {"bbox_height", view.bbox.height()}};
                    if (view.bbox.large_enough()) {
                        const Highlight h = render_highlight(images[v], mask, pl.id);
                        view.image_png = encode_png(h.image);
                        info["request_hash"] = request_hash({pl.id, view.image_png, build_prompt(pl.id)});
                        if (o->save_highlights) {
                            const std::string rel =
                                "highlights/plane" + std::to_string(pl.id) + "_view" + std::to_string(v) + ".png";
                            write_file(run.path(rel), view.image_png);
                            run.output(rel);
                        }
                    }
                    views.push_back(std::move(view));
                    view_info.push_back(std::move(info));
                }
                const ClassificationVerdict verdict = classify_plane(pl.id, views, *client);
                pl.label = verdict.label;
                if (verdict.semantic) pl.semantic = to_string(*verdict.semantic);
                else pl.semantic.reset();
                for (std::size_t v = 0; v < views.size(); ++v) {
                    view_info[v]["skipped"] = static_cast<bool>(verdict.skipped[v]);
                    view_info[v]["keyword"] =
                        verdict.keywords[v] ? json(to_string(*verdict.keywords[v])) : json(nullptr);
                }
                verdicts.push_back({{"plane_id", pl.id},
                                    {"label", to_string(pl.label)},
                                    {"semantic", pl.semantic ? json(*pl.semantic) : json(nullptr)},
                                    {"queries", verdict.queries_issued},
                                    {"views", view_info}});
            }
        }
        run.write_json_output("planes.json", planes_to_json(planes));
        run.write_json_output("verdicts.json", verdicts);
    };
    return cmd;
}

CommandPtr make_assign(CLI::App& root) {
    struct Opts {
        std::string planes, plane_map, holes, pose, depth;
        double sigma_l = 0.0;
        int grid_rows = 64, grid_cols = 128, patch = 16;
        int band_width = 3;
        double sigma_d = 4.0;
        double w_geo = 0.5, w_bnd = 0.5;
        double confidence_floor = 0.05;
    };
    auto o = std::make_shared<Opts>();
    auto cmd = make_command(root, "assign", "Assign hole tokens to layout planes");
    auto& p = *cmd->params;
    p.add("planes", o->planes, "Plane set JSON");
    p.add("plane-map", o->plane_map, "Panorama plane-id tensor (i32)");
    p.add("holes", o->holes, "Panorama hole mask tensor (u8)");
    p.add("pose", o->pose, "Camera pose JSON");
    p.add("depth", o->depth, "Panorama depth tensor, used to estimate sigma-l when it is not given");
    p.add("sigma-l", o->sigma_l, "Distance scale of the geometric confidence; 0 means room diagonal / 4");
    p.add("grid-rows", o->grid_rows, "Token grid rows");
    p.add("grid-cols", o->grid_cols, "Token grid columns");
    p.add("patch", o->patch, "Pixels per token side");
    p.add("band-width", o->band_width, "Boundary band in tokens");
    p.add("sigma-d", o->sigma_d, "Distance scale of the boundary confidence");
    p.add("w-geo", o->w_geo, "Weight of the geometric confidence");
    p.add("w-bnd", o->w_bnd, "Weight of the boundary confidence");
    p.add("confidence-floor", o->confidence_floor, "Hole tokens below this confidence are left unsteered");

    cmd->run = [o](RunRecord& run) {
        require(!o->planes.empty() && !o->plane_map.empty() && !o->holes.empty() && !o->pose.empty(),
                "--planes, --plane-map, --holes and --pose are required");
        require(o->grid_rows > 0 && o->grid_cols > 0 && o->patch > 0, "grid sizes must be positive");
        require(o->band_width >= 0, "band width must be non-negative");
        require(o->sigma_d > 0.0, "sigma-d must be positive");
        require(o->sigma_l >= 0.0, "sigma-l must be non-negative");
        for (const auto* path : {&o->planes, &o->plane_map, &o->holes, &o->pose}) run.input(*path);

        const std::vector<Plane> planes = read_planes(o->planes);
        const PlaneIdMap map = read_plane_map(o->plane_map);
        const Mask holes = read_mask(o->holes);
        const CameraPose pose = pose_from_json(read_json(o->pose));

        double sigma_l = o->sigma_l;
        if (sigma_l == 0.0) {
            require(!o->depth.empty(), "give --sigma-l or --depth");
            run.input(o->depth);
            const DepthMap depth = read_grid_f32(o->depth);
            if (!depth.same_shape(holes)) throw DataError("depth and hole mask shapes differ");
            sigma_l = bounding_diagonal(backproject(depth, pose, &holes, 4).points) / 4.0;
        }

        const LatentTokenGrid grid = downsample_plane_map(map, holes, o->grid_rows, o->grid_cols, o->patch);
        grid.validate(planes);
        const auto geo = assign_geometric(grid, pose, planes, sigma_l);
        const auto bnd = assign_boundary(grid, planes, {o->band_width, o->sigma_d, 1e-6});
        const auto fused = fuse_assignments(geo, bnd, o->w_geo, o->w_bnd);
        const PlaneTokenSets sets = build_token_sets(grid, fused, planes, o->confidence_floor);

        const Grid<double> conf = confidence_map(fused, grid);
        std::size_t assigned = 0;
        for (const auto& a : fused) assigned += a.plane_id ? 1 : 0;

        run.write_json_output("assignments.json", assignments_to_json(fused, grid));
        write_plane_map(run.path("assignment_map.i32"), assignment_map(fused, grid));
        run.tensor_output("assignment_map.i32");
        write_grid_f32(run.path("confidence.f32"), conf);
        run.tensor_output("confidence.f32");
        write_png_gray(run.path("confidence.png"), conf, 0.0, 1.0);
        run.output("confidence.png");
        run.write_json_output("token_sets.json", token_sets_to_json(sets));
        run.write_json_output("report.json", {{"sigma_l", sigma_l},
                                              {"hole_tokens", fused.size()},
                                              {"assigned", assigned},
                                              {"unassigned", fused.size() - assigned}});
    };
    return cmd;
}

CommandPtr make_steer(CLI::App& root) {
    struct Opts {
        std::string q, k, token_sets;
        int layer = 10;
        double t = 1.0;
        int prefix_tokens = 0;
        double lambda = 0.4;
        double tau = 0.5;
        std::string mode = "both";
        std::vector<int> layers;
    };
    auto o = std::make_shared<Opts>();
    const auto defaults = default_steered_layers();
    o->layers.assign(defaults.begin(), defaults.end());
    auto cmd = make_command(root, "steer", "Apply plane-anchored Q/K steering to one layer");
    auto& p = *cmd->params;
    p.add("q", o->q, "Query tensor [heads, tokens, dim] (f32)");
    p.add("k", o->k, "Key tensor [heads, tokens, dim] (f32)");
    p.add("token-sets", o->token_sets, "Plane token sets JSON (from assign)");
    p.add("layer", o->layer, "Layer index of the tensors");
    p.add("t", o->t, "Flow timestep in [0, 1]");
    p.add("prefix-tokens", o->prefix_tokens, "Leading non-image tokens");
    p.add("lambda", o->lambda, "Steering strength");
    p.add("tau", o->tau, "Steering is active while t > tau");
    p.add("mode", o->mode, "both, q_only or k_only");
    p.add("layers", o->layers, "Layers where steering may act");

    cmd->run = [o](RunRecord& run) {
        require(!o->q.empty() && !o->k.empty() && !o->token_sets.empty(), "--q, --k and --token-sets are required");
        require(o->t >= 0.0 && o->t <= 1.0, "t must lie in [0, 1]");
        run.input(o->q);
        run.input(o->k);
        run.input(o->token_sets);
        SteeringConfig cfg;
        cfg.lambda = o->lambda;
        cfg.tau = o->tau;
        cfg.mode = steering_mode_from_string(o->mode);
        cfg.layers = std::set<int>(o->layers.begin(), o->layers.end());
        cfg.validate();

        const AttentionState state = read_attention_state(o->q, o->k, o->layer, o->prefix_tokens);
        const PlaneTokenSets sets = token_sets_from_json(read_json(o->token_sets));
        const AttentionState out = apply_steering(state, cfg, sets, o->t);

        write_attention_state(run.path("q.f32"), run.path("k.f32"), out);
        run.tensor_output("q.f32");
        run.tensor_output("k.f32");
        run.write_json_output("report.json", {{"gate_open", gate(o->layer, o->t, cfg)},
                                              {"config", steering_config_to_json(cfg)},
                                              {"q_rows_changed", rows_changed(state.q, out.q, state.dim)},
                                              {"k_rows_changed", rows_changed(state.k, out.k, state.dim)}});
    };
    return cmd;
}

CommandPtr make_select(CLI::App& root) {
    struct Opts {
        std::string candidates;
        double h_star = 0.4;
        double sigma_h = 0.2;
    };
    auto o = std::make_shared<Opts>();
    auto cmd = make_command(root, "select", "Rank candidate panoramas");
    auto& p = *cmd->params;
    p.add("candidates", o->candidates, "JSON array of {index, hole_ratio, new_voxels, layout_planes}");
    p.add("h-star", o->h_star, "Preferred hole ratio");
    p.add("sigma-h", o->sigma_h, "Width of the hole-ratio preference");

    cmd->run = [o](RunRecord& run) {
        require(!o->candidates.empty(), "--candidates is required");
        require(o->sigma_h > 0.0, "sigma-h must be positive");
        run.input(o->candidates);
        const json in = read_json(o->candidates);
        if (!in.is_array()) throw DataError("candidates must be a JSON array");
        ScoreParams params;
        params.h_star = o->h_star;
        params.sigma_h = o->sigma_h;
        std::vector<PanoCandidate> cands;
        for (const auto& e : in) {
            PanoCandidate c;
            c.index = e.at("index").get<int>();
            c.hole_ratio = e.at("hole_ratio").get<double>();
            const auto v = e.at("new_voxels").get<std::int64_t>();
            if (v < 0) throw DataError("new_voxels must be non-negative");
            c.new_voxels = static_cast<std::size_t>(v);
            c.layout_planes = e.at("layout_planes").get<int>();
            if (e.contains("pose")) c.pose = pose_from_json(e.at("pose"));
            score_candidate(c, params);
            cands.push_back(c);
        }
        json ranking = json::array();
        int rank = 0;
        for (const auto& c : rank_candidates(cands)) {
            json j = candidate_to_json(c);
            j["rank"] = rank++;
            ranking.push_back(std::move(j));
        }
        run.write_json_output("ranking.json", ranking);
    };
    return cmd;
}

CommandPtr make_metrics(CLI::App& root) {
    struct Opts {
        std::string pred, ref;
    };
    auto o = std::make_shared<Opts>();
    auto cmd = make_command(root, "metrics", "PSNR and SSIM between two directories of PNG images");
    auto& p = *cmd->params;
    p.add("pred", o->pred, "Directory of predicted images");
    p.add("ref", o->ref, "Directory of reference images (matched by file name)");

    cmd->run = [o](RunRecord& run) {
        require(!o->pred.empty() && !o->ref.empty(), "--pred and --ref are required");
        if (!fs::is_directory(o->pred) || !fs::is_directory(o->ref)) throw DataError("--pred and --ref must be directories");
        std::vector<fs::path> refs;
        for (const auto& e : fs::directory_iterator(o->ref))
            if (e.is_regular_file() && e.path().extension() == ".png") refs.push_back(e.path());
        std::sort(refs.begin(), refs.end());
        if (refs.empty()) throw DataError("no PNG images in " + o->ref);

        json images = json::array();
        double psnr_sum = 0.0, ssim_sum = 0.0;
        for (const auto& ref_path : refs) {
            const fs::path pred_path = fs::path(o->pred) / ref_path.filename();
            if (!fs::exists(pred_path)) throw DataError("missing prediction for " + ref_path.filename().string());
            run.input(ref_path);
            run.input(pred_path);
            const Image a = rgb_only(read_png(pred_path)), b = rgb_only(read_png(ref_path));
            if (!a.same_shape(b)) throw DataError("image sizes differ for " + ref_path.filename().string());
            const double ps = psnr(a, b), ss = ssim(a, b);
            psnr_sum += ps;
            ssim_sum += ss;
            images.push_back({{"name", ref_path.filename().string()}, {"psnr", ps}, {"ssim", ss}});
        }
        const double n = static_cast<double>(refs.size());
        run.write_json_output("metrics.json",
                              {{"images", images}, {"mean_psnr", psnr_sum / n}, {"mean_ssim", ssim_sum / n}});
    };
    return cmd;
}

CommandPtr make_diagnose_layers(CLI::App& root) {
    struct Opts {
        std::vector<std::string> q, k;
        std::vector<int> layers;
        std::string token_sets;
        int prefix_tokens = 0;
        std::size_t samples = 256;
        double eps = 1e-6;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto cmd = make_command(root, "diagnose-layers", "Per-layer plane affinity ratios");
    auto& p = *cmd->params;
    p.add("q", o->q, "Query tensor per layer, repeatable");
    p.add("k", o->k, "Key tensor per layer, repeatable");
    p.add("layer", o->layers, "Layer index per tensor pair, repeatable");
    p.add("token-sets", o->token_sets, "Plane token sets JSON");
    p.add("prefix-tokens", o->prefix_tokens, "Leading non-image tokens");
    p.add("samples", o->samples, "Hole tokens sampled per layer");
    p.add("eps", o->eps, "Denominator guard");
    p.add("seed", o->seed, "Root seed");

    cmd->run = [o](RunRecord& run) {
        require(!o->q.empty() && o->q.size() == o->k.size() && o->q.size() == o->layers.size(),
                "give matching --q, --k and --layer lists");
        require(!o->token_sets.empty(), "--token-sets is required");
        require(o->samples > 0, "samples must be positive");
        run.input(o->token_sets);
        const PlaneTokenSets sets = token_sets_from_json(read_json(o->token_sets));
        const auto sample = sample_hole_tokens(sets, o->samples, derive_seed(o->seed, "sample"));

        json layers = json::array();
        json steerable = json::array();
        for (std::size_t i = 0; i < o->q.size(); ++i) {
            run.input(o->q[i]);
            run.input(o->k[i]);
            const AttentionState state = read_attention_state(o->q[i], o->k[i], o->layers[i], o->prefix_tokens);
            const auto r = affinity_ratio(state, sample, sets, o->eps,
                                          derive_seed(o->seed, static_cast<std::uint64_t>(o->layers[i])));
            const bool ok = r && *r > kSteerableAffinity;
            if (ok) steerable.push_back(o->layers[i]);
            layers.push_back({{"layer", o->layers[i]}, {"affinity", r ? json(*r) : json(nullptr)}, {"steerable", ok}});
        }
        run.write_json_output("affinity.json", {{"threshold", kSteerableAffinity},
                                                {"sampled_tokens", sample.size()},
                                                {"layers", layers},
                                                {"steerable_layers", steerable}});
    };
    return cmd;
}

}  // namespace anchorpano::cli
