#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "centerfpa/blocks.hpp"
#include "centerfpa/codec.hpp"
#include "centerfpa/config.hpp"
#include "centerfpa/eval.hpp"
#include "centerfpa/io.hpp"
#include "centerfpa/pipeline.hpp"
#include "centerfpa/synth.hpp"

namespace cfpa::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigFlags {
    std::string config_path;
    std::string classes_path;
    int R = 0, K = 0, tile = 0, stride = 0;
    double nms_iou = 0, match_iou = 0, score_floor = 0;
    double phi = 0, alpha = 0, beta = 0, lambda1 = 0, lambda2 = 0;
    std::vector<double> scales;
    std::vector<CLI::Option*> options;

    bool given(const std::string& name) const
    {
        return std::any_of(options.begin(), options.end(),
                           [&](const CLI::Option* o) { return o->check_lname(name) && o->count() > 0; });
    }
};

void add_config_flags(CLI::App& app, ConfigFlags& f)
{
    app.add_option("--config", f.config_path,
                   std::string("JSON config file (default: $") + kConfigEnvVar + ")");
    app.add_option("--classes", f.classes_path, "class-list file, one name per line");
    f.options = {
        app.add_option("--R", f.R, "head output stride"),
        app.add_option("--k", f.K, "decoder top-K"),
        app.add_option("--tile", f.tile, "tile size"),
        app.add_option("--stride", f.stride, "tile stride"),
        app.add_option("--nms-iou", f.nms_iou, "NMS IoU threshold"),
        app.add_option("--match-iou", f.match_iou, "evaluation IoU threshold"),
        app.add_option("--score-floor", f.score_floor, "minimum peak score kept"),
        app.add_option("--phi", f.phi, "positive-sample threshold"),
        app.add_option("--alpha", f.alpha, "focal exponent"),
        app.add_option("--beta", f.beta, "negative penalty exponent"),
        app.add_option("--lambda1", f.lambda1, "size loss weight"),
        app.add_option("--lambda2", f.lambda2, "offset loss weight"),
        app.add_option("--scales", f.scales, "test scales")->delimiter(','),
    };
}

ModelConfig resolve_config(const ConfigFlags& f)
{
    ModelConfig cfg;
    std::string path = f.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
    }
    if (!path.empty()) cfg = load_config(path);
    if (f.given("R")) cfg.R = f.R;
    if (f.given("k")) cfg.K = f.K;
    if (f.given("tile")) cfg.tile = f.tile;
    if (f.given("stride")) cfg.stride = f.stride;
    if (f.given("nms-iou")) cfg.nms_iou = f.nms_iou;
    if (f.given("match-iou")) cfg.match_iou = f.match_iou;
    if (f.given("score-floor")) cfg.score_floor = f.score_floor;
    if (f.given("phi")) cfg.loss.phi = f.phi;
    if (f.given("alpha")) cfg.loss.alpha = f.alpha;
    if (f.given("beta")) cfg.loss.beta = f.beta;
    if (f.given("lambda1")) cfg.loss.lambda1 = f.lambda1;
    if (f.given("lambda2")) cfg.loss.lambda2 = f.lambda2;
    if (f.given("scales")) cfg.scales = f.scales;
    if (!f.classes_path.empty()) cfg.classes = read_class_list(f.classes_path);
    cfg.validate();
    return cfg;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ModelParams load_model(const std::string& path, const ModelConfig& cfg)
{
    const TensorFile file = load_tensor_file(path);
    if (!file.manifest.empty()) {
        const ModelConfig saved = config_from_json(file.manifest);
        if (saved.num_classes() != cfg.num_classes()) {
            throw std::invalid_argument("weights " + path + " were saved for " +
                                        std::to_string(saved.num_classes()) + " classes but the config has " +
                                        std::to_string(cfg.num_classes()));
        }
    }
    return model_from_tensor_file(file, cfg);
}

// --- subcommands ---

struct EncodeArgs {
    std::string annotations, image, out;
    int width = 0, height = 0;
};

int cmd_encode(const EncodeArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    int w = a.width, h = a.height;
    if (!a.image.empty()) {
        const Tensor img = read_ppm(a.image);
        w = img.dim(2);
        h = img.dim(1);
    }
    if (w <= 0 || h <= 0) throw std::invalid_argument("encode: give --image or both --width and --height");
    const std::vector<BBox> boxes = read_annotations(a.annotations, cfg.classes);
    const Targets t = encode_targets(boxes, w, h, cfg.num_classes(), cfg.R);
    save_tensor_file(targets_to_tensor_file(t, cfg), a.out);
    out << "encoded " << t.num_objects << " objects on a " << t.heatmap.dim(2) << "x" << t.heatmap.dim(1)
        << " grid";
    if (t.collisions) out << " (" << t.collisions << " center collisions)";
    out << "\n";
    return 0;
}

struct InferArgs {
    std::string image, weights, out, render;
    int workers = 1;
};

int cmd_infer(const InferArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    const Tensor image = read_ppm(a.image);
    const ModelParams params = fuse_model(load_model(a.weights, cfg));
    const ModelHeadSource source(params);
    const DetectionSet dets = multiscale_infer(image, source, cfg, cfg.scales, a.workers);
    save_detections(dets.boxes, cfg.classes, a.out);
    if (!a.render.empty()) write_ppm(render_boxes(image, dets.boxes), a.render);
    out << dets.boxes.size() << " detections written to " << a.out;
    if (dets.dropped) out << " (" << dets.dropped << " peaks dropped for non-positive size)";
    out << "\n";
    return 0;
}

struct TileArgs {
    std::string image, out_dir;
};

int cmd_tile(const TileArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    const Tensor image = read_ppm(a.image);
    fs::create_directories(a.out_dir);
    const auto frames = split_tiles(image.dim(2), image.dim(1), cfg.tile, cfg.stride);
    std::ostringstream manifest;
    for (const TileFrame& f : frames) {
        const std::string name = "tile_" + std::to_string(f.origin_x) + "_" + std::to_string(f.origin_y) + ".ppm";
        write_ppm(crop_tile(image, f), (fs::path(a.out_dir) / name).string());
        manifest << f.origin_x << ' ' << f.origin_y << ' ' << f.width << ' ' << f.height << ' ' << name << '\n';
    }
    write_text((fs::path(a.out_dir) / "tiles.txt").string(), manifest.str());
    out << frames.size() << " tiles written to " << a.out_dir << "\n";
    return 0;
}

struct MergeArgs {
    std::string manifest, out;
};

// Manifest lines: "origin_x origin_y detections_path", paths relative to the manifest.
int cmd_merge(const MergeArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    std::istringstream in(read_text(a.manifest));
    const fs::path base = fs::path(a.manifest).parent_path();
    DetectionSet merged;
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        std::istringstream ls(line);
        TileFrame f{0, 0, cfg.tile, cfg.tile};
        std::string path;
        if (!(ls >> f.origin_x)) continue; // blank line
        if (!(ls >> f.origin_y >> path)) {
            throw std::invalid_argument(a.manifest + " line " + std::to_string(line_no) +
                                        ": expected 'origin_x origin_y detections_path'");
        }
        const fs::path p = fs::path(path).is_absolute() ? fs::path(path) : base / path;
        DetectionSet local{read_detections(p.string(), cfg.classes), CoordFrame::kTileLocal, 0};
        const DetectionSet global = tile_to_global(local, f);
        merged.boxes.insert(merged.boxes.end(), global.boxes.begin(), global.boxes.end());
    }
    const DetectionSet result = nms(merged, cfg.nms_iou);
    save_detections(result.boxes, cfg.classes, a.out);
    out << merged.boxes.size() << " tile detections merged into " << result.boxes.size() << "\n";
    return 0;
}

struct EvalArgs {
    std::string detections, annotations, json;
};

int cmd_eval(const EvalArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    const auto dets = read_detections(a.detections, cfg.classes);
    const auto gts = read_annotations(a.annotations, cfg.classes);
    const EvalReport report = evaluate(dets, gts, cfg.num_classes(), cfg.match_iou);
    out << format_report_table(report, cfg.classes);
    if (!a.json.empty()) write_text(a.json, report_to_json(report, cfg.classes));
    return 0;
}

struct DemoArgs {
    std::uint64_t seed = 7;
    int objects = 40;
    int width = 1848, height = 1848;
    int min_size = 8, max_size = 160;
    int workers = 1;
    std::string out_dir = "demo_out";
};

int cmd_demo(const DemoArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    fs::create_directories(a.out_dir);
    auto path = [&](const char* name) { return (fs::path(a.out_dir) / name).string(); };

    RandomSceneOptions opts;
    opts.width = a.width;
    opts.height = a.height;
    opts.num_classes = cfg.num_classes();
    opts.num_objects = a.objects;
    opts.min_size = a.min_size;
    opts.max_size = a.max_size;
    // Keep centers R cells apart at the smallest test scale.
    const double min_scale = *std::min_element(cfg.scales.begin(), cfg.scales.end());
    opts.min_center_separation = std::max(2.0 * cfg.R, 1.5 * cfg.R / std::min(1.0, min_scale));
    opts.max_same_class_iou = std::min(opts.max_same_class_iou, cfg.nms_iou);
    opts.seed = a.seed;
    const SceneSpec spec = random_scene_spec(opts);
    const Scene scene = generate_scene(spec);

    const OracleHeadSource source(scene.gts, cfg.num_classes(), cfg.R);
    const DetectionSet dets = multiscale_infer(scene.image, source, cfg, cfg.scales, a.workers);
    const EvalReport report = evaluate(dets.boxes, scene.gts, cfg.num_classes(), cfg.match_iou);

    write_text(path("config.json"), config_to_json(cfg));
    write_text(path("scene.json"), scene_spec_to_json(spec));
    write_ppm(scene.image, path("scene.ppm"));
    {
        std::ofstream gt(path("gt.txt"));
        write_annotations(scene.gts, cfg.classes, gt);
    }
    save_detections(dets.boxes, cfg.classes, path("detections.txt"));
    write_ppm(render_boxes(scene.image, dets.boxes), path("detections.ppm"));
    const std::string table = format_report_table(report, cfg.classes);
    write_text(path("report.txt"), table);
    write_text(path("report.json"), report_to_json(report, cfg.classes));

    out << "scene " << spec.width << "x" << spec.height << ", " << scene.gts.size() << " objects, "
        << dets.boxes.size() << " detections\n"
        << table;
    return 0;
}

struct InitArgs {
    std::uint64_t seed = 0;
    std::string out;
    bool fused = false;
};

int cmd_init_weights(const InitArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    ModelParams p = init_model(cfg, a.seed);
    if (a.fused) p = fuse_model(p);
    save_tensor_file(model_to_tensor_file(p, cfg), a.out);
    out << "initialized " << (a.fused ? "fused" : "training-form") << " weights in " << a.out << "\n";
    return 0;
}

struct FuseArgs {
    std::string in, out;
};

int cmd_fuse_weights(const FuseArgs& a, const ModelConfig& cfg, std::ostream& out)
{
    const ModelParams fused = fuse_model(load_model(a.in, cfg));
    save_tensor_file(model_to_tensor_file(fused, cfg), a.out);
    out << "fused weights written to " << a.out << "\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"CenterFPA anchor-free detector toolkit", "centerfpa"};
    app.require_subcommand(1);
    app.fallthrough();
    ConfigFlags flags;
    add_config_flags(app, flags);

    EncodeArgs encode;
    auto* sc_encode = app.add_subcommand("encode", "encode annotations into training targets");
    sc_encode->add_option("--annotations", encode.annotations, "x1 y1 x2 y2 label file")->required();
    sc_encode->add_option("--image", encode.image, "PPM image supplying the extents");
    sc_encode->add_option("--width", encode.width, "image width");
    sc_encode->add_option("--height", encode.height, "image height");
    sc_encode->add_option("--out", encode.out, "output tensor file")->required();

    InferArgs infer;
    auto* sc_infer = app.add_subcommand("infer", "detect objects in a PPM image");
    sc_infer->add_option("--image", infer.image)->required();
    sc_infer->add_option("--weights", infer.weights)->required();
    sc_infer->add_option("--out", infer.out, "detection file")->required();
    sc_infer->add_option("--render", infer.render, "write a PPM copy with boxes drawn");
    sc_infer->add_option("--workers", infer.workers, "tile worker threads")->check(CLI::PositiveNumber);

    TileArgs tile;
    auto* sc_tile = app.add_subcommand("tile", "split a PPM image into overlapping tiles");
    sc_tile->add_option("--image", tile.image)->required();
    sc_tile->add_option("--out-dir", tile.out_dir)->required();

    MergeArgs merge;
    auto* sc_merge = app.add_subcommand("merge", "merge tile-local detection files with NMS");
    sc_merge->add_option("--manifest", merge.manifest, "lines of 'origin_x origin_y detections_path'")->required();
    sc_merge->add_option("--out", merge.out)->required();

    EvalArgs ev;
    auto* sc_eval = app.add_subcommand("eval", "11-point mAP of detections against annotations");
    sc_eval->add_option("--detections", ev.detections)->required();
    sc_eval->add_option("--annotations", ev.annotations)->required();
    sc_eval->add_option("--json", ev.json, "also write the report as JSON");

    DemoArgs demo;
    auto* sc_demo = app.add_subcommand("demo", "synthetic scene -> oracle heads -> tile/merge -> evaluate");
    sc_demo->add_option("--seed", demo.seed);
    sc_demo->add_option("--objects", demo.objects)->check(CLI::NonNegativeNumber);
    sc_demo->add_option("--width", demo.width);
    sc_demo->add_option("--height", demo.height);
    sc_demo->add_option("--min-size", demo.min_size);
    sc_demo->add_option("--max-size", demo.max_size);
    sc_demo->add_option("--workers", demo.workers)->check(CLI::PositiveNumber);
    sc_demo->add_option("--out-dir", demo.out_dir);

    InitArgs init;
    auto* sc_init = app.add_subcommand("init-weights", "write seeded initial weights");
    sc_init->add_option("--seed", init.seed);
    sc_init->add_option("--out", init.out)->required();
    sc_init->add_flag("--fused", init.fused, "store ACBlocks already fused");

    FuseArgs fuse;
    auto* sc_fuse = app.add_subcommand("fuse-weights", "fold ACBlock branches into single 3x3 kernels");
    sc_fuse->add_option("--in", fuse.in)->required();
    sc_fuse->add_option("--out", fuse.out)->required();

    std::string config_out;
    auto* sc_config = app.add_subcommand("config", "print the effective config as JSON");
    sc_config->add_option("--out", config_out, "write to a file instead of stdout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        const ModelConfig cfg = resolve_config(flags);
        if (sc_encode->parsed()) return cmd_encode(encode, cfg, out);
        if (sc_infer->parsed()) return cmd_infer(infer, cfg, out);
        if (sc_tile->parsed()) return cmd_tile(tile, cfg, out);
        if (sc_merge->parsed()) return cmd_merge(merge, cfg, out);
        if (sc_eval->parsed()) return cmd_eval(ev, cfg, out);
        if (sc_demo->parsed()) return cmd_demo(demo, cfg, out);
        if (sc_init->parsed()) return cmd_init_weights(init, cfg, out);
        if (sc_fuse->parsed()) return cmd_fuse_weights(fuse, cfg, out);
        if (sc_config->parsed()) {
            if (config_out.empty()) out << config_to_json(cfg);
            else save_config(cfg, config_out);
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace cfpa::cli
