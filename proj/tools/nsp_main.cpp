// Command-line front end: train a field on a point cloud, extract meshes
// from checkpoints, compare reconstructions, export plot slices, and
// generate/corrupt toy clouds. Every run writes a manifest with the resolved
// configuration so it can be reproduced exactly.

#include "nsp/extraction.hpp"
#include "nsp/field.hpp"
#include "nsp/io.hpp"
#include "nsp/metrics.hpp"
#include "nsp/oracle.hpp"
#include "nsp/sampler.hpp"
#include "nsp/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace nsp;

// Options shared by all subcommands. Configuration is resolved in layers:
// profile preset, then config file keys, then individual flags, then --set
// pairs; later layers win.
struct Common {
    std::string config_path;
    std::string profile;
    std::string out;
    uint64_t seed = 0;
    std::vector<std::string> sets;

    CLI::Option* profile_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path,
                        "config file of 'key = value' lines")
            ->check(CLI::ExistingFile);
        profile_opt = cmd->add_option("--profile", profile,
                                      "preset: full (production size) or desk "
                                      "(single-core friendly)")
                          ->check(CLI::IsMember({"full", "desk"}));
        out_opt = cmd->add_option("--out", out, "output directory");
        seed_opt = cmd->add_option("--seed", seed, "master RNG seed");
        cmd->add_option("--set", sets,
                        "extra key=value override (repeatable; the README "
                        "lists every key)");
    }

    RunConfig resolve(const std::vector<std::string>& extra_lines = {}) const {
        std::string text;
        if (!config_path.empty()) {
            std::ifstream f(config_path, std::ios::binary);
            if (!f) throw IoError(config_path + ": cannot open file");
            std::ostringstream buf;
            buf << f.rdbuf();
            text += buf.str();
            if (!text.empty() && text.back() != '\n') text += '\n';
        }
        if (profile_opt->count()) text += "profile = " + profile + "\n";
        if (out_opt->count()) text += "out_dir = " + out + "\n";
        if (seed_opt->count()) text += "seed = " + std::to_string(seed) + "\n";
        for (const std::string& line : extra_lines) text += line + "\n";
        for (const std::string& kv : sets) text += kv + "\n";
        return parse_run_config(text);
    }
};

std::string join_command(int argc, char** argv) {
    std::string cmd;
    for (int i = 0; i < argc; ++i) {
        if (i) cmd += ' ';
        std::string arg = argv[i];
        bool needs_quotes = arg.find(' ') != std::string::npos;
        if (needs_quotes) cmd += '"';
        cmd += arg;
        if (needs_quotes) cmd += '"';
    }
    return cmd;
}

AnalyticShape shape_by_name(const std::string& name) {
    if (name == "plane") return AnalyticShape::plane();
    if (name == "sphere") return AnalyticShape::sphere();
    if (name == "hemisphere") return AnalyticShape::hemisphere();
    if (name == "partial_cylinder") return AnalyticShape::partial_cylinder();
    throw IoError("unknown shape '" + name +
                  "' (expected plane, sphere, hemisphere, or partial_cylinder)");
}

bool inside_domain(const PointCloud& cloud, const Domain& domain) {
    for (Vec3 p : cloud.points)
        if (!domain.box.contains(p)) return false;
    return true;
}

void prepare_out_dir(const RunConfig& cfg, const std::string& command) {
    std::filesystem::create_directories(cfg.out_dir);
    write_manifest(cfg.out_dir + "/manifest.txt", cfg, command);
}

int parse_axis(const std::string& s) {
    if (s == "x" || s == "0") return 0;
    if (s == "y" || s == "1") return 1;
    if (s == "z" || s == "2") return 2;
    throw IoError("axis must be x, y, z (or 0, 1, 2), got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string input;
    std::string shape;
    std::string normalize;
    size_t count = 1000;
    CLI::Option* input_opt = nullptr;
    CLI::Option* shape_opt = nullptr;
    CLI::Option* normalize_opt = nullptr;
};

int cmd_train(const TrainArgs& a, const std::string& command) {
    std::vector<std::string> lines;
    if (a.input_opt->count()) lines.push_back("input = " + a.input);
    if (a.shape_opt->count()) lines.push_back("shape = " + a.shape);
    if (a.normalize_opt->count()) lines.push_back("normalize = " + a.normalize);
    RunConfig cfg = a.common.resolve(lines);

    PointCloud cloud;
    if (!cfg.input.empty()) {
        cloud = read_point_cloud(cfg.input);
        std::printf("loaded %zu points from %s\n", cloud.size(), cfg.input.c_str());
    } else if (!cfg.shape.empty()) {
        cloud = sample_shape(shape_by_name(cfg.shape), a.count, cfg.seed);
        std::printf("sampled %zu points on the %s preset\n", cloud.size(),
                    cfg.shape.c_str());
    } else {
        throw IoError("train needs --input FILE or --shape NAME");
    }

    Domain domain;
    bool fits = inside_domain(cloud, domain);
    if (cfg.normalize == "always" || (cfg.normalize == "auto" && !fits)) {
        NormalizeResult nr = normalize_cloud(cloud, domain);
        cloud = nr.cloud;
        std::printf("rescaled cloud into the unit domain: scale=%.17g "
                    "offset=(%.17g, %.17g, %.17g)\n",
                    nr.scale, nr.offset.x, nr.offset.y, nr.offset.z);
    } else if (!fits) {
        throw IoError("cloud leaves the [-1,1] training domain and "
                      "normalize=never; rescale the input first");
    }

    prepare_out_dir(cfg, command);
    TrainConfig tc = cfg.train;
    tc.out_dir = cfg.out_dir;
    if (tc.progress_every == 0)
        tc.progress_every = std::max(1, tc.epochs / 20);

    TrainResult res = train(cloud, cfg.model, tc);
    if (res.aborted) {
        std::fprintf(stderr,
                     "training aborted at epoch %d: %s\n"
                     "last good parameters kept in %s/checkpoint_final.bin\n",
                     res.abort_epoch, res.abort_reason.c_str(),
                     cfg.out_dir.c_str());
        return 1;
    }
    const TrainLogRow& last = res.log.back();
    std::printf("done: epoch %d  loss %.6g (manifold %.3g, gm %.3g, sp %.3g, "
                "ma %.3g)  eikonal %.3g\n",
                last.epoch, last.loss.total, last.loss.manifold, last.loss.gm,
                last.loss.sp, last.loss.ma, last.loss.eikonal);
    std::printf("artifacts: %s/checkpoint_final.bin, %s/train_log.csv\n",
                cfg.out_dir.c_str(), cfg.out_dir.c_str());
    return 0;
}

struct ExtractArgs {
    Common common;
    std::string checkpoint;
    std::string format = "obj";
    bool binary_ply = false;
};

int cmd_extract(const ExtractArgs& a, const std::string& command) {
    RunConfig cfg = a.common.resolve();
    Checkpoint ck = load_checkpoint(a.checkpoint);
    FieldView view = make_field_view(ck.params, cfg.train.guard_eps);

    ExtractionResult result = extract(view, cfg.extraction);
    prepare_out_dir(cfg, command);
    std::string mesh_path = cfg.out_dir + "/mesh." + a.format;
    write_mesh(result.mesh, mesh_path, a.binary_ply);

    const StageCounts& s = result.counts;
    std::printf("grid %d^3: %llu cells -> %llu after rough filter -> %llu "
                "determined; %llu quads, %llu triangles, %zu vertices\n",
                cfg.extraction.grid_n,
                static_cast<unsigned long long>(s.total_cells),
                static_cast<unsigned long long>(s.after_rough_filter),
                static_cast<unsigned long long>(s.after_determination),
                static_cast<unsigned long long>(s.quads),
                static_cast<unsigned long long>(s.triangles),
                result.mesh.vertices.size());
    std::printf("wrote %s\n", mesh_path.c_str());
    return 0;
}

struct EvalArgs {
    Common common;
    std::string a, b;
    size_t samples = 100000;
};

PointCloud load_eval_cloud(const std::string& path, size_t samples,
                           uint64_t seed) {
    std::string ext;
    size_t dot = path.find_last_of('.');
    if (dot != std::string::npos) ext = path.substr(dot + 1);
    for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
    if (ext == "obj" || ext == "ply") {
        TriangleMesh mesh = read_mesh(path);
        if (!mesh.triangles.empty())
            return sample_mesh_surface(mesh, samples, seed);
        PointCloud cloud;
        cloud.points = std::move(mesh.vertices);
        cloud.source = path;
        return cloud;
    }
    return read_point_cloud(path);
}

int cmd_eval(const EvalArgs& a, const std::string& command) {
    RunConfig cfg = a.common.resolve();
    // Both sides sample with the same seed, so identical inputs yield
    // identical clouds and exactly zero distances.
    PointCloud ca = load_eval_cloud(a.a, a.samples, cfg.seed);
    PointCloud cb = load_eval_cloud(a.b, a.samples, cfg.seed);
    MetricReport rep = compare_clouds(ca, cb);

    std::string report;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "a = %s (%zu points)\nb = %s (%zu points)\n"
                  "chamfer = %.17g\nhausdorff = %.17g\n"
                  "mean_a_to_b = %.17g\nmean_b_to_a = %.17g\n"
                  "max_a_to_b = %.17g\nmax_b_to_a = %.17g\n",
                  a.a.c_str(), rep.count_a, a.b.c_str(), rep.count_b,
                  rep.chamfer, rep.hausdorff, rep.mean_a_to_b, rep.mean_b_to_a,
                  rep.max_a_to_b, rep.max_b_to_a);
    report = buf;
    std::fputs(report.c_str(), stdout);

    prepare_out_dir(cfg, command);
    std::ofstream f(cfg.out_dir + "/metrics.txt", std::ios::binary);
    f << report;
    return 0;
}

struct SliceArgs {
    Common common;
    std::string checkpoint;
    std::string axis = "z";
    double offset = 0.0;
    int resolution = 256;
};

int cmd_slice(const SliceArgs& a, const std::string& command) {
    RunConfig cfg = a.common.resolve();
    Checkpoint ck = load_checkpoint(a.checkpoint);
    FieldView view = make_field_view(ck.params, cfg.train.guard_eps);
    prepare_out_dir(cfg, command);
    std::string path = cfg.out_dir + "/slice.csv";
    export_slice(view, parse_axis(a.axis), a.offset, a.resolution, path);
    std::printf("wrote %d x %d slice to %s\n", a.resolution, a.resolution,
                path.c_str());
    return 0;
}

struct MakeToyArgs {
    Common common;
    std::string shape;
    std::string format = "xyz";
    size_t count = 1000;
};

int cmd_make_toy(const MakeToyArgs& a, const std::string& command) {
    RunConfig cfg = a.common.resolve({"shape = " + a.shape});
    AnalyticShape shape = shape_by_name(cfg.shape);
    PointCloud cloud = sample_shape(shape, a.count, cfg.seed);
    prepare_out_dir(cfg, command);
    std::string path = cfg.out_dir + "/cloud." + a.format;
    write_point_cloud(path, cloud);
    std::printf("wrote %zu points on the %s preset to %s\n", cloud.size(),
                shape.name(), path.c_str());
    return 0;
}

struct CorruptArgs {
    Common common;
    std::string input;
    double noise = 0.0;
    double keep = 1.0;
    CLI::Option* noise_opt = nullptr;
    CLI::Option* keep_opt = nullptr;
};

int cmd_corrupt(const CorruptArgs& a, const std::string& command) {
    RunConfig cfg = a.common.resolve({"input = " + a.input});
    if (!a.noise_opt->count() && !a.keep_opt->count())
        throw IoError("corrupt needs --noise SIGMA and/or --keep FRACTION");

    PointCloud cloud = read_point_cloud(cfg.input);
    size_t original = cloud.size();
    uint64_t base = split_seed(cfg.seed, Stream::kCorruption);
    if (a.noise_opt->count() && a.noise > 0.0)
        cloud = add_gaussian_noise(cloud, a.noise, split_seed(base, 0));
    if (a.keep_opt->count() && a.keep < 1.0)
        cloud = subsample(cloud, a.keep, split_seed(base, 1));

    prepare_out_dir(cfg, command);
    std::string path = cfg.out_dir + "/cloud.xyz";
    write_point_cloud(path, cloud);
    std::printf("%zu points -> %zu (noise sigma %g, keep %g); wrote %s\n",
                original, cloud.size(), a.noise, a.keep, path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Surface reconstruction from point clouds via a learned "
        "distance-times-direction field and shortest-path mesh extraction"};
    app.require_subcommand(1);
    std::string command = join_command(argc, argv);

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand(
        "train", "fit a field to a point cloud, writing checkpoint + log");
    train_args.common.attach(train_cmd);
    train_args.input_opt =
        train_cmd->add_option("--input", train_args.input, "point cloud file "
                              "(.xyz/.obj/.ply)");
    train_args.shape_opt = train_cmd->add_option(
        "--shape", train_args.shape,
        "analytic preset instead of a file: plane, sphere, hemisphere, "
        "partial_cylinder");
    train_cmd->add_option("--count", train_args.count,
                          "points to sample when using --shape");
    train_args.normalize_opt = train_cmd->add_option(
        "--normalize", train_args.normalize,
        "auto (default: rescale only if outside the unit domain), always, never")
        ->check(CLI::IsMember({"auto", "always", "never"}));

    ExtractArgs extract_args;
    CLI::App* extract_cmd = app.add_subcommand(
        "extract", "extract a triangle mesh from a trained checkpoint");
    extract_args.common.attach(extract_cmd);
    extract_cmd->add_option("--checkpoint", extract_args.checkpoint,
                            "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    extract_cmd->add_option("--format", extract_args.format, "obj or ply")
        ->check(CLI::IsMember({"obj", "ply"}));
    extract_cmd->add_flag("--binary", extract_args.binary_ply,
                          "write binary PLY instead of ascii");

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand(
        "eval", "chamfer/hausdorff between two meshes or clouds");
    eval_args.common.attach(eval_cmd);
    eval_cmd->add_option("--a", eval_args.a, "first mesh/cloud file")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--b", eval_args.b, "second mesh/cloud file")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--samples", eval_args.samples,
                         "surface samples per mesh input");

    SliceArgs slice_args;
    CLI::App* slice_cmd = app.add_subcommand(
        "slice", "export a planar cross-section of a trained field as CSV");
    slice_args.common.attach(slice_cmd);
    slice_cmd->add_option("--checkpoint", slice_args.checkpoint, "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    slice_cmd->add_option("--axis", slice_args.axis, "slice normal: x, y, or z");
    slice_cmd->add_option("--offset", slice_args.offset,
                          "plane position along the axis, in [-1, 1]");
    slice_cmd->add_option("--resolution", slice_args.resolution,
                          "lattice points per side");

    MakeToyArgs toy_args;
    CLI::App* toy_cmd = app.add_subcommand(
        "make-toy", "sample a point cloud from an analytic shape preset");
    toy_args.common.attach(toy_cmd);
    toy_cmd->add_option("--shape", toy_args.shape,
                        "plane, sphere, hemisphere, or partial_cylinder")
        ->required();
    toy_cmd->add_option("--count", toy_args.count, "number of points");
    toy_cmd->add_option("--format", toy_args.format, "xyz or ply")
        ->check(CLI::IsMember({"xyz", "ply"}));

    CorruptArgs corrupt_args;
    CLI::App* corrupt_cmd = app.add_subcommand(
        "corrupt", "add Gaussian noise and/or subsample a point cloud");
    corrupt_args.common.attach(corrupt_cmd);
    corrupt_cmd->add_option("--input", corrupt_args.input, "point cloud file")
        ->required()
        ->check(CLI::ExistingFile);
    corrupt_args.noise_opt = corrupt_cmd->add_option(
        "--noise", corrupt_args.noise, "Gaussian noise standard deviation");
    corrupt_args.keep_opt = corrupt_cmd->add_option(
        "--keep", corrupt_args.keep, "fraction of points to keep, in (0, 1]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n\n%s", e.what(), app.help().c_str());
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args, command);
        if (extract_cmd->parsed()) return cmd_extract(extract_args, command);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, command);
        if (slice_cmd->parsed()) return cmd_slice(slice_args, command);
        if (toy_cmd->parsed()) return cmd_make_toy(toy_args, command);
        if (corrupt_cmd->parsed()) return cmd_corrupt(corrupt_args, command);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
