#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "gsedit/bridge.hpp"
#include "gsedit/random.hpp"
#include "gsedit/scene_io.hpp"

namespace gsedit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON schemas

namespace {

Vec3 vec3_of(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) fail(ErrorKind::Input, what + " must be an array of 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Input, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Input, path.string() + ": " + e.what());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) fail(ErrorKind::Input, "cannot write " + tmp.string());
        out << text;
        if (!out) fail(ErrorKind::Input, "failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

PipelineConfig parse_pipeline_config(const json& j) {
    if (!j.is_object()) fail(ErrorKind::Input, "pipeline config must be a JSON object");
    PipelineConfig c;
    try {
        c.prompt = j.value("prompt", c.prompt);
        c.localization.gamma = j.value("gamma", c.localization.gamma);
        c.localization.tau = j.value("tau", c.localization.tau);
        c.localization.filter_sigma = j.value("filter_sigma", c.localization.filter_sigma);
        c.localization.vote_threshold = j.value("vote_threshold", c.localization.vote_threshold);
        if (j.contains("cycles")) {
            c.cycles.clear();
            for (const json& cj : j.at("cycles")) {
                CycleSpec s;
                s.m = cj.value("m", s.m);
                s.start_t = cj.value("start_t", s.start_t);
                s.iters = cj.value("iters", s.iters);
                c.cycles.push_back(s);
            }
        }
        c.guidance = j.value("guidance_w", c.guidance);
        c.seed = j.value("seed", c.seed);
        if (j.contains("loss")) {
            c.l1_weight = j.at("loss").value("l1", c.l1_weight);
            c.perceptual_weight = j.at("loss").value("perceptual", c.perceptual_weight);
        }
        if (j.contains("background")) c.background = vec3_of(j.at("background"), "background");
        c.use_depth_init = j.value("use_depth_init", c.use_depth_init);
        if (j.contains("init")) {
            c.delta.stride = j.at("init").value("stride", c.delta.stride);
            c.delta.opacity = j.at("init").value("opacity", c.delta.opacity);
        }
        if (j.contains("locate_views")) c.locate_views = j.at("locate_views").get<std::vector<int>>();
    } catch (const json::exception& e) {
        fail(ErrorKind::Input, std::string("pipeline config: ") + e.what());
    }
    return c;
}

json to_json(const PipelineConfig& c) {
    json cycles = json::array();
    for (const CycleSpec& s : c.cycles) cycles.push_back({{"m", s.m}, {"start_t", s.start_t}, {"iters", s.iters}});
    return {{"prompt", c.prompt},
            {"gamma", c.localization.gamma},
            {"tau", c.localization.tau},
            {"filter_sigma", c.localization.filter_sigma},
            {"vote_threshold", c.localization.vote_threshold},
            {"cycles", cycles},
            {"guidance_w", c.guidance},
            {"seed", c.seed},
            {"loss", {{"l1", c.l1_weight}, {"perceptual", c.perceptual_weight}}},
            {"background", {c.background.x(), c.background.y(), c.background.z()}},
            {"use_depth_init", c.use_depth_init},
            {"init", {{"stride", c.delta.stride}, {"opacity", c.delta.opacity}}},
            {"locate_views", c.locate_views}};
}

MockRecipe parse_mock_recipe(const json& j) {
    if (!j.is_object()) fail(ErrorKind::Input, "mock spec must be a JSON object");
    MockRecipe r;
    try {
        for (const json& e : j.value("recolor", json::array()))
            r.recolor.emplace_back(e.at("index").get<std::size_t>(), vec3_of(e.at("color"), "recolor color"));
        for (const json& e : j.value("add", json::array())) {
            Gaussian g;
            g.mean = vec3_of(e.at("mean"), "added mean");
            g.scale = vec3_of(e.at("scale"), "added scale");
            if (e.contains("rotation")) {
                const auto q = e.at("rotation").get<std::vector<double>>();
                if (q.size() != 4) fail(ErrorKind::Input, "added rotation must have 4 components");
                g.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
            }
            g.opacity = e.value("opacity", 0.9);
            g.color = vec3_of(e.at("color"), "added color");
            validate(g, r.added.size());
            r.added.push_back(g);
        }
        if (j.contains("depth")) {
            r.depth_a0 = j.at("depth").value("a0", r.depth_a0);
            r.depth_b0 = j.at("depth").value("b0", r.depth_b0);
        }
        r.blob_amplitude = j.value("blob_amplitude", r.blob_amplitude);
        r.latent_channels = j.value("latent_channels", r.latent_channels);
    } catch (const json::exception& e) {
        fail(ErrorKind::Input, std::string("mock spec: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::Input, std::string("mock spec: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Options {
    std::string scene, cameras, out, config, mock_spec, bridge_cmd, resume, masks, init_dir, cycles, background;
    std::optional<std::string> prompt;
    std::optional<double> gamma, guidance;
    std::optional<int> tau, m, iters;
    std::optional<std::uint64_t> seed;
    bool mock = false;
    double bridge_timeout = 120.0;
};

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            fail(ErrorKind::Input, what + ": cannot parse '" + item + "'");
        }
    }
    return out;
}

PipelineConfig build_config(const Options& o) {
    PipelineConfig c = o.config.empty() ? PipelineConfig{} : parse_pipeline_config(read_json(o.config));
    if (o.prompt) c.prompt = *o.prompt;
    if (o.gamma) c.localization.gamma = *o.gamma;
    if (o.tau) c.localization.tau = *o.tau;
    if (o.guidance) c.guidance = *o.guidance;
    if (o.seed) c.seed = *o.seed;
    if (!o.cycles.empty()) {
        std::vector<CycleSpec> cycles;
        for (double t : parse_number_list(o.cycles, "--cycles")) {
            CycleSpec s;
            s.start_t = static_cast<int>(t);
            if (s.start_t != t) fail(ErrorKind::Input, "--cycles entries must be integers");
            if (!c.cycles.empty()) {
                s.m = c.cycles.front().m;
                s.iters = c.cycles.front().iters;
            }
            cycles.push_back(s);
        }
        c.cycles = cycles;
    }
    for (CycleSpec& s : c.cycles) {
        if (o.m) s.m = *o.m;
        if (o.iters) s.iters = *o.iters;
    }
    if (!o.background.empty()) {
        const auto bg = parse_number_list(o.background, "--background");
        if (bg.size() != 3) fail(ErrorKind::Input, "--background needs three comma-separated values");
        c.background = Rgb(bg[0], bg[1], bg[2]);
    }
    c.validate();
    return c;
}

struct Scene {
    GaussianCloud cloud;
    std::vector<NamedCamera> named;
    std::vector<Camera> cameras;
};

Scene load_scene(const Options& o) {
    if (o.scene.empty()) fail(ErrorKind::Input, "--scene is required");
    if (o.cameras.empty()) fail(ErrorKind::Input, "--cameras is required");
    if (!fs::exists(o.scene)) fail(ErrorKind::Input, "scene file not found: " + o.scene);
    if (!fs::exists(o.cameras)) fail(ErrorKind::Input, "camera manifest not found: " + o.cameras);
    Scene s;
    s.cloud = load_ply(o.scene);
    s.named = load_camera_manifest(o.cameras);
    s.cameras = cameras_of(s.named);
    if (s.cameras.empty()) fail(ErrorKind::Input, "camera manifest lists no views");
    return s;
}

/// Owns whichever oracle backend the flags select.
struct OracleBackend {
    std::unique_ptr<MockSuite> mock;
    std::unique_ptr<BridgeClient> bridge;
    Oracles oracles;
    json record;
};

std::unique_ptr<OracleBackend> make_oracles(const Options& o, const Scene& scene, const PipelineConfig& config,
                                            const json& config_json) {
    auto b = std::make_unique<OracleBackend>();
    if (o.mock && !o.bridge_cmd.empty()) fail(ErrorKind::Input, "--mock-oracles and --bridge-cmd are exclusive");
    if (o.mock) {
        json spec = json::object();
        if (!o.mock_spec.empty())
            spec = read_json(o.mock_spec);
        else if (config_json.contains("mock"))
            spec = config_json.at("mock");
        MockRecipe recipe = parse_mock_recipe(spec);
        recipe.background = config.background;
        b->mock = std::make_unique<MockSuite>(scene.cloud, scene.cameras, recipe);
        b->oracles = b->mock->oracles();
        b->record = {{"type", "mock"}, {"spec", spec}};
    } else if (!o.bridge_cmd.empty()) {
        BridgeOptions bo;
        bo.command = o.bridge_cmd;
        bo.workspace = fs::path(o.out) / "bridge";
        bo.timeout = std::chrono::milliseconds(static_cast<long long>(o.bridge_timeout * 1000.0));
        b->bridge = std::make_unique<BridgeClient>(bo);
        b->oracles = b->bridge->oracles();
        json hs = b->bridge->handshake();
        if (hs.contains("alpha_bars")) hs["alpha_bars"] = hs["alpha_bars"].size();  // keep the manifest small
        b->record = {{"type", "bridge"}, {"command", o.bridge_cmd}, {"handshake", hs}};
    } else {
        fail(ErrorKind::Input, "choose an oracle backend with --mock-oracles or --bridge-cmd");
    }
    return b;
}

/// Collects artifacts and timings and writes manifest.json at the end.
class RunManifest {
public:
    RunManifest(fs::path out, std::string command) : out_(std::move(out)), command_(std::move(command)) {
        fs::create_directories(out_);
    }

    fs::path path(const std::string& rel) {
        const fs::path p = out_ / rel;
        fs::create_directories(p.parent_path());
        artifacts_.push_back(rel);
        return p;
    }

    void stage(const std::string& name) {
        const auto now = std::chrono::steady_clock::now();
        timings_[name] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }
    void add_timing(const std::string& name, double seconds) { timings_[name] = std::max(0.0, seconds); }

    json& extra() { return extra_; }

    void write(const json& config, std::uint64_t seed, const json& oracle) {
        json j = extra_;
        j["command"] = command_;
        j["config"] = config;
        j["seed"] = seed;
        j["timings"] = timings_;
        j["artifacts"] = artifacts_;
        j["oracle"] = oracle;
        write_text_atomic(out_ / "manifest.json", j.dump(2) + "\n");
    }

private:
    fs::path out_;
    std::string command_;
    std::vector<std::string> artifacts_;
    json timings_ = json::object();
    json extra_ = json::object();
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string view_file(int view, const std::string& suffix) {
    std::ostringstream s;
    s << "view_" << std::setw(3) << std::setfill('0') << view << suffix;
    return s.str();
}

void write_localization(RunManifest& manifest, const std::vector<Mask2D>& masks, const Mask3D& mask3d, int frontal,
                        const PipelineConfig& config) {
    json sums = json::array();
    for (const Mask2D& m : masks) {
        save_mask2d(m, manifest.path("masks/" + view_file(m.view_index, ".png")), config.localization);
        manifest.path("masks/" + view_file(m.view_index, ".json"));
        sums.push_back({{"view", m.view_index}, {"pixels", m.pixel_sum()}});
    }
    save_mask3d(mask3d, manifest.path("mask3d.bin"));
    const json report{{"frontal_view", frontal}, {"mask_sums", sums}, {"gaussians_selected", mask3d.count()}};
    write_text_atomic(manifest.path("frontal.json"), report.dump(2) + "\n");
    manifest.extra()["frontal_view"] = frontal;
}

std::vector<Mask2D> load_masks(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorKind::Input, "mask directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorKind::Input, "no mask files in " + dir.string());
    std::vector<Mask2D> masks;
    for (const auto& f : files) masks.push_back(load_mask2d(f));
    return masks;
}

json checkpoint_json(const PipelineCheckpoint& cp, const std::string& ply) {
    return {{"cycles_done", cp.cycles_done},
            {"first_frontal", cp.first_frontal},
            {"edited_views", cp.edited_views},
            {"scene", ply}};
}

PipelineCheckpoint load_checkpoint(const fs::path& path) {
    const json j = read_json(path);
    PipelineCheckpoint cp;
    try {
        cp.cycles_done = j.at("cycles_done").get<int>();
        cp.first_frontal = j.at("first_frontal").get<int>();
        cp.edited_views = j.at("edited_views").get<std::vector<int>>();
        cp.cloud = load_ply(path.parent_path() / j.at("scene").get<std::string>());
    } catch (const json::exception& e) {
        fail(ErrorKind::Input, path.string() + ": " + e.what());
    }
    return cp;
}

void require_out(const Options& o) {
    if (o.out.empty()) fail(ErrorKind::Input, "--out is required");
}

int cmd_locate(const Options& o, std::ostream& out) {
    require_out(o);
    const Scene scene = load_scene(o);
    const PipelineConfig config = build_config(o);
    const json config_json = o.config.empty() ? json::object() : read_json(o.config);
    auto backend = make_oracles(o, scene, config, config_json);
    RunManifest manifest(o.out, "locate");
    const LocalizationResult loc = localize_scene(scene.cloud, scene.cameras, config, *backend->oracles.noise);
    manifest.stage("locate");
    write_localization(manifest, loc.masks, loc.mask3d, loc.first_frontal, config);
    manifest.write(to_json(config), config.seed, backend->record);
    out << "frontal view " << loc.first_frontal << ", " << loc.mask3d.count() << " of " << scene.cloud.size()
        << " Gaussians selected\n";
    return 0;
}

int cmd_init(const Options& o, std::ostream& out) {
    require_out(o);
    const Scene scene = load_scene(o);
    const PipelineConfig config = build_config(o);
    const fs::path mask_dir = o.masks.empty() ? fs::path(o.out) / "masks" : fs::path(o.masks);
    const std::vector<Mask2D> masks = load_masks(mask_dir);
    const json config_json = o.config.empty() ? json::object() : read_json(o.config);
    auto backend = make_oracles(o, scene, config, config_json);
    RunManifest manifest(o.out, "init");

    const Mask2D& frontal = masks[select_frontal(masks)];
    const int v = frontal.view_index;
    if (v < 0 || v >= static_cast<int>(scene.cameras.size()))
        fail(ErrorKind::Input, "mask refers to unknown view " + std::to_string(v));
    if (!frontal.values.same_shape(scene.cameras[v].width(), scene.cameras[v].height()))
        fail(ErrorKind::Input, "mask of view " + std::to_string(v) + " does not match the camera resolution");
    const RgbImage original = render(scene.cloud, scene.cameras[v], config.background).color;
    RgbImage edited;
    try {
        edited = backend->oracles.editor->edit(EditQuery{&original, &original, config.prompt, kNumTimesteps,
                                                         config.guidance, substream_seed(config.seed, "init"), v});
    } catch (const Error& e) {
        throw Error(e.kind(), "frontal edit of view " + std::to_string(v) + ": " + e.what());
    }
    if (!config.use_depth_init) fail(ErrorKind::Input, "init needs use_depth_init enabled");
    const InitializationResult init = initialize_from_depth(scene.cloud, scene.cameras[v], v, original, edited,
                                                            frontal.values, *backend->oracles.depth, config.delta);
    manifest.stage("initialize");
    write_png(manifest.path("edited_frontal.png"), edited);
    save_ply(init.merged, manifest.path("init.ply"));
    const json report{{"frontal_view", v},
                      {"calibration", {{"a", init.calibration.a}, {"b", init.calibration.b}}},
                      {"added", init.delta.delta.size()},
                      {"skipped_pixels", init.delta.skipped}};
    write_text_atomic(manifest.path("init.json"), report.dump(2) + "\n");
    manifest.extra()["initialization"] = report;
    manifest.write(to_json(config), config.seed, backend->record);
    out << "added " << init.delta.delta.size() << " Gaussians from view " << v << " (" << init.delta.skipped
        << " pixels skipped)\n";
    return 0;
}

/// Shared by refine and pipeline: runs the schedule and writes every artifact.
int run_schedule(const Options& o, std::ostream& out, const std::string& command,
                 const std::optional<PipelineCheckpoint>& start) {
    require_out(o);
    const Scene scene = load_scene(o);
    const PipelineConfig config = build_config(o);
    const json config_json = o.config.empty() ? json::object() : read_json(o.config);
    auto backend = make_oracles(o, scene, config, config_json);
    RunManifest manifest(o.out, command);

    PipelineObserver obs;
    obs.on_localized = [&](const std::vector<Mask2D>& masks, const Mask3D& mask3d, int frontal) {
        write_localization(manifest, masks, mask3d, frontal, config);
    };
    obs.on_initialized = [&](const RgbImage& edited, const GaussianCloud& merged) {
        write_png(manifest.path("edited_frontal.png"), edited);
        save_ply(merged, manifest.path("init.ply"));
    };
    obs.on_cycle = [&](const CycleRecord& rec, const PipelineCheckpoint& cp) {
        const std::string tag = "cycle_" + std::to_string(rec.index + 1);
        for (const EditedView& ev : rec.views) {
            write_png(manifest.path("coarse/" + tag + "_" + view_file(ev.view, ".png")), ev.coarse);
            write_png(manifest.path("refined/" + tag + "_" + view_file(ev.view, ".png")), ev.refined);
        }
        save_ply(cp.cloud, manifest.path("checkpoints/" + tag + ".ply"));
        write_text_atomic(manifest.path("checkpoints/" + tag + ".json"),
                          checkpoint_json(cp, tag + ".ply").dump(2) + "\n");
    };

    const PipelineResult result = run_pipeline(scene.cloud, scene.cameras, config, backend->oracles, obs, start);
    for (const auto& [stage, seconds] : result.timings) manifest.add_timing(stage, seconds);
    save_ply(result.cloud, manifest.path("final.ply"));
    if (result.initialization)
        manifest.extra()["initialization"] = {{"a", result.initialization->calibration.a},
                                              {"b", result.initialization->calibration.b},
                                              {"added", result.initialization->delta.delta.size()}};
    manifest.write(to_json(config), config.seed, backend->record);
    out << "wrote " << (fs::path(o.out) / "final.ply").string() << " (" << result.cloud.size() << " Gaussians, "
        << result.cycles.size() << " cycles run)\n";
    return 0;
}

int cmd_pipeline(const Options& o, std::ostream& out) {
    std::optional<PipelineCheckpoint> start;
    if (!o.resume.empty()) start = load_checkpoint(o.resume);
    return run_schedule(o, out, "pipeline", start);
}

int cmd_refine(const Options& o, std::ostream& out) {
    if (!o.resume.empty()) return run_schedule(o, out, "refine", load_checkpoint(o.resume));
    const fs::path dir = o.init_dir.empty() ? fs::path(o.out) : fs::path(o.init_dir);
    const json report = read_json(dir / "init.json");
    PipelineCheckpoint cp;
    try {
        cp.first_frontal = report.at("frontal_view").get<int>();
    } catch (const json::exception& e) {
        fail(ErrorKind::Input, (dir / "init.json").string() + ": " + e.what());
    }
    if (!fs::exists(dir / "init.ply")) fail(ErrorKind::Input, "missing " + (dir / "init.ply").string());
    if (!fs::exists(dir / "edited_frontal.png")) fail(ErrorKind::Input, "missing " + (dir / "edited_frontal.png").string());
    cp.cloud = load_ply(dir / "init.ply");
    cp.first_edit = read_png(dir / "edited_frontal.png");
    return run_schedule(o, out, "refine", cp);
}

int cmd_render(const Options& o, std::ostream& out) {
    require_out(o);
    const Scene scene = load_scene(o);
    Rgb bg = Rgb::Zero();
    if (!o.background.empty()) {
        const auto v = parse_number_list(o.background, "--background");
        if (v.size() != 3) fail(ErrorKind::Input, "--background needs three comma-separated values");
        bg = Rgb(v[0], v[1], v[2]);
    }
    RunManifest manifest(o.out, "render");
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        const std::string name = scene.named[i].name.empty() ? view_file(static_cast<int>(i), "") : scene.named[i].name;
        if (name.find('/') != std::string::npos || name == "." || name == "..")
            fail(ErrorKind::Input, "view name '" + name + "' is not a plain file name");
        const RenderOutput r = render(scene.cloud, scene.cameras[i], bg);
        write_png(manifest.path(name + ".png"), r.color);
        write_pfm(manifest.path(name + "_color.pfm"), r.color);
        write_pfm(manifest.path(name + "_depth.pfm"), r.depth);
        write_pfm(manifest.path(name + "_alpha.pfm"), r.alpha);
    }
    manifest.stage("render");
    manifest.write(json::object(), 0, json::object());
    out << "rendered " << scene.cameras.size() << " views\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Localized editing of Gaussian splatting scenes"};
    app.require_subcommand(1);
    Options o;

    auto add_scene = [&](CLI::App* c) {
        c->add_option("--scene", o.scene, "input PLY");
        c->add_option("--cameras", o.cameras, "camera manifest JSON");
        c->add_option("--out", o.out, "output directory");
    };
    auto add_edit = [&](CLI::App* c) {
        c->add_option("--config", o.config, "pipeline config JSON");
        c->add_option("--prompt", o.prompt, "edit instruction");
        c->add_option("--gamma", o.gamma, "mask threshold in [0,1]");
        c->add_option("--tau", o.tau, "localization timestep");
        c->add_option("--m", o.m, "adjacent views per cycle");
        c->add_option("--cycles", o.cycles, "start timesteps, e.g. 750,500,250");
        c->add_option("--iters", o.iters, "fine-tuning iterations per cycle");
        c->add_option("--guidance", o.guidance, "guidance weight");
        c->add_option("--seed", o.seed, "random seed");
        c->add_option("--background", o.background, "background color r,g,b");
        c->add_flag("--mock-oracles", o.mock, "use deterministic mock oracles");
        c->add_option("--mock-spec", o.mock_spec, "mock recipe JSON");
        c->add_option("--bridge-cmd", o.bridge_cmd, "command starting an oracle bridge");
        c->add_option("--bridge-timeout", o.bridge_timeout, "seconds to wait for each bridge reply");
    };

    CLI::App* locate = app.add_subcommand("locate", "per-view masks, 3D mask and frontal view");
    add_scene(locate);
    add_edit(locate);
    CLI::App* init = app.add_subcommand("init", "edit the frontal view and add Gaussians from depth");
    add_scene(init);
    add_edit(init);
    init->add_option("--masks", o.masks, "mask directory (default OUT/masks)");
    CLI::App* refine = app.add_subcommand("refine", "refinement cycles starting from init outputs");
    add_scene(refine);
    add_edit(refine);
    refine->add_option("--init-dir", o.init_dir, "directory with init outputs (default OUT)");
    refine->add_option("--resume", o.resume, "checkpoint JSON to continue from");
    CLI::App* pipeline = app.add_subcommand("pipeline", "full locate, init and refine run");
    add_scene(pipeline);
    add_edit(pipeline);
    pipeline->add_option("--resume", o.resume, "checkpoint JSON to continue from");
    CLI::App* render_cmd = app.add_subcommand("render", "render every view to PNG and PFM");
    add_scene(render_cmd);
    render_cmd->add_option("--background", o.background, "background color r,g,b");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*locate) return cmd_locate(o, out);
        if (*init) return cmd_init(o, out);
        if (*refine) return cmd_refine(o, out);
        if (*pipeline) return cmd_pipeline(o, out);
        return cmd_render(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace gsedit::cli
