#include "gsedit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

#include "gsedit/random.hpp"
#include "gsedit/scene_io.hpp"

namespace gsedit {

void PipelineConfig::validate() const {
    if (prompt.empty()) fail(ErrorKind::Input, "prompt must not be empty");
    localization.validate();
    validate_cycles(cycles);
    if (!(guidance >= 0.0)) fail(ErrorKind::Input, "guidance weight must be non-negative");
    LossConfig{l1_weight, perceptual_weight, nullptr}.validate();
    if (delta.stride < 1) fail(ErrorKind::Input, "initialization stride must be at least 1");
    if (!(delta.opacity > 0.0 && delta.opacity <= 1.0)) fail(ErrorKind::Input, "initial opacity must lie in (0, 1]");
}

int choose_cycle_frontal(const std::vector<Mask2D>& masks, const std::vector<int>& edited, std::uint64_t seed,
                         int cycle) {
    require(!edited.empty(), "no edited view to choose a frontal view from");
    std::map<int, std::size_t> sums;
    for (const Mask2D& m : masks) sums[m.view_index] = m.pixel_sum();
    std::size_t best = 0;
    for (int v : edited) best = std::max(best, sums[v]);
    std::vector<int> candidates;
    for (int v : edited)
        if (2 * sums[v] > best || best == 0) candidates.push_back(v);
    const CounterRng rng(substream_seed(seed, "refine", static_cast<std::uint64_t>(cycle)));
    const auto pick = static_cast<std::size_t>(rng.uniform(0) * static_cast<double>(candidates.size()));
    return candidates[std::min(pick, candidates.size() - 1)];
}

namespace {

class StageTimer {
public:
    explicit StageTimer(std::vector<std::pair<std::string, double>>& out) : out_(out) {}
    void mark(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        out_.emplace_back(stage, std::chrono::duration<double>(now - last_).count());
        last_ = now;
    }

private:
    std::vector<std::pair<std::string, double>>& out_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

LocalizationResult localize_scene(const GaussianCloud& scene, const std::vector<Camera>& cameras,
                                  const PipelineConfig& config, NoisePredictor& noise) {
    config.localization.validate();
    LocalizationResult out;
    const int num_views = static_cast<int>(cameras.size());
    for (const Camera& cam : cameras) out.originals.push_back(render(scene, cam, config.background).color);
    std::vector<int> views = config.locate_views;
    if (views.empty())
        for (int v = 0; v < num_views; ++v) views.push_back(v);
    const std::uint64_t seed = substream_seed(config.seed, "locate");
    for (int v : views) {
        if (v < 0 || v >= num_views) fail(ErrorKind::Input, "locate view " + std::to_string(v) + " out of range");
        out.masks.push_back(locate_2d(out.originals[v], v, config.prompt, noise, config.localization, seed));
    }
    out.mask3d = inverse_render_masks(scene, cameras, out.masks, config.localization);
    out.first_frontal = out.masks[select_frontal(out.masks)].view_index;
    return out;
}

PipelineResult run_pipeline(const GaussianCloud& scene, const std::vector<Camera>& cameras,
                            const PipelineConfig& config, const Oracles& oracles, const PipelineObserver& observer,
                            const std::optional<PipelineCheckpoint>& resume) {
    config.validate();
    require(!cameras.empty(), "pipeline needs at least one camera");
    require(oracles.noise && oracles.editor, "pipeline needs noise and editor oracles");
    require(!config.use_depth_init || oracles.depth, "depth initialization needs a depth oracle");
    scene.validate();

    PipelineResult result;
    StageTimer timer(result.timings);
    const int num_views = static_cast<int>(cameras.size());

    {
        LocalizationResult loc = localize_scene(scene, cameras, config, *oracles.noise);
        result.originals = std::move(loc.originals);
        result.masks = std::move(loc.masks);
        result.mask3d = std::move(loc.mask3d);
        result.first_frontal = loc.first_frontal;
    }
    if (observer.on_localized) observer.on_localized(result.masks, result.mask3d, result.first_frontal);
    timer.mark("locate");

    const int v_first = result.first_frontal;
    const BinaryMask& frontal_mask = std::find_if(result.masks.begin(), result.masks.end(), [&](const Mask2D& m) {
                                         return m.view_index == v_first;
                                     })->values;

    GaussianCloud cloud;
    std::set<int> edited;
    RgbImage first_edit;
    int start_cycle = 0;
    if (resume) {
        if (resume->cycles_done < 0 || resume->cycles_done > static_cast<int>(config.cycles.size()))
            fail(ErrorKind::Input, "checkpoint cycle count does not fit the schedule");
        if (resume->first_frontal != v_first)
            fail(ErrorKind::Input, "checkpoint frontal view disagrees with localization");
        if (resume->cycles_done == 0 && !resume->first_edit.same_shape(result.originals[v_first]))
            fail(ErrorKind::Input, "an initialized start needs the frontal edit at the view's resolution");
        cloud = resume->cloud;
        first_edit = resume->first_edit;
        edited.insert(resume->edited_views.begin(), resume->edited_views.end());
        start_cycle = resume->cycles_done;
    } else {
        try {
            first_edit = oracles.editor->edit(EditQuery{&result.originals[v_first], &result.originals[v_first],
                                                        config.prompt, kNumTimesteps, config.guidance,
                                                        substream_seed(config.seed, "init"), v_first});
        } catch (const Error& e) {
            throw Error(e.kind(), "frontal edit of view " + std::to_string(v_first) + ": " + e.what());
        }
        if (!first_edit.same_shape(result.originals[v_first]))
            fail(ErrorKind::Oracle, "editor returned a different resolution for the frontal view");
        if (config.use_depth_init) {
            result.initialization = initialize_from_depth(scene, cameras[v_first], v_first, result.originals[v_first],
                                                          first_edit, frontal_mask, *oracles.depth, config.delta);
            cloud = result.initialization->merged;
        } else {
            cloud = scene;
        }
        if (observer.on_initialized) observer.on_initialized(first_edit, cloud);
        timer.mark("initialize");
    }

    LossConfig loss{config.l1_weight, config.perceptual_weight, oracles.perceptual};
    OptimizerConfig opt = config.optimizer;
    opt.scene_scale = camera_extent(cameras);

    int iteration = 1;
    for (int k = 0; k < start_cycle; ++k) iteration += config.cycles[k].iters;

    for (int k = start_cycle; k < static_cast<int>(config.cycles.size()); ++k) {
        const CycleSpec& spec = config.cycles[k];
        CycleRecord record;
        record.index = k;
        record.frontal = k == 0 ? v_first
                                : choose_cycle_frontal(result.masks, std::vector<int>(edited.begin(), edited.end()),
                                                       config.seed, k);
        std::vector<int> cycle_views{record.frontal};
        if (num_views > 1) {
            const std::vector<int> adj = select_adjacent(cameras, record.frontal, std::min(spec.m, num_views - 1));
            cycle_views.insert(cycle_views.end(), adj.begin(), adj.end());
        }
        for (int v : cycle_views) {
            EditedView ev;
            ev.view = v;
            ev.original = result.originals[v];
            ev.coarse = render(cloud, cameras[v], config.background).color;
            if (k == 0 && v == v_first && !first_edit.empty())
                ev.refined = first_edit;
            else
                ev.refined = refine_view(ev.original, ev.coarse, config.prompt, spec.start_t, config.guidance,
                                         *oracles.editor, v,
                                         substream_seed(config.seed, "refine-view",
                                                        static_cast<std::uint64_t>(k) * num_views + v));
            record.views.push_back(std::move(ev));
            edited.insert(v);
        }
        cloud = finetune(cloud, record.views, cameras, spec.iters, loss, opt, config.background,
                         observer.on_iteration, iteration);
        cloud = quantize_to_storage(cloud);
        iteration += spec.iters;

        PipelineCheckpoint cp{k + 1, v_first, std::vector<int>(edited.begin(), edited.end()), cloud, {}};
        if (observer.on_cycle) observer.on_cycle(record, cp);
        result.cycles.push_back(std::move(record));
        timer.mark("cycle " + std::to_string(k + 1));
    }
    result.cloud = std::move(cloud);
    return result;
}

}  // namespace gsedit
