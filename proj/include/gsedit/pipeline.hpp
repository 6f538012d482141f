#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gsedit/depth_init.hpp"
#include "gsedit/localization.hpp"
#include "gsedit/refine.hpp"

namespace gsedit {

struct PipelineConfig {
    std::string prompt;
    LocalizationConfig localization;
    std::vector<CycleSpec> cycles{{20, 750, 500}, {20, 500, 500}, {20, 250, 500}};
    double guidance = 7.5;
    std::uint64_t seed = 0;
    double l1_weight = 1.0;
    double perceptual_weight = 0.2;
    OptimizerConfig optimizer;  // scene_scale is derived from the cameras
    DeltaConfig delta;
    bool use_depth_init = true;
    Rgb background = Rgb::Zero();
    std::vector<int> locate_views;  // empty: every view

    void validate() const;
};

struct CycleRecord {
    int index = 0;  // 0-based
    int frontal = 0;
    std::vector<EditedView> views;
};

/// Everything needed to continue a run after a finished cycle. With
/// cycles_done = 0 it describes an initialized scene and must carry the
/// frontal edit.
struct PipelineCheckpoint {
    int cycles_done = 0;
    int first_frontal = 0;
    std::vector<int> edited_views;  // ascending
    GaussianCloud cloud;
    RgbImage first_edit;
};

struct PipelineResult {
    GaussianCloud cloud;
    std::vector<RgbImage> originals;
    std::vector<Mask2D> masks;
    Mask3D mask3d;
    int first_frontal = 0;
    std::optional<InitializationResult> initialization;
    std::vector<CycleRecord> cycles;
    std::vector<std::pair<std::string, double>> timings;  // stage name, seconds
};

struct LocalizationResult {
    std::vector<RgbImage> originals;  // renders of the unedited scene, every view
    std::vector<Mask2D> masks;        // one per located view
    Mask3D mask3d;
    int first_frontal = 0;            // view index
};

/// Renders every view, locates the edit region on the configured views, lifts
/// the masks to 3D and picks the frontal view.
LocalizationResult localize_scene(const GaussianCloud& scene, const std::vector<Camera>& cameras,
                                  const PipelineConfig& config, NoisePredictor& noise);

struct PipelineObserver {
    std::function<void(const std::vector<Mask2D>&, const Mask3D&, int first_frontal)> on_localized;
    std::function<void(const RgbImage& edited, const GaussianCloud& merged)> on_initialized;
    std::function<void(const CycleRecord&, const PipelineCheckpoint&)> on_cycle;
    FinetuneObserver on_iteration;
};

/// Locate on every view, lift to 3D, edit the frontal view from pure noise,
/// initialize ΔG from depth, then run the refinement cycles. After each cycle
/// the cloud is snapped to its storage precision. Passing `resume` skips the
/// initialization and the cycles it already covers.
PipelineResult run_pipeline(const GaussianCloud& scene, const std::vector<Camera>& cameras,
                            const PipelineConfig& config, const Oracles& oracles,
                            const PipelineObserver& observer = {},
                            const std::optional<PipelineCheckpoint>& resume = std::nullopt);

/// Frontal view of cycle k ≥ 1: uniform among edited views whose mask sum
/// exceeds half the largest edited one, drawn from the per-cycle substream.
int choose_cycle_frontal(const std::vector<Mask2D>& masks, const std::vector<int>& edited, std::uint64_t seed,
                         int cycle);

}  // namespace gsedit
