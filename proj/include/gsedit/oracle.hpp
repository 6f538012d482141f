#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsedit/image.hpp"

namespace gsedit {

inline constexpr int kNumTimesteps = 1000;

/// Cumulative noise levels ᾱ_t for t = 0..1000, with ᾱ_0 = 1.
class NoiseSchedule {
public:
    /// β linear from 1e-4 (t = 1) to 2e-2 (t = 1000).
    static NoiseSchedule linear();
    /// Table for t = 1..1000 as reported by a bridge handshake.
    static NoiseSchedule from_alpha_bars(const std::vector<double>& alpha_bars);

    double alpha_bar(int t) const;
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }  // index t, 0..1000

private:
    std::vector<double> alpha_bars_;
};

/// Dense C×H×W tensor of doubles (latent-shaped oracle data).
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    bool operator==(const Tensor&) const = default;
};

/// √ᾱ_t·signal + √(1−ᾱ_t)·eps. Throws Contract for t outside [0, 1000] or
/// mismatched shapes.
Tensor add_noise(const Tensor& signal, int t, const Tensor& eps, const NoiseSchedule& schedule);

// ---------------------------------------------------------------------------
// Oracle interfaces. Implementations: deterministic mocks and the bridge client.

struct NoiseQuery {
    const RgbImage* image = nullptr;
    std::string prompt;  // empty for the unconditional prediction
    int tau = 600;
    std::uint64_t seed = 0;  // conditional and unconditional calls share ε through (seed, view, tau)
    int view = 0;
};

class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Tensor predict_noise(const NoiseQuery& query) = 0;
};

struct EditQuery {
    const RgbImage* original = nullptr;
    const RgbImage* coarse = nullptr;
    std::string prompt;
    int start_t = 0;
    double guidance = 7.5;
    std::uint64_t seed = 0;
    int view = 0;
};

class Editor {
public:
    virtual ~Editor() = default;
    virtual RgbImage edit(const EditQuery& query) = 0;
};

class DepthEstimator {
public:
    virtual ~DepthEstimator() = default;
    /// Relative disparity (affine-ambiguous inverse depth).
    virtual ScalarImage disparity(const RgbImage& image, int view) = 0;
};

class PerceptualMetric {
public:
    virtual ~PerceptualMetric() = default;
    /// Distance between `rendered` and `target`; fills `grad` with the
    /// derivative w.r.t. `rendered` when non-null.
    virtual double distance(const RgbImage& rendered, const RgbImage& target, RgbImage* grad) = 0;
};

/// Non-owning bundle handed to the pipeline.
struct Oracles {
    NoisePredictor* noise = nullptr;
    Editor* editor = nullptr;
    DepthEstimator* depth = nullptr;
    PerceptualMetric* perceptual = nullptr;  // optional
    NoiseSchedule schedule = NoiseSchedule::linear();
};

}  // namespace gsedit
