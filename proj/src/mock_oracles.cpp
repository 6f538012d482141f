#include "gsedit/mock_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gsedit/random.hpp"
#include "gsedit/renderer.hpp"

namespace gsedit {

double MockEditor::blend_factor(int start_t) { return std::clamp(start_t / 750.0, 0.0, 1.0); }

void MockEditor::register_view(int view, RgbImage target, BinaryMask region) {
    require(target.same_shape(region), "mock editor: target and region shapes differ");
    specs_[view] = {std::move(target), std::move(region)};
}

RgbImage MockEditor::edit(const EditQuery& q) {
    require(q.coarse != nullptr, "mock editor: missing coarse image");
    const auto it = specs_.find(q.view);
    if (it == specs_.end()) fail(ErrorKind::Oracle, "mock editor: no spec registered for view " + std::to_string(q.view));
    const auto& [target, region] = it->second;
    if (!target.same_shape(*q.coarse)) fail(ErrorKind::Oracle, "mock editor: resolution mismatch for view " + std::to_string(q.view));
    RgbImage out = *q.coarse;
    const double f = blend_factor(q.start_t);
    if (f == 0.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (region[i]) out[i] = (1.0 - f) * out[i] + f * target[i];
    return out;
}

MockNoisePredictor::MockNoisePredictor(int channels, int latent_stride) : channels_(channels), stride_(latent_stride) {
    require(channels >= 1 && latent_stride >= 1, "mock noise predictor: bad latent geometry");
}

void MockNoisePredictor::register_view(int view, ScalarImage blob) { blobs_[view] = std::move(blob); }

Tensor MockNoisePredictor::predict_noise(const NoiseQuery& q) {
    require(q.image != nullptr, "mock noise predictor: missing image");
    const int h = (q.image->height() + stride_ - 1) / stride_;
    const int w = (q.image->width() + stride_ - 1) / stride_;
    Tensor out(channels_, h, w);
    const CounterRng rng(hash_combine(hash_combine(q.seed, static_cast<std::uint64_t>(q.view)),
                                      static_cast<std::uint64_t>(q.tau)));
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = rng.normal(i);
    if (q.prompt.empty()) return out;
    const auto it = blobs_.find(q.view);
    if (it == blobs_.end()) return out;
    const ScalarImage& blob = it->second;
    if (!blob.same_shape(w, h)) fail(ErrorKind::Oracle, "mock noise predictor: blob shape mismatch for view " + std::to_string(q.view));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(0, y, x) += blob.at(x, y);
    return out;
}

MockDepth::MockDepth(double a0, double b0) : a0_(a0), b0_(b0) {
    require(a0 > 0.0, "mock depth: a0 must be positive");
}

void MockDepth::register_image(int view, RgbImage image, ScalarImage true_disparity) {
    require(image.same_shape(true_disparity), "mock depth: image and disparity shapes differ");
    entries_.emplace(view, std::make_pair(std::move(image), std::move(true_disparity)));
}

ScalarImage MockDepth::disparity(const RgbImage& image, int view) {
    const auto [first, last] = entries_.equal_range(view);
    const ScalarImage* best = nullptr;
    double best_err = std::numeric_limits<double>::infinity();
    for (auto it = first; it != last; ++it) {
        if (!it->second.first.same_shape(image)) continue;
        const double err = mean_squared_error(it->second.first, image);
        if (err < best_err) {
            best_err = err;
            best = &it->second.second;
        }
    }
    if (best == nullptr) fail(ErrorKind::Oracle, "mock depth: nothing registered for view " + std::to_string(view));
    ScalarImage out = *best;
    for (double& d : out.data()) d = (d - b0_) / a0_;
    return out;
}

double MockPerceptual::distance(const RgbImage& rendered, const RgbImage& target, RgbImage* grad) {
    require(rendered.same_shape(target), "perceptual: image shapes differ");
    const int bw = (rendered.width() + 1) / 2, bh = (rendered.height() + 1) / 2;
    const double n = 3.0 * bw * bh;
    if (grad) *grad = RgbImage(rendered.width(), rendered.height(), Rgb::Zero());
    double total = 0.0;
    for (int by = 0; by < bh; ++by) {
        for (int bx = 0; bx < bw; ++bx) {
            const int x1 = std::min(2 * bx + 2, rendered.width()), y1 = std::min(2 * by + 2, rendered.height());
            Rgb diff = Rgb::Zero();
            int count = 0;
            for (int y = 2 * by; y < y1; ++y)
                for (int x = 2 * bx; x < x1; ++x, ++count) diff += rendered.at(x, y) - target.at(x, y);
            diff /= count;
            total += diff.squaredNorm();
            if (grad)
                for (int y = 2 * by; y < y1; ++y)
                    for (int x = 2 * bx; x < x1; ++x) grad->at(x, y) = 2.0 * diff / (n * count);
        }
    }
    return total / n;
}

GaussianCloud apply_recipe(const GaussianCloud& cloud, const MockRecipe& recipe) {
    GaussianCloud out = cloud;
    for (const auto& [index, color] : recipe.recolor) {
        require(index < out.size(), "mock recipe: recolor index " + std::to_string(index) + " out of range");
        out[index].color = color;
    }
    for (const Gaussian& g : recipe.added) out.push_back(g, true);
    return out;
}

ScalarImage disparity_from_render(const ScalarImage& depth, const ScalarImage& alpha) {
    ScalarImage out(depth.width(), depth.height(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (alpha[i] >= 0.5 && depth[i] > 0.0) out[i] = 1.0 / depth[i];
    return out;
}

MockSuite::MockSuite(const GaussianCloud& cloud, const std::vector<Camera>& cameras, const MockRecipe& recipe)
    : noise(recipe.latent_channels, 1), depth(recipe.depth_a0, recipe.depth_b0) {
    const GaussianCloud edited = apply_recipe(cloud, recipe);
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        const int view = static_cast<int>(v);
        const RenderOutput before = render(cloud, cameras[v], recipe.background);
        const RenderOutput after = render(edited, cameras[v], recipe.background);
        ScalarImage diff(before.color.width(), before.color.height());
        double max_diff = 0.0;
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i] = (after.color[i] - before.color[i]).cwiseAbs().maxCoeff();
            max_diff = std::max(max_diff, diff[i]);
        }
        BinaryMask region(diff.width(), diff.height(), 0);
        ScalarImage blob(diff.width(), diff.height(), 0.0);
        for (std::size_t i = 0; i < diff.size(); ++i) {
            region[i] = diff[i] > 1e-3;
            if (max_diff > 0.0 && diff[i] > 0.1 * max_diff) blob[i] = recipe.blob_amplitude;
        }
        editor.register_view(view, after.color, region);
        noise.register_view(view, blob);
        depth.register_image(view, before.color, disparity_from_render(before.depth, before.alpha));
        depth.register_image(view, after.color, disparity_from_render(after.depth, after.alpha));
        originals_.push_back(before.color);
        targets_.push_back(after.color);
        regions_.push_back(std::move(region));
    }
}

Oracles MockSuite::oracles() {
    Oracles o;
    o.noise = &noise;
    o.editor = &editor;
    o.depth = &depth;
    o.perceptual = &perceptual;
    return o;
}

}  // namespace gsedit
