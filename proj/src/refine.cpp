#include "gsedit/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gsedit {

void validate_cycles(const std::vector<CycleSpec>& cycles) {
    if (cycles.empty()) fail(ErrorKind::Input, "schedule needs at least one cycle");
    for (std::size_t k = 0; k < cycles.size(); ++k) {
        const CycleSpec& c = cycles[k];
        const std::string where = "cycle " + std::to_string(k + 1) + ": ";
        if (c.m < 1) fail(ErrorKind::Input, where + "m must be at least 1");
        if (c.iters < 1) fail(ErrorKind::Input, where + "iters must be at least 1");
        if (c.start_t < 0 || c.start_t > kNumTimesteps) fail(ErrorKind::Input, where + "start_t outside [0, 1000]");
        if (k > 0 && c.start_t > cycles[k - 1].start_t)
            fail(ErrorKind::Input, where + "start timesteps must not increase across cycles");
    }
}

void LossConfig::validate() const {
    if (!(l1 >= 0.0) || !(perceptual >= 0.0)) fail(ErrorKind::Input, "loss weights must be non-negative");
    if (l1 == 0.0 && perceptual == 0.0) fail(ErrorKind::Input, "loss weights must not both be zero");
}

double camera_extent(const std::vector<Camera>& cameras) {
    if (cameras.empty()) return 1.0;
    Vec3 center = Vec3::Zero();
    for (const Camera& c : cameras) center += c.position();
    center /= static_cast<double>(cameras.size());
    double radius = 0.0;
    for (const Camera& c : cameras) radius = std::max(radius, (c.position() - center).norm());
    return radius > 0.0 ? 1.1 * radius : 1.0;
}

std::vector<int> select_adjacent(const std::vector<Camera>& cameras, int frontal, int m) {
    const int n = static_cast<int>(cameras.size());
    require(frontal >= 0 && frontal < n, "frontal view " + std::to_string(frontal) + " out of range");
    require(m >= 1 && m <= n - 1, "adjacent count " + std::to_string(m) + " outside [1, " + std::to_string(n - 1) + "]");
    const Vec3 p = cameras[frontal].position();
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < n; ++i)
        if (i != frontal) order.emplace_back((cameras[i].position() - p).norm(), i);
    std::sort(order.begin(), order.end());
    std::vector<int> out;
    for (int i = 0; i < m; ++i) out.push_back(order[i].second);
    return out;
}

RgbImage refine_view(const RgbImage& original, const RgbImage& coarse, const std::string& prompt, int start_t,
                     double guidance, Editor& editor, int view, std::uint64_t seed) {
    require(original.same_shape(coarse), "original and coarse images differ in size");
    if (start_t == 0) return coarse;
    try {
        RgbImage out = editor.edit(EditQuery{&original, &coarse, prompt, start_t, guidance, seed, view});
        if (!out.same_shape(coarse)) fail(ErrorKind::Oracle, "editor returned a different resolution");
        return out;
    } catch (const Error& e) {
        throw Error(e.kind(), "refine view " + std::to_string(view) + ": " + e.what());
    }
}

LossValue edit_loss(const RgbImage& rendered, const RgbImage& target, const LossConfig& cfg, RgbImage* grad) {
    require(rendered.same_shape(target), "rendered and target images differ in size");
    LossValue v;
    const double n = 3.0 * static_cast<double>(rendered.size());
    if (grad) *grad = RgbImage(rendered.width(), rendered.height(), Rgb::Zero());
    if (cfg.l1 > 0.0) {
        for (std::size_t i = 0; i < rendered.size(); ++i) {
            const Rgb d = rendered[i] - target[i];
            v.l1 += d.cwiseAbs().sum();
            if (grad)
                for (int c = 0; c < 3; ++c) (*grad)[i][c] += cfg.l1 * ((d[c] > 0) - (d[c] < 0)) / n;
        }
        v.l1 /= n;
    }
    if (cfg.perceptual > 0.0 && cfg.perceptual_oracle != nullptr) {
        RgbImage pg;
        v.perceptual = cfg.perceptual_oracle->distance(rendered, target, grad ? &pg : nullptr);
        if (grad)
            for (std::size_t i = 0; i < rendered.size(); ++i) (*grad)[i] += cfg.perceptual * pg[i];
    }
    v.total = cfg.l1 * v.l1 + cfg.perceptual * v.perceptual;
    return v;
}

namespace {

/// Adam moments for one flat parameter vector.
struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}

    double step(std::size_t i, double grad, double lr, const OptimizerConfig& c, double bias1, double bias2) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad * grad;
        return lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + c.epsilon);
    }
};

double logit(double p) { return std::log(p) - std::log1p(-p); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

GaussianCloud finetune(const GaussianCloud& cloud, const std::vector<EditedView>& views,
                       const std::vector<Camera>& cameras, int iters, const LossConfig& loss,
                       const OptimizerConfig& opt, const Rgb& background, const FinetuneObserver& observer,
                       int first_iteration, const RenderSettings& settings) {
    require(!views.empty(), "fine-tuning needs at least one edited view");
    require(iters >= 0, "iteration count must be non-negative");
    for (const EditedView& ev : views) {
        require(ev.view >= 0 && static_cast<std::size_t>(ev.view) < cameras.size(),
                "edited view " + std::to_string(ev.view) + " has no camera");
        require(ev.refined.same_shape(cameras[ev.view].width(), cameras[ev.view].height()),
                "edited view " + std::to_string(ev.view) + " does not match its camera resolution");
    }
    GaussianCloud g = cloud;
    const std::size_t n = g.size();
    AdamState s_mean(3 * n), s_color(3 * n), s_opacity(n), s_scale(3 * n), s_rot(4 * n);
    std::vector<double> opacity_logit(n), log_scale(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        opacity_logit[i] = logit(std::clamp(g[i].opacity, 1e-12, 1.0 - 1e-12));
        for (int a = 0; a < 3; ++a) log_scale[3 * i + a] = std::log(g[i].scale[a]);
    }

    RgbImage grad_color;
    const ScalarImage no_depth;
    for (int it = 0; it < iters; ++it) {
        const EditedView& ev = views[static_cast<std::size_t>(it) % views.size()];
        const Camera& cam = cameras[ev.view];
        const RenderOutput r = render(g, cam, background, settings);
        const LossValue lv = edit_loss(r.color, ev.refined, loss, &grad_color);
        const int global = first_iteration + it;
        if (!std::isfinite(lv.total))
            fail(ErrorKind::Numeric, "non-finite loss at iteration " + std::to_string(global));
        const GaussianGradients grads = backward(g, cam, grad_color, no_depth, background, settings);

        const double t = it + 1;
        const double b1 = 1.0 - std::pow(opt.beta1, t), b2 = 1.0 - std::pow(opt.beta2, t);
        for (std::size_t i = 0; i < n; ++i) {
            Gaussian& q = g[i];
            for (int a = 0; a < 3; ++a) {
                q.mean[a] -= s_mean.step(3 * i + a, grads.mean[i][a], opt.lr_mean * opt.scene_scale, opt, b1, b2);
                q.color[a] = std::clamp(q.color[a] - s_color.step(3 * i + a, grads.color[i][a], opt.lr_color, opt, b1, b2),
                                        0.0, 1.0);
                const double gs = grads.scale[i][a] * q.scale[a];
                const double ds = s_scale.step(3 * i + a, gs, opt.lr_scale, opt, b1, b2);
                if (ds != 0.0) {
                    log_scale[3 * i + a] -= ds;
                    q.scale[a] = std::exp(log_scale[3 * i + a]);
                }
            }
            const double go = grads.opacity[i] * q.opacity * (1.0 - q.opacity);
            const double dopacity = s_opacity.step(i, go, opt.lr_opacity, opt, b1, b2);
            if (dopacity != 0.0) {
                opacity_logit[i] -= dopacity;
                q.opacity = std::max(sigmoid(opacity_logit[i]), 1e-12);
            }
            bool rotated = false;
            for (int a = 0; a < 4; ++a) {
                const double dr = s_rot.step(4 * i + a, grads.rotation[i][a], opt.lr_rotation, opt, b1, b2);
                q.rotation[a] -= dr;
                rotated = rotated || dr != 0.0;
            }
            if (!rotated) continue;
            const double norm = q.rotation.norm();
            if (!(norm > 0.0) || !std::isfinite(norm))
                fail(ErrorKind::Numeric, "degenerate rotation at iteration " + std::to_string(global));
            q.rotation /= norm;
        }
        if (observer) observer(global, lv, g);
    }
    return g;
}

}  // namespace gsedit
