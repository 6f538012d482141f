#include "gsedit/oracle.hpp"

#include <cmath>
#include <string>

namespace gsedit {

NoiseSchedule NoiseSchedule::linear() {
    NoiseSchedule s;
    s.alpha_bars_.resize(kNumTimesteps + 1);
    s.alpha_bars_[0] = 1.0;
    const double beta_start = 1e-4, beta_end = 2e-2;
    for (int t = 1; t <= kNumTimesteps; ++t) {
        const double beta = beta_start + (beta_end - beta_start) * (t - 1) / (kNumTimesteps - 1);
        s.alpha_bars_[t] = s.alpha_bars_[t - 1] * (1.0 - beta);
    }
    return s;
}

NoiseSchedule NoiseSchedule::from_alpha_bars(const std::vector<double>& alpha_bars) {
    if (alpha_bars.size() != static_cast<std::size_t>(kNumTimesteps))
        fail(ErrorKind::Oracle, "alpha_bars table must have " + std::to_string(kNumTimesteps) + " entries, got " +
                                    std::to_string(alpha_bars.size()));
    NoiseSchedule s;
    s.alpha_bars_.reserve(kNumTimesteps + 1);
    s.alpha_bars_.push_back(1.0);
    for (double a : alpha_bars) {
        const bool first = s.alpha_bars_.size() == 1;
        if (!(a > 0.0 && (first ? a <= 1.0 : a < s.alpha_bars_.back())))
            fail(ErrorKind::Oracle, "alpha_bars must be strictly decreasing within (0, 1]");
        s.alpha_bars_.push_back(a);
    }
    return s;
}

double NoiseSchedule::alpha_bar(int t) const {
    require(t >= 0 && t <= kNumTimesteps, "timestep " + std::to_string(t) + " outside [0, 1000]");
    return alpha_bars_[t];
}

Tensor add_noise(const Tensor& signal, int t, const Tensor& eps, const NoiseSchedule& schedule) {
    require(signal.same_shape(eps), "add_noise: signal and noise shapes differ");
    const double ab = schedule.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    Tensor out = signal;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * signal.data[i] + b * eps.data[i];
    return out;
}

}  // namespace gsedit
