// AdamW with decoupled weight decay, plus the learning-rate schedules used by
// both training stages (linear warmup into cosine decay, or constant).
#pragma once

#include "speechmap/tensor.hpp"

#include <cmath>
#include <vector>

namespace sm {

// ---------------------------------------------------------------- schedule

enum class schedule_mode { warmup_cosine, constant };

struct schedule_config {
    double base_lr = 1e-4;
    long warmup_steps = 0;
    long total_steps = 1;
    double initial_lr = 0.0;
    schedule_mode mode = schedule_mode::warmup_cosine;

    void validate() const {
        if (base_lr <= 0) throw config_error("schedule: base_lr must be positive");
        if (total_steps <= 0) throw config_error("schedule: total_steps must be positive");
        if (warmup_steps < 0 || warmup_steps > total_steps) {
            throw config_error("schedule: warmup_steps must be in [0, total_steps]");
        }
        if (initial_lr < 0 || initial_lr > base_lr) {
            throw config_error("schedule: initial_lr must be in [0, base_lr]");
        }
    }
};

inline double lr_at(long step, const schedule_config& cfg) {
    cfg.validate();
    if (step < 0 || step > cfg.total_steps) {
        throw range_error("lr_at: step outside [0, total_steps]");
    }
    if (cfg.mode == schedule_mode::constant) return cfg.base_lr;
    if (step < cfg.warmup_steps) {
        const double f = double(step) / double(cfg.warmup_steps);
        return cfg.initial_lr + f * (cfg.base_lr - cfg.initial_lr);
    }
    const long decay_span = cfg.total_steps - cfg.warmup_steps;
    if (decay_span == 0) return cfg.base_lr;
    const double f = double(step - cfg.warmup_steps) / double(decay_span);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * f));
}

// ---------------------------------------------------------------- adamw

template <class T>
class adamw {
public:
    adamw(std::vector<tensor<T>> params,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0)
        : params_(std::move(params)), beta1_(T(beta1)), beta2_(T(beta2)), eps_(T(eps)),
          weight_decay_(T(weight_decay)) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].numel(), T(0));
            v_[i].assign(params_[i].numel(), T(0));
        }
    }

    long step_count() const { return step_; }
    const std::vector<tensor<T>>& params() const { return params_; }
    std::vector<std::vector<T>>& moment1() { return m_; }
    std::vector<std::vector<T>>& moment2() { return v_; }
    void set_step_count(long s) { step_ = s; }

    void zero_grad() {
        for (auto& p : params_) {
            auto& g = p.grad();
            std::fill(g.begin(), g.end(), T(0));
        }
    }

    // global-norm gradient clipping; returns the pre-clip norm
    double clip_grad_norm(double max_norm) {
        double sq = 0.0;
        for (auto& p : params_) {
            for (const T g : p.grad()) sq += double(g) * double(g);
        }
        const double norm = std::sqrt(sq);
        if (norm > max_norm && norm > 0.0) {
            const T s = T(max_norm / norm);
            for (auto& p : params_) {
                for (T& g : p.grad()) g *= s;
            }
        }
        return norm;
    }

    // one AdamW update: m,v moments with bias correction, decoupled decay.
    // A non-finite gradient aborts before any state is touched.
    void step(double lr) {
        if (lr <= 0) throw argument_error("adamw::step: lr must be positive");
        for (auto& p : params_) {
            for (const T g : p.grad()) {
                if (!std::isfinite(double(g))) {
                    throw numeric_error("adamw::step: non-finite gradient, step aborted");
                }
            }
        }
        ++step_;
        const T bc1 = T(1) - T(std::pow(double(beta1_), double(step_)));
        const T bc2 = T(1) - T(std::pow(double(beta2_), double(step_)));
        const T lr_t = T(lr);
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].data();
            auto& g = params_[i].grad();
            auto& m = m_[i];
            auto& v = v_[i];
            const size_t n = p.size();
            #pragma omp parallel for schedule(static) if (n > 4096)
            for (long long j = 0; j < (long long)n; ++j) {
                m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
                const T mhat = m[j] / bc1;
                const T vhat = v[j] / bc2;
                p[j] -= lr_t * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * p[j]);
            }
        }
    }

private:
    std::vector<tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    T beta1_, beta2_, eps_, weight_decay_;
    long step_ = 0;
};

}  // namespace sm
