#pragma once

#include "pesto/common.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace pesto {

/// Loss weighting and term switches. Each term can be disabled
/// individually for ablation runs.
struct LossConfig {
    double alpha = std::pow(2.0, 1.0 / 36.0);
    double tau = 0.1;
    bool grad_balanced = false; // fixed lambdas unless set
    double lambda_inv = 1.0, lambda_equiv = 1.0, lambda_sce = 1.0;
    bool enable_inv = true, enable_equiv = true, enable_sce = true;

    void validate() const {
        if (!(alpha > 1.0)) throw ValidationError("loss: alpha must be > 1");
        if (!(tau > 0.0)) throw ValidationError("loss: tau must be > 0");
        if (lambda_inv < 0.0 || lambda_equiv < 0.0 || lambda_sce < 0.0)
            throw ValidationError("loss: fixed weights must be >= 0");
        if (!enable_inv && !enable_equiv && !enable_sce)
            throw ValidationError("loss: all terms disabled");
    }
    bool operator==(const LossConfig&) const = default;
};

/// Per-step loss values and the weights actually applied.
struct LossReport {
    double total = 0.0;
    double inv = 0.0, equiv = 0.0, sce = 0.0;
    double lam_inv = 0.0, lam_equiv = 0.0, lam_sce = 0.0;
};

inline constexpr double kEpsLog = 1e-12;   // clamp inside every log
inline constexpr double kEpsPhi = 1e-12;   // guard on the phi ratio denominator

/// out[i+k] = y[i] on valid targets, vacated positions zero; mass shifted
/// outside [0, d) is dropped.
template <class T>
void shift_distribution(const T* y, int d, int k, T* out) {
    if (k >= d || -k >= d) throw ValidationError("shift_distribution: |k| >= d");
    for (int i = 0; i < d; ++i) out[i] = T(0);
    for (int i = 0; i < d; ++i) {
        const int j = i + k;
        if (j >= 0 && j < d) out[j] = y[i];
    }
}

template <class T>
std::vector<T> shift_distribution(const std::vector<T>& y, int k) {
    std::vector<T> out(y.size());
    shift_distribution(y.data(), int(y.size()), k, out.data());
    return out;
}

/// phi(y) = sum_i alpha^(i+1) y_i; maps a k-transposition to an alpha^k
/// factor.
template <class T>
T phi(const T* y, int d, T alpha) {
    T p = alpha, acc = T(0);
    for (int i = 0; i < d; ++i) {
        acc += p * y[i];
        p *= alpha;
    }
    return acc;
}

template <class T>
T phi(const std::vector<T>& y, T alpha) {
    return phi(y.data(), int(y.size()), alpha);
}

/// Quadratic inside [-tau, tau], linear outside, C1 at the joint.
template <class T>
T huber(T x, T tau) {
    const T a = std::abs(x);
    if (a <= tau) return x * x / T(2);
    return tau * tau / T(2) + tau * (a - tau);
}

template <class T>
T huber_deriv(T x, T tau) {
    if (x > tau) return tau;
    if (x < -tau) return -tau;
    return x;
}

/// h_tau( phi(y_k)/phi(y) - alpha^k ).
template <class T>
T loss_equiv(const T* y, const T* yk, int d, int k, T alpha, T tau) {
    const T py = phi(y, d, alpha) + T(kEpsPhi);
    const T pk = phi(yk, d, alpha);
    const T target = std::pow(alpha, T(k));
    return huber(pk / py - target, tau);
}

/// Accumulates scale * d(loss)/d(y) and scale * d(loss)/d(yk).
template <class T>
void loss_equiv_grad(const T* y, const T* yk, int d, int k, T alpha, T tau, T scale, T* gy,
                     T* gyk) {
    const T py = phi(y, d, alpha) + T(kEpsPhi);
    const T pk = phi(yk, d, alpha);
    const T target = std::pow(alpha, T(k));
    const T h = huber_deriv(pk / py - target, tau) * scale;
    const T dyk = h / py;
    const T dy = -h * pk / (py * py);
    T p = alpha;
    for (int i = 0; i < d; ++i) {
        gy[i] += dy * p;
        gyk[i] += dyk * p;
        p *= alpha;
    }
}

/// Shifted cross-entropy: -sum_i y_i log(yk_{i+k}); out-of-range indices
/// contribute zero. Written negated so it is non-negative and minimized at
/// the exact k-transposition.
template <class T>
T loss_sce(const T* y, const T* yk, int d, int k) {
    T acc = T(0);
    for (int i = 0; i < d; ++i) {
        const int j = i + k;
        if (j < 0 || j >= d) continue;
        acc -= y[i] * std::log(std::max(yk[j], T(kEpsLog)));
    }
    return acc;
}

template <class T>
void loss_sce_grad(const T* y, const T* yk, int d, int k, T scale, T* gy, T* gyk) {
    for (int i = 0; i < d; ++i) {
        const int j = i + k;
        if (j < 0 || j >= d) continue;
        const T q = std::max(yk[j], T(kEpsLog));
        gy[i] -= scale * std::log(q);
        if (yk[j] > T(kEpsLog)) gyk[j] -= scale * y[i] / q;
    }
}

/// Plain cross-entropy between two distributions.
template <class T>
T loss_inv(const T* y, const T* yt, int d) {
    T acc = T(0);
    for (int i = 0; i < d; ++i) acc -= y[i] * std::log(std::max(yt[i], T(kEpsLog)));
    return acc;
}

template <class T>
void loss_inv_grad(const T* y, const T* yt, int d, T scale, T* gy, T* gyt) {
    for (int i = 0; i < d; ++i) {
        const T q = std::max(yt[i], T(kEpsLog));
        gy[i] -= scale * std::log(q);
        if (yt[i] > T(kEpsLog)) gyt[i] -= scale * y[i] / q;
    }
}

template <class T>
T entropy(const T* y, int d) {
    return loss_inv(y, y, d);
}

/// Combines per-term values into the weighted total. In grad_balanced mode
/// the weights are ratios of the geometric-mean gradient norm to each
/// term's norm (measured by the caller at the last shared parameter
/// tensor, passed as grad_norms[3]), clamped to [1e-2, 1e2] and treated as
/// constants.
inline LossReport combine(double inv, double equiv, double sce, const double* grad_norms,
                          const LossConfig& cfg) {
    cfg.validate();
    LossReport r;
    r.inv = cfg.enable_inv ? inv : 0.0;
    r.equiv = cfg.enable_equiv ? equiv : 0.0;
    r.sce = cfg.enable_sce ? sce : 0.0;

    double lam[3] = {cfg.lambda_inv, cfg.lambda_equiv, cfg.lambda_sce};
    if (cfg.grad_balanced) {
        if (grad_norms == nullptr)
            throw ValidationError("combine: grad_balanced mode needs per-term gradient norms");
        const bool on[3] = {cfg.enable_inv, cfg.enable_equiv, cfg.enable_sce};
        constexpr double eps_w = 1e-12;
        double log_sum = 0.0;
        int n_on = 0;
        for (int i = 0; i < 3; ++i) {
            if (!on[i]) continue;
            log_sum += std::log(grad_norms[i] + eps_w);
            ++n_on;
        }
        const double g_ref = std::exp(log_sum / double(n_on));
        for (int i = 0; i < 3; ++i) {
            if (!on[i]) continue;
            const double l = g_ref / (grad_norms[i] + eps_w);
            lam[i] = std::min(1e2, std::max(1e-2, l));
        }
    }
    r.lam_inv = cfg.enable_inv ? lam[0] : 0.0;
    r.lam_equiv = cfg.enable_equiv ? lam[1] : 0.0;
    r.lam_sce = cfg.enable_sce ? lam[2] : 0.0;
    r.total = r.lam_inv * r.inv + r.lam_equiv * r.equiv + r.lam_sce * r.sce;
    return r;
}

} // namespace pesto
