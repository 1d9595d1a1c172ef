#pragma once

#include "pesto/common.hpp"
#include "pesto/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

namespace pesto {

/// Dense value buffer of up to three dims (batch, channel, bin) with an
/// optional same-shape gradient buffer. Row-major, bin axis innermost.
template <class T>
struct Tensor {
    int b = 1, c = 1, f = 0;
    std::vector<T> v;
    std::vector<T> g;

    Tensor() = default;
    Tensor(int b_, int c_, int f_) { resize(b_, c_, f_); }

    std::size_t size() const { return std::size_t(b) * std::size_t(c) * std::size_t(f); }

    /// Reallocates (zero-filled) only when the total size changes; every op
    /// that calls this overwrites or explicitly clears its output.
    void resize(int b_, int c_, int f_) {
        const std::size_t old = v.size();
        b = b_; c = c_; f = f_;
        if (size() != old) {
            v.assign(size(), T(0));
            if (!g.empty()) g.assign(size(), T(0));
        }
    }

    /// Reinterpret dims without touching the data.
    void reshape(int b_, int c_, int f_) {
        if (std::size_t(b_) * std::size_t(c_) * std::size_t(f_) != v.size())
            throw ValidationError("Tensor::reshape: size mismatch");
        b = b_; c = c_; f = f_;
    }

    void alloc_grad() { g.assign(size(), T(0)); }
    void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }

    T* row(int bi, int ci) { return v.data() + (std::size_t(bi) * c + std::size_t(ci)) * f; }
    const T* row(int bi, int ci) const {
        return v.data() + (std::size_t(bi) * c + std::size_t(ci)) * f;
    }
    T* grow(int bi, int ci) { return g.data() + (std::size_t(bi) * c + std::size_t(ci)) * f; }
    const T* grow(int bi, int ci) const {
        return g.data() + (std::size_t(bi) * c + std::size_t(ci)) * f;
    }

    T& at(int bi, int ci, int fi) { return v[(std::size_t(bi) * c + ci) * f + fi]; }
    T at(int bi, int ci, int fi) const { return v[(std::size_t(bi) * c + ci) * f + fi]; }
};

/// Named parameters with gradients, iterated in registration order.
/// Backed by a deque so references handed out by add() stay valid.
template <class T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> t;
    };

    Tensor<T>& add(const std::string& name, int b, int c, int f) {
        for (const auto& e : entries_)
            if (e.name == name) throw ValidationError("ParamStore: duplicate name " + name);
        entries_.push_back({name, Tensor<T>(b, c, f)});
        entries_.back().t.alloc_grad();
        return entries_.back().t;
    }

    std::size_t size() const { return entries_.size(); }
    Entry& entry(std::size_t i) { return entries_[i]; }
    const Entry& entry(std::size_t i) const { return entries_[i]; }

    Tensor<T>* find(const std::string& name) {
        for (auto& e : entries_)
            if (e.name == name) return &e.t;
        return nullptr;
    }

    void zero_grads() {
        for (auto& e : entries_) e.t.zero_grad();
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.t.size();
        return n;
    }

private:
    std::deque<Entry> entries_;
};

/// Fixed-order 8-lane dot product. Deterministic independent of vector ISA
/// while still giving the compiler independent accumulators to vectorize.
template <class T>
T dot8(const T* a, const T* b, std::size_t n) {
    T s[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t j = 0; j < 8; ++j) s[j] += a[i + j] * b[i + j];
    T tail = T(0);
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7])) + tail;
}

namespace nn {

/// Same-padded cross-correlation along the bin axis.
/// x: (B, Ci, F), w: (Co, Ci, K) with K odd, bias: Co, out: (B, Co, F).
///
/// Works over zero-padded input rows so the inner loops are branch-free,
/// accumulating a register-resident chunk of outputs across every
/// (channel, tap) pair before a single store.
template <class T>
void conv1d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                    Tensor<T>& out, std::vector<T>* pad_scratch = nullptr) {
    const int B = x.b, ci_n = x.c, F = x.f;
    const int co_n = w.b, k = w.f;
    if (w.c != ci_n || bias.f != co_n || (k % 2) == 0)
        throw ValidationError("conv1d: shape mismatch");
    const int r = k / 2;
    out.resize(B, co_n, F);

    const int padF = F + k - 1;
    std::vector<T> local_pad;
    std::vector<T>& pad = pad_scratch ? *pad_scratch : local_pad;
    pad.assign(std::size_t(ci_n) * padF, T(0));

    constexpr int W = 32; // output chunk held in registers
    for (int bi = 0; bi < B; ++bi) {
        for (int ci = 0; ci < ci_n; ++ci) {
            const T* src = x.row(bi, ci);
            T* dst = pad.data() + std::size_t(ci) * padF;
            for (int i = 0; i < r; ++i) dst[i] = T(0);
            for (int i = 0; i < F; ++i) dst[r + i] = src[i];
            for (int i = 0; i < r; ++i) dst[r + F + i] = T(0);
        }
        for (int co = 0; co < co_n; ++co) {
            T* __restrict__ o = out.row(bi, co);
            const T bv = bias.v[std::size_t(co)];
            int fi0 = 0;
            for (; fi0 + W <= F; fi0 += W) {
                T acc[W];
                for (int j = 0; j < W; ++j) acc[j] = bv;
                for (int ci = 0; ci < ci_n; ++ci) {
                    const T* __restrict__ pr = pad.data() + std::size_t(ci) * padF + fi0;
                    const T* __restrict__ wr = w.row(co, ci);
                    for (int t = 0; t < k; ++t) {
                        const T wv = wr[t];
                        const T* __restrict__ xs = pr + t;
                        for (int j = 0; j < W; ++j) acc[j] += wv * xs[j];
                    }
                }
                for (int j = 0; j < W; ++j) o[fi0 + j] = acc[j];
            }
            if (fi0 < F) {
                const int n_tail = F - fi0;
                T acc[W];
                for (int j = 0; j < n_tail; ++j) acc[j] = bv;
                for (int ci = 0; ci < ci_n; ++ci) {
                    const T* __restrict__ pr = pad.data() + std::size_t(ci) * padF + fi0;
                    const T* __restrict__ wr = w.row(co, ci);
                    for (int t = 0; t < k; ++t) {
                        const T wv = wr[t];
                        const T* __restrict__ xs = pr + t;
                        for (int j = 0; j < n_tail; ++j) acc[j] += wv * xs[j];
                    }
                }
                for (int j = 0; j < n_tail; ++j) o[fi0 + j] = acc[j];
            }
        }
    }
}

/// Accumulates into w.g / bias.g; writes x-gradient into gx when non-null.
template <class T>
void conv1d_backward(const Tensor<T>& x, Tensor<T>& w, Tensor<T>& bias, const Tensor<T>& gout,
                     Tensor<T>* gx) {
    const int B = x.b, ci_n = x.c, F = x.f;
    const int co_n = w.b, k = w.f;
    const int r = k / 2;
    if (gx) {
        gx->resize(B, ci_n, F);
        std::fill(gx->v.begin(), gx->v.end(), T(0));
    }
    for (int bi = 0; bi < B; ++bi) {
        for (int co = 0; co < co_n; ++co) {
            const T* go = gout.row(bi, co);
            T acc = T(0);
            for (int fi = 0; fi < F; ++fi) acc += go[fi];
            bias.g[std::size_t(co)] += acc;
            for (int ci = 0; ci < ci_n; ++ci) {
                const T* xr = x.row(bi, ci);
                T* gw = w.grow(co, ci);
                T* gxr = gx ? &gx->v[(std::size_t(bi) * ci_n + ci) * F] : nullptr;
                for (int t = 0; t < k; ++t) {
                    const int shift = t - r;
                    const int f_lo = std::max(0, -shift);
                    const int f_hi = std::min(F, F - shift);
                    gw[t] += dot8(go + f_lo, xr + shift + f_lo, std::size_t(f_hi - f_lo));
                    if (gxr) {
                        const T wv = w.row(co, ci)[t];
                        T* gxs = gxr + shift;
                        for (int fi = f_lo; fi < f_hi; ++fi) gxs[fi] += wv * go[fi];
                    }
                }
            }
        }
    }
}

/// Normalizes jointly over (channel, bin) per sample; affine is one
/// gain/bias pair per channel so the bin axis stays translation-symmetric.
/// Caches the normalized values and inverse stddev for the backward pass.
template <class T>
void layernorm_forward(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps,
                       Tensor<T>& out, Tensor<T>* xhat, std::vector<T>* invstd) {
    const int B = x.b, C = x.c, F = x.f;
    if (gain.f != C || bias.f != C) throw ValidationError("layernorm: affine shape mismatch");
    const std::size_t m = std::size_t(C) * F;
    out.resize(B, C, F);
    if (xhat) xhat->resize(B, C, F);
    if (invstd) invstd->assign(std::size_t(B), T(0));
    for (int bi = 0; bi < B; ++bi) {
        const T* xs = x.row(bi, 0);
        T mean = T(0);
        for (std::size_t i = 0; i < m; ++i) mean += xs[i];
        mean /= T(m);
        T var = T(0);
        for (std::size_t i = 0; i < m; ++i) {
            const T d = xs[i] - mean;
            var += d * d;
        }
        var /= T(m);
        const T is = T(1) / std::sqrt(var + eps);
        if (invstd) (*invstd)[std::size_t(bi)] = is;
        for (int ci = 0; ci < C; ++ci) {
            const T* xr = x.row(bi, ci);
            T* o = out.row(bi, ci);
            T* xh = xhat ? xhat->row(bi, ci) : nullptr;
            const T gv = gain.v[std::size_t(ci)], bv = bias.v[std::size_t(ci)];
            for (int fi = 0; fi < F; ++fi) {
                const T h = (xr[fi] - mean) * is;
                if (xh) xh[fi] = h;
                o[fi] = gv * h + bv;
            }
        }
    }
}

template <class T>
void layernorm_backward(const Tensor<T>& xhat, const std::vector<T>& invstd, Tensor<T>& gain,
                        Tensor<T>& bias, const Tensor<T>& gout, Tensor<T>* gx) {
    const int B = xhat.b, C = xhat.c, F = xhat.f;
    const std::size_t m = std::size_t(C) * F;
    if (gx) {
        gx->resize(B, C, F);
        std::fill(gx->v.begin(), gx->v.end(), T(0));
    }
    for (int bi = 0; bi < B; ++bi) {
        for (int ci = 0; ci < C; ++ci) {
            const T* go = gout.row(bi, ci);
            const T* xh = xhat.row(bi, ci);
            T sg = T(0), sgx = T(0);
            for (int fi = 0; fi < F; ++fi) {
                sg += go[fi];
                sgx += go[fi] * xh[fi];
            }
            gain.g[std::size_t(ci)] += sgx;
            bias.g[std::size_t(ci)] += sg;
        }
        if (gx) {
            // dxhat_i = g_i * gain[c]; dx = invstd*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
            T s1 = T(0), s2 = T(0);
            for (int ci = 0; ci < C; ++ci) {
                const T* go = gout.row(bi, ci);
                const T* xh = xhat.row(bi, ci);
                const T gv = gain.v[std::size_t(ci)];
                for (int fi = 0; fi < F; ++fi) {
                    s1 += go[fi] * gv;
                    s2 += go[fi] * gv * xh[fi];
                }
            }
            s1 /= T(m);
            s2 /= T(m);
            const T is = invstd[std::size_t(bi)];
            for (int ci = 0; ci < C; ++ci) {
                const T* go = gout.row(bi, ci);
                const T* xh = xhat.row(bi, ci);
                T* gxr = gx->row(bi, ci);
                const T gv = gain.v[std::size_t(ci)];
                for (int fi = 0; fi < F; ++fi)
                    gxr[fi] = is * (go[fi] * gv - s1 - xh[fi] * s2);
            }
        }
    }
}

template <class T>
void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& out) {
    out.resize(x.b, x.c, x.f);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const T v = x.v[i];
        out.v[i] = v > T(0) ? v : slope * v;
    }
}

template <class T>
void leaky_relu_forward_inplace(Tensor<T>& x, T slope) {
    for (auto& v : x.v)
        if (v < T(0)) v *= slope;
}

/// `ref` may be either the pre-activation input or the activation output:
/// both carry the sign needed (derivative at exactly 0 is defined as 1).
template <class T>
void leaky_relu_backward(const Tensor<T>& ref, T slope, const Tensor<T>& gout, Tensor<T>& gx) {
    gx.resize(ref.b, ref.c, ref.f);
    for (std::size_t i = 0; i < ref.v.size(); ++i)
        gx.v[i] = gout.v[i] * (ref.v[i] < T(0) ? slope : T(1));
}

template <class T>
void leaky_relu_backward_inplace(const Tensor<T>& ref, T slope, Tensor<T>& grad) {
    for (std::size_t i = 0; i < ref.v.size(); ++i)
        if (ref.v[i] < T(0)) grad.v[i] *= slope;
}

inline bool dropout_keep(std::uint64_t key, std::size_t index, double rate) {
    return double(hash_mix(key, index) >> 11) * 0x1.0p-53 >= rate;
}

/// Inverted dropout; the mask is a pure function of (key, element index) so
/// the backward pass regenerates it instead of storing it.
template <class T>
void dropout_forward(const Tensor<T>& x, double rate, bool training, std::uint64_t key,
                     Tensor<T>& out) {
    if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout: rate must be in [0,1)");
    out.resize(x.b, x.c, x.f);
    if (!training || rate == 0.0) {
        out.v = x.v;
        return;
    }
    const T scale = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < x.v.size(); ++i)
        out.v[i] = dropout_keep(key, i, rate) ? x.v[i] * scale : T(0);
}

template <class T>
void dropout_forward_inplace(Tensor<T>& x, double rate, std::uint64_t key) {
    if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout: rate must be in [0,1)");
    if (rate == 0.0) return;
    const T scale = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < x.v.size(); ++i)
        x.v[i] = dropout_keep(key, i, rate) ? x.v[i] * scale : T(0);
}

template <class T>
void dropout_backward(double rate, bool training, std::uint64_t key, const Tensor<T>& gout,
                      Tensor<T>& gx) {
    gx.resize(gout.b, gout.c, gout.f);
    if (!training || rate == 0.0) {
        gx.v = gout.v;
        return;
    }
    const T scale = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < gout.v.size(); ++i)
        gx.v[i] = dropout_keep(key, i, rate) ? gout.v[i] * scale : T(0);
}

template <class T>
void dropout_backward_inplace(double rate, std::uint64_t key, Tensor<T>& grad) {
    if (rate == 0.0) return;
    const T scale = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < grad.v.size(); ++i)
        grad.v[i] = dropout_keep(key, i, rate) ? grad.v[i] * scale : T(0);
}

/// Bias-free linear layer whose implicit weight matrix A has constant
/// diagonals: A[i][j] = diag[n-1 + i - j], so out_i = sum_j A[i][j] x_j is a
/// correlation and the layer commutes with bin translation.
/// x: (B, 1, n), diag: m + n - 1 values, out: (B, 1, m).
template <class T>
void toeplitz_fc_forward(const Tensor<T>& x, const Tensor<T>& diag, int m, Tensor<T>& out) {
    const int B = x.b, n = x.c * x.f;
    if (diag.f != m + n - 1) throw ValidationError("toeplitz_fc: diagonal length mismatch");
    out.resize(B, 1, m);
    for (int bi = 0; bi < B; ++bi) {
        const T* xs = x.row(bi, 0);
        T* o = out.row(bi, 0);
        for (int i = 0; i < m; ++i) o[i] = T(0);
        for (int j = 0; j < n; ++j) {
            const T xv = xs[j];
            const T* ts = diag.v.data() + (n - 1 - j);
            for (int i = 0; i < m; ++i) o[i] += xv * ts[i];
        }
    }
}

template <class T>
void toeplitz_fc_backward(const Tensor<T>& x, Tensor<T>& diag, const Tensor<T>& gout,
                          Tensor<T>* gx) {
    const int B = x.b, n = x.c * x.f, m = gout.f;
    if (gx) {
        gx->resize(x.b, x.c, x.f);
        std::fill(gx->v.begin(), gx->v.end(), T(0));
    }
    for (int bi = 0; bi < B; ++bi) {
        const T* xs = x.row(bi, 0);
        const T* go = gout.row(bi, 0);
        T* gxr = gx ? gx->v.data() + std::size_t(bi) * n : nullptr;
        for (int j = 0; j < n; ++j) {
            const T* ts = diag.v.data() + (n - 1 - j);
            if (gxr) gxr[j] += dot8(go, ts, std::size_t(m));
            T* gts = diag.g.data() + (n - 1 - j);
            const T xv = xs[j];
            for (int i = 0; i < m; ++i) gts[i] += xv * go[i];
        }
    }
}

/// Dense bias-free linear layer (the non-Toeplitz ablation).
/// w: (1, m, n) rows are output units.
template <class T>
void dense_forward(const Tensor<T>& x, const Tensor<T>& w, Tensor<T>& out) {
    const int B = x.b, n = x.c * x.f, m = w.c;
    if (w.f != n) throw ValidationError("dense: shape mismatch");
    out.resize(B, 1, m);
    for (int bi = 0; bi < B; ++bi) {
        const T* xs = x.row(bi, 0);
        T* o = out.row(bi, 0);
        for (int i = 0; i < m; ++i) o[i] = dot8(w.row(0, i), xs, std::size_t(n));
    }
}

template <class T>
void dense_backward(const Tensor<T>& x, Tensor<T>& w, const Tensor<T>& gout, Tensor<T>* gx) {
    const int B = x.b, n = x.c * x.f, m = w.c;
    if (gx) {
        gx->resize(x.b, x.c, x.f);
        std::fill(gx->v.begin(), gx->v.end(), T(0));
    }
    for (int bi = 0; bi < B; ++bi) {
        const T* xs = x.row(bi, 0);
        const T* go = gout.row(bi, 0);
        T* gxr = gx ? gx->v.data() + std::size_t(bi) * n : nullptr;
        for (int i = 0; i < m; ++i) {
            const T gv = go[i];
            T* gw = w.grow(0, i);
            const T* wr = w.row(0, i);
            for (int j = 0; j < n; ++j) {
                gw[j] += gv * xs[j];
                if (gxr) gxr[j] += gv * wr[j];
            }
        }
    }
}

/// Rowwise max-subtracted softmax over the bin axis.
template <class T>
void softmax_forward(const Tensor<T>& x, Tensor<T>& out) {
    out.resize(x.b, x.c, x.f);
    for (int bi = 0; bi < x.b; ++bi) {
        for (int ci = 0; ci < x.c; ++ci) {
            const T* xr = x.row(bi, ci);
            T* o = out.row(bi, ci);
            T mx = xr[0];
            for (int fi = 1; fi < x.f; ++fi) mx = std::max(mx, xr[fi]);
            T sum = T(0);
            for (int fi = 0; fi < x.f; ++fi) {
                o[fi] = std::exp(xr[fi] - mx);
                sum += o[fi];
            }
            const T inv = T(1) / sum;
            for (int fi = 0; fi < x.f; ++fi) o[fi] *= inv;
        }
    }
}

/// gx_i = p_i * (g_i - sum_j p_j g_j)
template <class T>
void softmax_backward(const Tensor<T>& probs, const Tensor<T>& gout, Tensor<T>& gx) {
    gx.resize(probs.b, probs.c, probs.f);
    for (int bi = 0; bi < probs.b; ++bi) {
        for (int ci = 0; ci < probs.c; ++ci) {
            const T* p = probs.row(bi, ci);
            const T* go = gout.row(bi, ci);
            T* gxr = gx.row(bi, ci);
            T dot = T(0);
            for (int fi = 0; fi < probs.f; ++fi) dot += p[fi] * go[fi];
            for (int fi = 0; fi < probs.f; ++fi) gxr[fi] = p[fi] * (go[fi] - dot);
        }
    }
}

/// Uniform init in +-sqrt(1/fan_in).
template <class T>
void init_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / double(fan_in));
    for (auto& v : t.v) v = T(rng.uniform(-bound, bound));
}

} // namespace nn
} // namespace pesto
