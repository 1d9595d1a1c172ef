#pragma once

#include "pesto/cqt.hpp"
#include "pesto/losses.hpp"
#include "pesto/pairgen.hpp"
#include "pesto/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pesto {

/// Architecture plan: layer-norm, two residual preprocessing convs, four
/// further convs (leaky-ReLU + dropout between conv layers), then a flatten
/// and a Toeplitz (or dense, for ablation) projection to out_dim classes
/// under a softmax. All kernels are odd / same-padded so the bin resolution
/// is never reduced.
struct ModelConfig {
    int in_bins = 265;
    std::vector<int> conv_channels = {8, 8, 8, 8, 4, 4}; // 2 preprocessing + 4 main
    std::vector<int> kernel_sizes = {15, 15, 25, 9, 9, 5};
    int out_dim = 265;
    double dropout = 0.2;
    double leaky_slope = 0.3;
    bool toeplitz = true;

    void validate() const {
        if (in_bins < 1 || out_dim < 1) throw ValidationError("model: bad sizes");
        if (conv_channels.size() != 6 || kernel_sizes.size() != 6)
            throw ValidationError("model: need 6 conv channel counts and 6 kernel sizes");
        for (int k : kernel_sizes)
            if (k < 1 || k % 2 == 0)
                throw ValidationError("model: kernel sizes must be odd (same padding)");
        for (int c : conv_channels)
            if (c < 1) throw ValidationError("model: channel counts must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("model: dropout in [0,1)");
    }

    int receptive_field() const {
        int rf = 1;
        for (int k : kernel_sizes) rf += k - 1;
        return rf;
    }

    bool operator==(const ModelConfig&) const = default;
};

/// Exact number of scalars in the parameter store for a config.
std::size_t param_count(const ModelConfig& cfg);

/// Reusable forward/backward buffers; one per concurrent caller.
template <class T>
struct Workspace {
    Tensor<T> ln_out, ln_xhat;
    std::vector<T> ln_invstd;
    Tensor<T> block[6];
    Tensor<T> scratch;
    Tensor<T> logits, probs;
    Tensor<T> g_a, g_b, g_c;
    bool training = false;
    std::uint64_t dropout_key = 0;
};

template <class T>
class Network {
public:
    explicit Network(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        auto& ch = cfg_.conv_channels;
        ln_gain_ = &store_.add("ln.gain", 1, 1, 1);
        ln_bias_ = &store_.add("ln.bias", 1, 1, 1);
        for (int l = 0; l < 6; ++l) {
            const int ci = l == 0 ? 1 : ch[std::size_t(l - 1)];
            const int co = ch[std::size_t(l)];
            const int k = cfg_.kernel_sizes[std::size_t(l)];
            const std::string base = "conv" + std::to_string(l);
            w_[l] = &store_.add(base + ".w", co, ci, k);
            b_[l] = &store_.add(base + ".b", 1, 1, co);
            if (l < 2 && ci != co) {
                pw_[l] = &store_.add(base + ".proj.w", co, ci, 1);
                pb_[l] = &store_.add(base + ".proj.b", 1, 1, co);
            }
        }
        const int n_flat = ch[5] * cfg_.in_bins;
        if (cfg_.toeplitz) {
            fc_ = &store_.add("fc.diag", 1, 1, cfg_.out_dim + n_flat - 1);
        } else {
            fc_ = &store_.add("fc.w", 1, cfg_.out_dim, n_flat);
        }
    }

    // Holds pointers into its own store; movable but not copyable.
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    void init_params(std::uint64_t seed) {
        auto& ch = cfg_.conv_channels;
        for (auto& v : ln_gain_->v) v = T(1);
        for (auto& v : ln_bias_->v) v = T(0);
        std::size_t idx = 0;
        for (int l = 0; l < 6; ++l) {
            const int ci = l == 0 ? 1 : ch[std::size_t(l - 1)];
            const int k = cfg_.kernel_sizes[std::size_t(l)];
            Rng rng = Rng::keyed(seed, {0x494e4954ULL, idx++});
            nn::init_uniform(*w_[l], ci * k, rng);
            std::fill(b_[l]->v.begin(), b_[l]->v.end(), T(0));
            if (pw_[l]) {
                Rng prng = Rng::keyed(seed, {0x494e4954ULL, idx++});
                nn::init_uniform(*pw_[l], ci, prng);
                std::fill(pb_[l]->v.begin(), pb_[l]->v.end(), T(0));
            }
        }
        Rng frng = Rng::keyed(seed, {0x494e4954ULL, idx++});
        nn::init_uniform(*fc_, ch[5] * cfg_.in_bins, frng);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }

    /// x: (B, 1, in_bins). Returns ws.probs, each row a distribution.
    /// Training mode applies dropout with masks derived from dropout_key.
    const Tensor<T>& forward(const Tensor<T>& x, bool training, std::uint64_t dropout_key,
                             Workspace<T>& ws) const {
        if (x.f != cfg_.in_bins || x.c != 1)
            throw ValidationError("model forward: expected (B,1," + std::to_string(cfg_.in_bins) +
                                  ") input");
        ws.training = training;
        ws.dropout_key = dropout_key;
        nn::layernorm_forward(x, *ln_gain_, *ln_bias_, T(kLnEps), ws.ln_out, &ws.ln_xhat,
                              &ws.ln_invstd);
        const Tensor<T>* cur = &ws.ln_out;
        for (int l = 0; l < 6; ++l) {
            Tensor<T>& out = ws.block[l];
            nn::conv1d_forward(*cur, *w_[l], *b_[l], out);
            if (l < 2) {
                if (pw_[l]) {
                    nn::conv1d_forward(*cur, *pw_[l], *pb_[l], ws.scratch);
                    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += ws.scratch.v[i];
                } else {
                    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += cur->v[i];
                }
            }
            if (l < 5) {
                nn::leaky_relu_forward_inplace(out, T(cfg_.leaky_slope));
                if (training && cfg_.dropout > 0.0)
                    nn::dropout_forward_inplace(out, cfg_.dropout, hash_mix(dropout_key, std::uint64_t(l)));
            }
            cur = &out;
        }
        if (cfg_.toeplitz)
            nn::toeplitz_fc_forward(ws.block[5], *fc_, cfg_.out_dim, ws.logits);
        else
            nn::dense_forward(ws.block[5], *fc_, ws.logits);
        nn::softmax_forward(ws.logits, ws.probs);
        return ws.probs;
    }

    /// Accumulates parameter gradients from dL/dprobs. Must follow a
    /// forward() on the same workspace.
    void backward(const Tensor<T>& gprobs, Workspace<T>& ws) {
        nn::softmax_backward(ws.probs, gprobs, ws.g_a);
        Tensor<T>* g = &ws.g_b;
        if (cfg_.toeplitz)
            nn::toeplitz_fc_backward(ws.block[5], *fc_, ws.g_a, g);
        else
            nn::dense_backward(ws.block[5], *fc_, ws.g_a, g);
        g->reshape(ws.block[5].b, ws.block[5].c, ws.block[5].f); // flat -> (B,C,F)

        Tensor<T>* gnext = &ws.g_c;
        for (int l = 5; l >= 0; --l) {
            if (l < 5) {
                if (ws.training && cfg_.dropout > 0.0)
                    nn::dropout_backward_inplace(cfg_.dropout,
                                                 hash_mix(ws.dropout_key, std::uint64_t(l)), *g);
                nn::leaky_relu_backward_inplace(ws.block[l], T(cfg_.leaky_slope), *g);
            }
            const Tensor<T>& input = l == 0 ? ws.ln_out : ws.block[l - 1];
            nn::conv1d_backward(input, *w_[l], *b_[l], *g, gnext);
            if (l < 2) {
                if (pw_[l]) {
                    nn::conv1d_backward(input, *pw_[l], *pb_[l], *g, &ws.g_a);
                    for (std::size_t i = 0; i < gnext->v.size(); ++i)
                        gnext->v[i] += ws.g_a.v[i];
                } else {
                    for (std::size_t i = 0; i < gnext->v.size(); ++i) gnext->v[i] += g->v[i];
                }
            }
            std::swap(g, gnext);
        }
        nn::layernorm_backward(ws.ln_xhat, ws.ln_invstd, *ln_gain_, *ln_bias_, *g,
                               static_cast<Tensor<T>*>(nullptr));
    }

    static constexpr double kLnEps = 1e-5;

private:
    ModelConfig cfg_;
    ParamStore<T> store_;
    Tensor<T>* ln_gain_ = nullptr;
    Tensor<T>* ln_bias_ = nullptr;
    Tensor<T>* w_[6] = {};
    Tensor<T>* b_[6] = {};
    Tensor<T>* pw_[6] = {};
    Tensor<T>* pb_[6] = {};
    Tensor<T>* fc_ = nullptr;
};

/// Everything the model file carries besides the weights.
struct ModelMeta {
    CqtConfig cqt;
    CropConfig crop;
    LossConfig loss; // ablation switches used at training time
    int p0 = 0;
    std::string fingerprint;
};

/// "PESTO1" magic, version, canonical-JSON header (model/cqt/crop/loss
/// configs, p0, training fingerprint), then little-endian f32 tensors in
/// parameter-store order. save -> load -> save is byte-identical.
void save_model(const std::string& path, const Network<float>& net, const ModelMeta& meta);

struct LoadedModel {
    Network<float> net;
    ModelMeta meta;
};
LoadedModel load_model(const std::string& path);

} // namespace pesto
