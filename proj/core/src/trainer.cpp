#include "pesto/trainer.hpp"

#include "pesto/losses.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

namespace pesto {

namespace {
// Stream salts for derived generators.
constexpr std::uint64_t kShuffleStream = 0x53485546ULL;
constexpr std::uint64_t kBatchStream = 0x42415443ULL;
constexpr std::uint64_t kDropStream = 0x44524f50ULL;
} // namespace

void AdamState::init(const ParamStore<float>& params) {
    m.assign(params.size(), {});
    v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params.entry(i).t.size(), 0.0f);
        v[i].assign(params.entry(i).t.size(), 0.0f);
    }
    step = 0;
}

void adam_step(ParamStore<float>& params, AdamState& state, double lr_t,
               const TrainConfig& cfg) {
    if (!state.initialized()) throw ValidationError("adam_step: state not initialized");
    state.step += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, double(state.step));
    const double bc2 = 1.0 - std::pow(b2, double(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& t = params.entry(p).t;
        if (t.g.size() != t.v.size())
            throw ValidationError("adam_step: missing gradient for " + params.entry(p).name);
        float* m = state.m[p].data();
        float* v = state.v[p].data();
        for (std::size_t i = 0; i < t.v.size(); ++i) {
            const double g = t.g[i];
            const double mi = b1 * m[i] + (1.0 - b1) * g;
            const double vi = b2 * v[i] + (1.0 - b2) * g * g;
            m[i] = float(mi);
            v[i] = float(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            t.v[i] = float(t.v[i] - lr_t * mhat / (std::sqrt(vhat) + cfg.eps_adam));
        }
    }
}

double lr_at(std::uint64_t step, std::uint64_t total_steps, double lr0) {
    if (total_steps == 0) return lr0;
    const double frac = double(step) / double(total_steps);
    return lr0 * (1.0 + std::cos(M_PI * frac)) / 2.0;
}

TrainDataset pool_frames(const std::vector<CqtSequence>& seqs, int stride) {
    if (stride < 1) throw ValidationError("pool_frames: stride must be >= 1");
    TrainDataset ds;
    if (seqs.empty()) return ds;
    ds.bins = seqs.front().config.n_bins;
    for (const auto& s : seqs) {
        if (s.config.scale != CqtScale::db)
            throw ValidationError("pool_frames: sequences must be dB mode");
        if (s.config.n_bins != ds.bins) throw ValidationError("pool_frames: bin count mismatch");
        for (int t = 0; t < s.n_frames; t += stride) {
            const float* fr = s.frame(t);
            ds.frames.insert(ds.frames.end(), fr, fr + ds.bins);
            ++ds.n_frames;
        }
    }
    return ds;
}

TrainDataset pool_frames_mixed(const std::vector<CqtSequence>& vocals,
                               const std::vector<CqtSequence>& background, int stride) {
    if (vocals.size() != background.size())
        throw ValidationError("pool_frames_mixed: unpaired sequences");
    TrainDataset ds;
    if (vocals.empty()) return ds;
    ds.bins = vocals.front().config.n_bins;
    for (std::size_t ci = 0; ci < vocals.size(); ++ci) {
        const auto& v = vocals[ci];
        const auto& b = background[ci];
        if (v.config.scale != CqtScale::cplx || b.config.scale != CqtScale::cplx)
            throw ValidationError("pool_frames_mixed: sequences must be complex mode");
        const int n = std::min(v.n_frames, b.n_frames);
        for (int t = 0; t < n; t += stride) {
            ds.vocals_cx.insert(ds.vocals_cx.end(), v.cframe(t), v.cframe(t) + ds.bins);
            ds.background_cx.insert(ds.background_cx.end(), b.cframe(t), b.cframe(t) + ds.bins);
            ++ds.n_frames;
        }
    }
    return ds;
}

namespace {

void dump_batch(const std::string& path, const TrainBatch& tb, std::uint64_t step) {
    std::ofstream f(path, std::ios::binary);
    if (!f) return;
    f.write("PNAN", 4);
    const std::uint64_t s = step;
    const std::uint32_t b = std::uint32_t(tb.batch), fbins = std::uint32_t(tb.out_bins);
    f.write(reinterpret_cast<const char*>(&s), 8);
    f.write(reinterpret_cast<const char*>(&b), 4);
    f.write(reinterpret_cast<const char*>(&fbins), 4);
    auto wr = [&](const std::vector<float>& v) {
        f.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 4));
    };
    wr(tb.x);
    wr(tb.x_aug);
    wr(tb.x_shift_aug);
    f.write(reinterpret_cast<const char*>(tb.k.data()), std::streamsize(tb.k.size() * 4));
}

void fill_input(Tensor<float>& t, const std::vector<float>& rows, int batch, int bins) {
    t.resize(batch, 1, bins);
    std::memcpy(t.v.data(), rows.data(), std::size_t(batch) * bins * sizeof(float));
}

double grad_norm(const Tensor<float>& t) {
    double acc = 0.0;
    for (float g : t.g) acc += double(g) * double(g);
    return std::sqrt(acc);
}

struct StepContext {
    Workspace<float> ws_y, ws_t, ws_k;
    Tensor<float> in_y, in_t, in_k;
    Tensor<float> gy, gt, gk;
};

/// Per-term raw (unweighted) mean losses over the batch.
struct TermValues {
    double inv = 0.0, equiv = 0.0, sce = 0.0;
};

TermValues term_values(const TrainBatch& tb, const Workspace<float>& ws_y,
                       const Workspace<float>& ws_t, const Workspace<float>& ws_k,
                       const LossConfig& lc) {
    TermValues tv;
    const int d = ws_y.probs.f;
    for (int i = 0; i < tb.batch; ++i) {
        const float* y = ws_y.probs.row(i, 0);
        const float* yt = ws_t.probs.row(i, 0);
        const float* yk = ws_k.probs.row(i, 0);
        if (lc.enable_inv) tv.inv += loss_inv(y, yt, d);
        if (lc.enable_equiv)
            tv.equiv += loss_equiv(yt, yk, d, tb.k[std::size_t(i)], float(lc.alpha), float(lc.tau));
        if (lc.enable_sce) tv.sce += loss_sce(yt, yk, d, tb.k[std::size_t(i)]);
    }
    tv.inv /= tb.batch;
    tv.equiv /= tb.batch;
    tv.sce /= tb.batch;
    return tv;
}

/// Accumulates d(term)/d(probs) into gy/gt/gk with per-term weights.
void term_grads(const TrainBatch& tb, const Workspace<float>& ws_y, const Workspace<float>& ws_t,
                const Workspace<float>& ws_k, const LossConfig& lc, double w_inv, double w_equiv,
                double w_sce, Tensor<float>& gy, Tensor<float>& gt, Tensor<float>& gk) {
    const int d = ws_y.probs.f;
    gy.resize(tb.batch, 1, d);
    gt.resize(tb.batch, 1, d);
    gk.resize(tb.batch, 1, d);
    std::fill(gy.v.begin(), gy.v.end(), 0.0f);
    std::fill(gt.v.begin(), gt.v.end(), 0.0f);
    std::fill(gk.v.begin(), gk.v.end(), 0.0f);
    const float si = float(w_inv / tb.batch);
    const float se = float(w_equiv / tb.batch);
    const float ss = float(w_sce / tb.batch);
    for (int i = 0; i < tb.batch; ++i) {
        const float* y = ws_y.probs.row(i, 0);
        const float* yt = ws_t.probs.row(i, 0);
        const float* yk = ws_k.probs.row(i, 0);
        const int k = tb.k[std::size_t(i)];
        if (lc.enable_inv && w_inv != 0.0)
            loss_inv_grad(y, yt, d, si, gy.row(i, 0), gt.row(i, 0));
        if (lc.enable_equiv && w_equiv != 0.0)
            loss_equiv_grad(yt, yk, d, k, float(lc.alpha), float(lc.tau), se, gt.row(i, 0),
                            gk.row(i, 0));
        if (lc.enable_sce && w_sce != 0.0)
            loss_sce_grad(yt, yk, d, k, ss, gt.row(i, 0), gk.row(i, 0));
    }
}

} // namespace

TrainResult train(const TrainDataset& data, Network<float>& net, ModelMeta& meta,
                  const TrainConfig& cfg, const AugmentConfig& aug, AdamState& adam,
                  int start_epoch, std::ostream* log_csv, const std::string& checkpoint_path) {
    cfg.validate();
    meta.loss.validate();
    meta.crop.validate();
    if (data.n_frames < 1) throw ValidationError("train: empty dataset");
    if (data.bins != meta.crop.input_bins)
        throw ValidationError("train: dataset bins != crop.input_bins");
    if (!adam.initialized()) adam.init(net.params());

    const int B = cfg.batch_size;
    const std::uint64_t steps_per_epoch = std::uint64_t((data.n_frames + B - 1) / B);
    const std::uint64_t total_steps = steps_per_epoch * std::uint64_t(cfg.epochs);
    const LossConfig& lc = meta.loss;
    Tensor<float>* fc = net.params().find(net.config().toeplitz ? "fc.diag" : "fc.w");

    StepContext ctx;
    std::vector<int> order(std::size_t(data.n_frames));
    std::vector<float> rows;
    TrainResult result;
    bool have_first = false;

    if (log_csv && start_epoch == 0)
        *log_csv << "step,total,inv,equiv,sce,lambda_inv,lambda_equiv,lambda_sce\n";

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        for (int i = 0; i < data.n_frames; ++i) order[std::size_t(i)] = i;
        Rng shuffle_rng = Rng::keyed(cfg.seed, {kShuffleStream, std::uint64_t(epoch)});
        shuffle_rng.shuffle(order);

        for (std::uint64_t s = 0; s < steps_per_epoch; ++s) {
            const int lo = int(s) * B;
            const int hi = std::min(data.n_frames, lo + B);
            const int nb = hi - lo;

            Rng batch_rng = Rng::keyed(cfg.seed, {kBatchStream, std::uint64_t(epoch), s});
            TrainBatch tb;
            if (data.mixed()) {
                std::vector<std::complex<float>> vrows(std::size_t(nb) * data.bins);
                std::vector<std::complex<float>> brows(std::size_t(nb) * data.bins);
                for (int i = 0; i < nb; ++i) {
                    const int src = order[std::size_t(lo + i)];
                    std::memcpy(&vrows[std::size_t(i) * data.bins],
                                &data.vocals_cx[std::size_t(src) * data.bins],
                                std::size_t(data.bins) * sizeof(std::complex<float>));
                    std::memcpy(&brows[std::size_t(i) * data.bins],
                                &data.background_cx[std::size_t(src) * data.bins],
                                std::size_t(data.bins) * sizeof(std::complex<float>));
                }
                tb = make_batch_mixed(vrows.data(), brows.data(), nb, aug, meta.crop, batch_rng);
            } else {
                rows.resize(std::size_t(nb) * data.bins);
                for (int i = 0; i < nb; ++i) {
                    const int src = order[std::size_t(lo + i)];
                    std::memcpy(&rows[std::size_t(i) * data.bins],
                                &data.frames[std::size_t(src) * data.bins],
                                std::size_t(data.bins) * sizeof(float));
                }
                tb = make_batch(rows.data(), nb, aug, meta.crop, batch_rng);
            }

            const std::uint64_t dk =
                hash_mix(hash_mix(cfg.seed, kDropStream), std::uint64_t(epoch) * 1000003ULL + s);
            fill_input(ctx.in_y, tb.x, nb, tb.out_bins);
            fill_input(ctx.in_t, tb.x_aug, nb, tb.out_bins);
            fill_input(ctx.in_k, tb.x_shift_aug, nb, tb.out_bins);
            net.forward(ctx.in_y, true, hash_mix(dk, 1), ctx.ws_y);
            net.forward(ctx.in_t, true, hash_mix(dk, 2), ctx.ws_t);
            net.forward(ctx.in_k, true, hash_mix(dk, 3), ctx.ws_k);

            const TermValues tv = term_values(tb, ctx.ws_y, ctx.ws_t, ctx.ws_k, lc);

            double norms[3] = {0.0, 0.0, 0.0};
            if (lc.grad_balanced) {
                // One extra backward per enabled term to measure gradient
                // norms at the last shared parameter tensor.
                const bool on[3] = {lc.enable_inv, lc.enable_equiv, lc.enable_sce};
                for (int term = 0; term < 3; ++term) {
                    if (!on[term]) continue;
                    net.params().zero_grads();
                    term_grads(tb, ctx.ws_y, ctx.ws_t, ctx.ws_k, lc, term == 0 ? 1.0 : 0.0,
                               term == 1 ? 1.0 : 0.0, term == 2 ? 1.0 : 0.0, ctx.gy, ctx.gt,
                               ctx.gk);
                    if (term == 0) net.backward(ctx.gy, ctx.ws_y);
                    net.backward(ctx.gt, ctx.ws_t);
                    if (term != 0) net.backward(ctx.gk, ctx.ws_k);
                    norms[term] = grad_norm(*fc);
                }
            }

            const LossReport report = combine(tv.inv, tv.equiv, tv.sce,
                                              lc.grad_balanced ? norms : nullptr, lc);
            if (!std::isfinite(report.total)) {
                const std::string dump = "pesto_nan_batch.bin";
                dump_batch(dump, tb, adam.step + 1);
                throw NumericalError("train: non-finite loss at step " +
                                     std::to_string(adam.step + 1) + "; batch dumped to " + dump);
            }
            if (!have_first) {
                result.first_loss = report.total;
                have_first = true;
            }

            net.params().zero_grads();
            term_grads(tb, ctx.ws_y, ctx.ws_t, ctx.ws_k, lc, report.lam_inv, report.lam_equiv,
                       report.lam_sce, ctx.gy, ctx.gt, ctx.gk);
            net.backward(ctx.gy, ctx.ws_y);
            net.backward(ctx.gt, ctx.ws_t);
            net.backward(ctx.gk, ctx.ws_k);

            if (cfg.grad_clip > 0.0) {
                double total = 0.0;
                auto& st = net.params();
                for (std::size_t p = 0; p < st.size(); ++p) {
                    const auto& g = st.entry(p).t.g;
                    for (float gv : g) total += double(gv) * double(gv);
                }
                total = std::sqrt(total);
                if (total > cfg.grad_clip) {
                    const float sc = float(cfg.grad_clip / total);
                    for (std::size_t p = 0; p < st.size(); ++p)
                        for (float& gv : st.entry(p).t.g) gv *= sc;
                }
            }

            const double lr_t = lr_at(adam.step, total_steps, cfg.lr);
            adam_step(net.params(), adam, lr_t, cfg);

            result.last = report;
            result.final_loss = report.total;
            result.steps = adam.step;
            if (log_csv && (adam.step % std::uint64_t(std::max(1, cfg.log_every)) == 0)) {
                *log_csv << adam.step << ',' << report.total << ',' << report.inv << ','
                         << report.equiv << ',' << report.sce << ',' << report.lam_inv << ','
                         << report.lam_equiv << ',' << report.lam_sce << '\n';
            }
        }

        if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs)
            save_checkpoint(checkpoint_path, net, meta, adam, epoch + 1);
    }
    return result;
}

namespace {
constexpr char kAdamMagic[5] = {'A', 'D', 'A', 'M', '1'};
}

void save_checkpoint(const std::string& path, const Network<float>& net, const ModelMeta& meta,
                     const AdamState& adam, int epochs_done) {
    save_model(path, net, meta);
    std::ofstream f(path, std::ios::binary | std::ios::app);
    if (!f) throw FormatError("save_checkpoint: cannot append to " + path);
    f.write(kAdamMagic, 5);
    const std::uint32_t ep = std::uint32_t(epochs_done);
    f.write(reinterpret_cast<const char*>(&ep), 4);
    f.write(reinterpret_cast<const char*>(&adam.step), 8);
    for (std::size_t p = 0; p < adam.m.size(); ++p) {
        f.write(reinterpret_cast<const char*>(adam.m[p].data()),
                std::streamsize(adam.m[p].size() * 4));
        f.write(reinterpret_cast<const char*>(adam.v[p].data()),
                std::streamsize(adam.v[p].size() * 4));
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    LoadedModel lm = load_model(path);
    LoadedCheckpoint out{std::move(lm.net), std::move(lm.meta), {}, 0};

    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("load_checkpoint: cannot open " + path);
    // Skip past the model payload: magic(6) + version(4) + hlen(8) + header + tensors.
    f.seekg(10);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::uint64_t payload = 0;
    const auto& store = out.net.params();
    for (std::size_t p = 0; p < store.size(); ++p) payload += store.entry(p).t.size() * 4;
    f.seekg(std::streamoff(18 + hlen + payload));

    char magic[5];
    if (!f.read(magic, 5) || std::memcmp(magic, kAdamMagic, 5) != 0)
        throw FormatError("load_checkpoint: missing optimizer section in " + path);
    std::uint32_t ep = 0;
    if (!f.read(reinterpret_cast<char*>(&ep), 4))
        throw FormatError("load_checkpoint: truncated optimizer section");
    out.epochs_done = int(ep);
    out.adam.init(store);
    if (!f.read(reinterpret_cast<char*>(&out.adam.step), 8))
        throw FormatError("load_checkpoint: truncated optimizer section");
    for (std::size_t p = 0; p < out.adam.m.size(); ++p) {
        if (!f.read(reinterpret_cast<char*>(out.adam.m[p].data()),
                    std::streamsize(out.adam.m[p].size() * 4)) ||
            !f.read(reinterpret_cast<char*>(out.adam.v[p].data()),
                    std::streamsize(out.adam.v[p].size() * 4)))
            throw FormatError("load_checkpoint: truncated moment buffers");
    }
    return out;
}

} // namespace pesto
