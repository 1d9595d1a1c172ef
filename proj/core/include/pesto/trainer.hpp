#pragma once

#include "pesto/model.hpp"
#include "pesto/pairgen.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pesto {

/// Optimization settings. The learning-rate schedule is cosine annealing
/// to zero, applied per step.
struct TrainConfig {
    int batch_size = 256;
    double lr = 1e-4;
    int epochs = 50;
    double beta1 = 0.9, beta2 = 0.999;
    double eps_adam = 1e-8;
    std::uint64_t seed = 0;
    int checkpoint_every = 0; // epochs, 0 = off
    int log_every = 1;        // steps
    double grad_clip = 0.0;   // global-norm clip, 0 = off
    int frame_stride = 1;     // pool every n-th CQT frame

    void validate() const {
        if (batch_size < 1 || epochs < 1) throw ValidationError("train: bad batch/epochs");
        if (!(lr > 0.0)) throw ValidationError("train: lr must be positive");
        if (frame_stride < 1) throw ValidationError("train: frame_stride must be >= 1");
    }
    bool operator==(const TrainConfig&) const = default;
};

/// First/second moment buffers, one pair per parameter tensor.
struct AdamState {
    std::vector<std::vector<float>> m, v;
    std::uint64_t step = 0;

    void init(const ParamStore<float>& params);
    bool initialized() const { return !m.empty(); }
};

/// Bias-corrected Adam update at learning rate lr_t.
void adam_step(ParamStore<float>& params, AdamState& state, double lr_t,
               const TrainConfig& cfg);

/// Cosine annealing: lr * (1 + cos(pi * step / total_steps)) / 2.
double lr_at(std::uint64_t step, std::uint64_t total_steps, double lr0);

/// Pooled training frames (row-major, n_frames x bins). For background
/// mixing the complex vocal/background frames are carried instead.
struct TrainDataset {
    std::vector<float> frames;
    std::vector<std::complex<float>> vocals_cx, background_cx;
    int n_frames = 0;
    int bins = 0;

    bool mixed() const { return !vocals_cx.empty(); }
};

/// Concatenates every stride-th frame of each sequence.
TrainDataset pool_frames(const std::vector<CqtSequence>& seqs, int stride);
/// Paired variant for complex-mode vocal/background sequences.
TrainDataset pool_frames_mixed(const std::vector<CqtSequence>& vocals,
                               const std::vector<CqtSequence>& background, int stride);

struct TrainResult {
    std::uint64_t steps = 0;
    double first_loss = 0.0;
    double final_loss = 0.0;
    LossReport last;
};

/// Full optimization loop. Deterministic given (config seed, dataset,
/// start state): all randomness is derived from (seed, epoch, step), so a
/// checkpoint resume replays the exact remaining trajectory.
///
/// meta.loss carries the loss configuration (including ablation switches)
/// and meta.crop the cropping plan. Aborts with NumericalError on NaN loss
/// after dumping the offending batch next to the log.
TrainResult train(const TrainDataset& data, Network<float>& net, ModelMeta& meta,
                  const TrainConfig& cfg, const AugmentConfig& aug, AdamState& adam,
                  int start_epoch, std::ostream* log_csv,
                  const std::string& checkpoint_path = "");

/// Checkpoint = model file payload + "ADAM1" section (epoch, step, moment
/// buffers). Resume is bit-exact versus an uninterrupted run.
void save_checkpoint(const std::string& path, const Network<float>& net, const ModelMeta& meta,
                     const AdamState& adam, int epochs_done);

struct LoadedCheckpoint {
    Network<float> net;
    ModelMeta meta;
    AdamState adam;
    int epochs_done = 0;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace pesto
