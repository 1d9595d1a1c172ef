// Microbenchmarks for the inference-rate and training-step budgets.
// xRT counters are relative to 16 kHz audio at the 10 ms hop (100 frames
// per second of audio).

#include <benchmark/benchmark.h>

#include "pesto/config.hpp"
#include "pesto/losses.hpp"
#include "pesto/model.hpp"
#include "pesto/pitch.hpp"
#include "pesto/trainer.hpp"

#include <cmath>

using namespace pesto;

namespace {

AudioClip sine_clip(double f0, double seconds, int rate) {
    AudioClip clip;
    clip.sample_rate = rate;
    clip.id = "bench";
    const std::size_t n = std::size_t(seconds * rate);
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        clip.samples[i] = float(0.5 * std::sin(2.0 * M_PI * f0 * double(i) / rate));
    return clip;
}

Network<float> default_net() {
    RunConfig cfg = default_config();
    Network<float> net(cfg.model);
    net.init_params(7);
    return net;
}

void BM_ModelForwardFrame(benchmark::State& state) {
    RunConfig cfg = default_config();
    Network<float> net = default_net();
    Workspace<float> ws;
    Tensor<float> in(1, 1, cfg.model.in_bins);
    Rng rng(5);
    for (auto& v : in.v) v = float(rng.gaussian());
    for (auto _ : state) {
        const auto& probs = net.forward(in, false, 0, ws);
        benchmark::DoNotOptimize(probs.v.data());
    }
    state.counters["frames_per_s"] =
        benchmark::Counter(double(state.iterations()), benchmark::Counter::kIsRate);
    state.counters["xRT"] =
        benchmark::Counter(double(state.iterations()) / 100.0, benchmark::Counter::kIsRate);
}
BENCHMARK(BM_ModelForwardFrame)->Unit(benchmark::kMicrosecond);

void BM_CqtSecond(benchmark::State& state) {
    RunConfig cfg = default_config();
    CqtAnalyzer analyzer(cfg.cqt);
    const AudioClip clip = sine_clip(440.0, 1.0, cfg.cqt.sample_rate);
    for (auto _ : state) {
        const CqtSequence seq = analyzer.forward(clip);
        benchmark::DoNotOptimize(seq.db.data());
    }
    state.counters["xRT"] =
        benchmark::Counter(double(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_CqtSecond)->Unit(benchmark::kMillisecond);

void BM_InferSecond(benchmark::State& state) {
    RunConfig cfg = default_config();
    Network<float> net = default_net();
    CqtAnalyzer analyzer(cfg.cqt);
    const AudioClip clip = sine_clip(440.0, 1.0, cfg.cqt.sample_rate);
    Calibration cal;
    cal.bins_per_semitone = cfg.cqt.bins_per_semitone;
    for (auto _ : state) {
        const CqtSequence seq = analyzer.forward(clip);
        const PitchTrack track = infer_sequence(net, cal, seq, cfg.crop.k_max);
        benchmark::DoNotOptimize(track.pitch_hz.data());
    }
    state.counters["xRT"] =
        benchmark::Counter(double(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_InferSecond)->Unit(benchmark::kMillisecond);

void BM_ToeplitzForward(benchmark::State& state) {
    const int n = int(state.range(0)), m = 265;
    Tensor<float> x(1, 1, n), diag(1, 1, m + n - 1), out;
    Rng rng(11);
    for (auto& v : x.v) v = float(rng.gaussian());
    for (auto& v : diag.v) v = float(rng.gaussian());
    for (auto _ : state) {
        nn::toeplitz_fc_forward(x, diag, m, out);
        benchmark::DoNotOptimize(out.v.data());
    }
}
BENCHMARK(BM_ToeplitzForward)->Arg(1060)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
    RunConfig cfg = default_config();
    cfg.train.batch_size = int(state.range(0));
    cfg.train.epochs = 1;
    cfg.train.seed = 123;
    Network<float> net = default_net();
    ModelMeta meta{cfg.cqt, cfg.crop, cfg.loss, 0, ""};

    // One batch worth of synthetic frames.
    Rng rng(3);
    TrainDataset ds;
    ds.bins = cfg.crop.input_bins;
    ds.n_frames = cfg.train.batch_size;
    ds.frames.resize(std::size_t(ds.n_frames) * ds.bins);
    for (auto& v : ds.frames) v = float(-80.0 + 20.0 * rng.gaussian());

    AdamState adam;
    adam.init(net.params());
    for (auto _ : state) {
        TrainResult r = train(ds, net, meta, cfg.train, cfg.augment, adam, 0, nullptr);
        benchmark::DoNotOptimize(r.final_loss);
    }
    state.counters["steps_per_s"] =
        benchmark::Counter(double(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_TrainStep)->Arg(256)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
