// pesto: self-supervised monophonic pitch estimator.
//
// Subcommands: synth, train, calibrate, infer, eval.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical abort.

#include <CLI11.hpp>

#include "pesto/config.hpp"
#include "pesto/eval.hpp"
#include "pesto/pitch.hpp"
#include "pesto/plot.hpp"
#include "pesto/threadpool.hpp"
#include "pesto/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pesto;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_config_flags(CLI::App* app, ConfigArgs& args) {
    app->add_option("--config", args.config_path, "Run configuration JSON");
    app->add_option("--override", args.overrides,
                    "Config override, section.key=value (repeatable)");
    app->add_option("--seed", args.seed, "Seed applied to all sections")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

RunConfig resolve_config(const ConfigArgs& args) {
    RunConfig cfg = args.config_path.empty() ? default_config() : load_config(args.config_path);
    for (const auto& ov : args.overrides) apply_override(cfg, ov);
    if (args.seed_set) {
        cfg.seed = args.seed;
        cfg.train.seed = args.seed;
        cfg.synth.seed = args.seed;
    }
    return cfg;
}

std::vector<fs::path> list_wavs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw FormatError("data directory not found: " + dir);
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

AudioClip load_at_rate(const fs::path& path, int rate) {
    AudioClip clip = load_wav(path.string());
    return clip.sample_rate == rate ? clip : resample(clip, rate);
}

std::optional<PitchAnnotation> sibling_annotation(const fs::path& wav) {
    fs::path csv = wav;
    csv.replace_extension(".csv");
    if (fs::exists(csv)) return load_annotations(csv.string(), AnnotationFormat::time_freq_csv);
    fs::path pv = wav;
    pv.replace_extension(".pv");
    if (fs::exists(pv)) return load_annotations(pv.string(), AnnotationFormat::mir1k_pv);
    return std::nullopt;
}

int cmd_synth(const ConfigArgs& cargs, const std::string& out_dir) {
    RunConfig cfg;
    try {
        cfg = resolve_config(cargs);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        fs::create_directories(out_dir);
        const auto data = synth_dataset(cfg.synth);
        for (const auto& [clip, ann] : data) {
            const fs::path base = fs::path(out_dir) / clip.id;
            save_wav(base.string() + ".wav", clip);
            save_annotations(base.string() + ".csv", ann);
        }
        std::cout << "wrote " << data.size() << " clips to " << out_dir << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }
}

int cmd_train(const ConfigArgs& cargs, const std::string& data_dir, const std::string& out_path,
              const std::string& background_dir, const std::string& resume_path, int threads) {
    RunConfig cfg;
    try {
        cfg = resolve_config(cargs);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    TrainDataset dataset;
    try {
        const auto wavs = list_wavs(data_dir);
        if (wavs.empty()) throw FormatError("no .wav files in " + data_dir);
        const bool mixing = cfg.augment.beta_mode != BetaMode::none;
        CqtConfig cqt_cfg = cfg.cqt;
        cqt_cfg.scale = mixing ? CqtScale::cplx : CqtScale::db;
        CqtAnalyzer analyzer(cqt_cfg);

        std::vector<CqtSequence> seqs(wavs.size());
        parallel_for(wavs.size(), threads, [&](std::size_t i) {
            seqs[i] = analyzer.forward(load_at_rate(wavs[i], cqt_cfg.sample_rate));
        });
        if (mixing) {
            if (background_dir.empty())
                throw FormatError("background mixing enabled but --background not given");
            std::vector<CqtSequence> bgs(wavs.size());
            parallel_for(wavs.size(), threads, [&](std::size_t i) {
                const fs::path bg = fs::path(background_dir) / wavs[i].filename();
                bgs[i] = analyzer.forward(load_at_rate(bg, cqt_cfg.sample_rate));
            });
            dataset = pool_frames_mixed(seqs, bgs, cfg.train.frame_stride);
        } else {
            dataset = pool_frames(seqs, cfg.train.frame_stride);
        }
        std::cout << "pooled " << dataset.n_frames << " frames from " << wavs.size()
                  << " clips\n";
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }

    try {
        Network<float> net(cfg.model);
        ModelMeta meta;
        meta.cqt = cfg.cqt;
        meta.cqt.scale = CqtScale::db;
        meta.crop = cfg.crop;
        meta.loss = cfg.loss;
        meta.fingerprint = config_fingerprint(cfg);
        AdamState adam;
        int start_epoch = 0;

        if (!resume_path.empty()) {
            LoadedCheckpoint ck = load_checkpoint(resume_path);
            net = std::move(ck.net);
            meta = ck.meta;
            adam = std::move(ck.adam);
            start_epoch = ck.epochs_done;
            std::cout << "resumed from " << resume_path << " at epoch " << start_epoch << '\n';
        } else {
            net.init_params(cfg.train.seed);
        }

        const std::string log_path =
            cfg.io.log_path.empty() ? out_path + ".log.csv" : cfg.io.log_path;
        std::ofstream log(log_path, start_epoch > 0 ? std::ios::app : std::ios::out);
        const std::string ckpt =
            cfg.train.checkpoint_every > 0 ? out_path + ".ckpt" : std::string();

        const TrainResult res =
            train(dataset, net, meta, cfg.train, cfg.augment, adam, start_epoch, &log, ckpt);
        std::cout << "trained " << res.steps << " steps, loss " << res.first_loss << " -> "
                  << res.final_loss << '\n';

        const auto calib_set = synth_dataset(cfg.synth);
        const Calibration cal = calibrate(net, calib_set, meta.cqt, meta.crop.k_max);
        meta.p0 = cal.p0;
        std::cout << "calibrated p0=" << cal.p0 << " residual IQR " << cal.residual_iqr_bins
                  << " bins over " << cal.n_frames << " frames\n";

        save_model(out_path, net, meta);
        std::cout << "wrote " << out_path << " (" << param_count(cfg.model) << " params), log "
                  << log_path << '\n';
        return 0;
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}

int cmd_calibrate(const ConfigArgs& cargs, const std::string& model_path) {
    RunConfig cfg;
    try {
        cfg = resolve_config(cargs);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        LoadedModel lm = load_model(model_path);
        const auto calib_set = synth_dataset(cfg.synth);
        const Calibration cal = calibrate(lm.net, calib_set, lm.meta.cqt, lm.meta.crop.k_max);
        lm.meta.p0 = cal.p0;
        save_model(model_path, lm.net, lm.meta);
        std::cout << "p0=" << cal.p0 << " residual_median=" << cal.residual_median_bins
                  << " bins residual_iqr=" << cal.residual_iqr_bins << " bins n_frames="
                  << cal.n_frames << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}

int cmd_infer(const std::string& model_path, const std::string& audio_path,
              const std::string& out_csv, const std::string& plot_path, double conf_floor,
              bool parabolic) {
    try {
        const LoadedModel lm = load_model(model_path);
        const AudioClip clip = load_at_rate(audio_path, lm.meta.cqt.sample_rate);
        Calibration cal;
        cal.p0 = lm.meta.p0;
        cal.bins_per_semitone = lm.meta.cqt.bins_per_semitone;
        InferOptions opts;
        opts.confidence_floor = conf_floor;
        opts.parabolic = parabolic;

        const CqtSequence seq = cqt_forward(clip, lm.meta.cqt);
        const PitchTrack track = infer_sequence(lm.net, cal, seq, lm.meta.crop.k_max, opts);
        write_pitch_csv(out_csv, track);
        if (!plot_path.empty()) write_track_svg(plot_path, seq, track);
        std::cout << "wrote " << track.times.size() << " frames to " << out_csv << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}

std::vector<double> parse_snr_list(const std::string& spec) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto comma = spec.find(',', pos);
        const std::string tok = spec.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (tok == "clean" || tok == "inf")
            out.push_back(std::numeric_limits<double>::infinity());
        else if (!tok.empty())
            out.push_back(std::stod(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir,
             const std::string& out_json, const std::string& out_csv, const std::string& snr_spec,
             bool show_ablation, double max_gap_s) {
    try {
        const LoadedModel lm = load_model(model_path);
        Calibration cal;
        cal.p0 = lm.meta.p0;
        cal.bins_per_semitone = lm.meta.cqt.bins_per_semitone;

        if (show_ablation) {
            const auto& l = lm.meta.loss;
            std::cout << "loss terms at train time: inv=" << (l.enable_inv ? "on" : "off")
                      << " equiv=" << (l.enable_equiv ? "on" : "off")
                      << " sce=" << (l.enable_sce ? "on" : "off")
                      << " weighting=" << (l.grad_balanced ? "grad_balanced" : "fixed") << '\n';
        }

        if (!snr_spec.empty()) {
            const fs::path vocal_dir = fs::path(data_dir) / "vocals";
            const fs::path bg_dir = fs::path(data_dir) / "background";
            std::vector<StemPair> pairs;
            for (const auto& wav : list_wavs(vocal_dir.string())) {
                auto ann = sibling_annotation(wav);
                if (!ann) continue;
                StemPair sp;
                sp.vocals = load_at_rate(wav, lm.meta.cqt.sample_rate);
                sp.background = load_at_rate(bg_dir / wav.filename(), lm.meta.cqt.sample_rate);
                sp.truth = *ann;
                pairs.push_back(std::move(sp));
            }
            if (pairs.empty()) throw FormatError("no annotated stem pairs in " + data_dir);
            const auto sweep = snr_sweep(lm.net, cal, pairs, parse_snr_list(snr_spec),
                                         lm.meta.cqt, lm.meta.crop.k_max, max_gap_s);
            std::cout << "snr_db,rpa,rca,n_voiced\n";
            for (const auto& [snr, rep] : sweep) {
                if (std::isinf(snr)) std::cout << "clean";
                else std::cout << snr;
                std::cout << ',' << rep.rpa << ',' << rep.rca << ',' << rep.n_voiced << '\n';
            }
            if (!out_json.empty()) {
                nlohmann::json rows = nlohmann::json::array();
                for (const auto& [snr, rep] : sweep)
                    rows.push_back({{"snr_db", std::isinf(snr) ? -1.0 : snr},
                                    {"rpa", rep.rpa},
                                    {"rca", rep.rca},
                                    {"n_voiced", rep.n_voiced}});
                std::ofstream f(out_json);
                f << rows.dump(2) << '\n';
            }
            return 0;
        }

        std::vector<std::pair<AudioClip, PitchAnnotation>> data;
        for (const auto& wav : list_wavs(data_dir)) {
            auto ann = sibling_annotation(wav);
            if (!ann) continue;
            data.emplace_back(load_at_rate(wav, lm.meta.cqt.sample_rate), std::move(*ann));
        }
        if (data.empty()) throw FormatError("no annotated clips in " + data_dir);
        EvalReport rep = evaluate_clips(lm.net, cal, data, lm.meta.cqt, lm.meta.crop.k_max,
                                        max_gap_s);
        rep.fingerprint = lm.meta.fingerprint;
        std::cout << "rpa=" << rep.rpa << " rca=" << rep.rca << " n_voiced=" << rep.n_voiced
                  << " over " << rep.per_clip.size() << " clips\n";
        if (!out_json.empty()) write_eval_report_json(out_json, rep);
        if (!out_csv.empty()) write_eval_report_csv(out_csv, rep);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-supervised monophonic pitch estimator"};
    app.require_subcommand(1);
    int threads = default_thread_count();
    app.add_option("--threads", threads, "Thread cap for parallel sections");

    ConfigArgs synth_cfg;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic harmonic dataset");
    add_config_flags(synth_cmd, synth_cfg);
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();

    ConfigArgs train_cfg;
    std::string train_data, train_out, train_bg, train_resume;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a directory of WAV files");
    add_config_flags(train_cmd, train_cfg);
    train_cmd->add_option("--data", train_data, "Directory of training WAVs")->required();
    train_cmd->add_option("--out", train_out, "Output model path")->required();
    train_cmd->add_option("--background", train_bg,
                          "Directory of paired background WAVs (beta mixing)");
    train_cmd->add_option("--resume", train_resume, "Checkpoint to resume from");

    ConfigArgs cal_cfg;
    std::string cal_model;
    auto* cal_cmd = app.add_subcommand("calibrate", "Recompute p0 on synthetic data");
    add_config_flags(cal_cmd, cal_cfg);
    cal_cmd->add_option("--model", cal_model, "Model file to recalibrate")->required();

    std::string infer_model, infer_audio, infer_out, infer_plot;
    double infer_floor = 0.0;
    bool infer_parabolic = false;
    auto* infer_cmd = app.add_subcommand("infer", "Extract a pitch track from audio");
    infer_cmd->add_option("--model", infer_model, "Model file")->required();
    infer_cmd->add_option("--audio", infer_audio, "Input WAV")->required();
    infer_cmd->add_option("--out", infer_out, "Output CSV (time,frequency,confidence)")
        ->required();
    infer_cmd->add_option("--plot", infer_plot, "Optional SVG overlay of track on CQT");
    infer_cmd->add_option("--confidence-floor", infer_floor,
                          "Mark frames below this max-probability as unvoiced");
    infer_cmd->add_flag("--parabolic", infer_parabolic, "Sub-bin refinement over log-probs");

    std::string eval_model, eval_data, eval_json, eval_csv, eval_snr;
    bool eval_ablation = false;
    double eval_gap = 0.005;
    auto* eval_cmd = app.add_subcommand("eval", "Raw pitch / chroma accuracy over a dataset");
    eval_cmd->add_option("--model", eval_model, "Model file")->required();
    eval_cmd->add_option("--data", eval_data,
                         "Directory of WAVs with sibling .csv/.pv annotations")
        ->required();
    eval_cmd->add_option("--out", eval_json, "Report JSON path");
    eval_cmd->add_option("--csv", eval_csv, "Per-clip CSV path");
    eval_cmd->add_option("--snr", eval_snr,
                         "SNR sweep list, e.g. clean,20,10,0 (needs vocals/ + background/)");
    eval_cmd->add_flag("--ablation", eval_ablation, "Echo loss-term flags from the model header");
    eval_cmd->add_option("--max-gap", eval_gap, "Truth alignment gap in seconds");

    CLI11_PARSE(app, argc, argv);

    if (synth_cmd->parsed()) return cmd_synth(synth_cfg, synth_out);
    if (train_cmd->parsed())
        return cmd_train(train_cfg, train_data, train_out, train_bg, train_resume, threads);
    if (cal_cmd->parsed()) return cmd_calibrate(cal_cfg, cal_model);
    if (infer_cmd->parsed())
        return cmd_infer(infer_model, infer_audio, infer_out, infer_plot, infer_floor,
                         infer_parabolic);
    if (eval_cmd->parsed())
        return cmd_eval(eval_model, eval_data, eval_json, eval_csv, eval_snr, eval_ablation,
                        eval_gap);
    return 1;
}
