#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wavebeat/data.hpp"
#include "wavebeat/decode.hpp"
#include "wavebeat/errors.hpp"
#include "wavebeat/metrics.hpp"
#include "wavebeat/signal.hpp"
#include "wavebeat/trainer.hpp"

namespace fs = std::filesystem;
using namespace wavebeat;

namespace {

std::string track_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "track_%03d", index);
    return buf;
}

struct SynthArgs {
    std::string out_dir;
    int tracks{8};
    std::uint64_t seed{0};
    std::string tempo_range{"80:160"};
    std::string meter{"both"};
    double duration{12.0};
};

int run_synth(const SynthArgs& args) {
    const auto colon = args.tempo_range.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--tempo-range expects LO:HI");
    const double lo = std::stod(args.tempo_range.substr(0, colon));
    const double hi = std::stod(args.tempo_range.substr(colon + 1));
    if (!(lo >= 40 && hi <= 300 && lo <= hi))
        throw CLI::ValidationError("--tempo-range must lie within 40:300");

    fs::create_directories(args.out_dir);
    std::ofstream manifest(fs::path(args.out_dir) / "manifest.txt");
    if (!manifest) throw DataError("cannot write to " + args.out_dir);
    for (int i = 0; i < args.tracks; ++i) {
        Rng rng = Rng::stream(args.seed, static_cast<std::uint64_t>(i), 0x53796eULL);
        const double tempo = rng.uniform(lo, hi);
        int beats_per_bar = 4;
        if (args.meter == "3")
            beats_per_bar = 3;
        else if (args.meter == "both")
            beats_per_bar = rng.uniform() < 0.5 ? 3 : 4;
        const auto timbre = rng.next_u64();
        auto [audio, ann] = synth_click_track(tempo, beats_per_bar, args.duration, timbre);
        const std::string stem = track_name(i);
        write_wav_16bit((fs::path(args.out_dir) / (stem + ".wav")).string(), audio);
        save_annotations((fs::path(args.out_dir) / (stem + ".beats")).string(), ann);
        manifest << stem << ".wav\t" << stem << ".beats\n";
    }
    std::cout << "wrote " << args.tracks << " tracks to " << args.out_dir << "\n";
    return 0;
}

struct TrainArgs {
    std::string manifest;
    std::string out_dir;
    std::string preset{"desk"};
    std::string config_file;
    std::string model_config_file;
    std::string val_manifest;
    std::uint64_t seed{0};
    bool seed_set{false};
    int epochs{-1};
    int batch_size{-1};
    int excerpts{-1};
    std::int64_t excerpt_length{-1};
    double lr{-1};
    int workers{-1};
};

int run_train(const TrainArgs& args) {
    TrainConfig cfg = args.preset == "paper" ? paper_train_config() : desk_train_config();
    ModelConfig model_cfg =
        args.preset == "paper" ? paper_model_config() : desk_model_config();
    if (!args.config_file.empty()) cfg = train_config_from_file(args.config_file);
    if (!args.model_config_file.empty())
        model_cfg = model_config_from_file(args.model_config_file);
    if (args.seed_set) cfg.seed = args.seed;
    if (args.epochs >= 0) cfg.epochs = args.epochs;
    if (args.batch_size > 0) cfg.batch_size = args.batch_size;
    if (args.excerpts > 0) cfg.excerpts_per_dataset_per_epoch = args.excerpts;
    if (args.excerpt_length > 0)
        cfg.excerpt_length = static_cast<std::size_t>(args.excerpt_length);
    if (args.lr > 0) cfg.lr = args.lr;
    if (args.workers >= 0) cfg.workers = args.workers;

    const auto groups = load_manifest(args.manifest);
    if (groups.empty()) throw DataError("manifest lists no tracks: " + args.manifest);

    std::vector<DatasetGroup> train_groups;
    std::vector<TrackRef> val_refs;
    if (!args.val_manifest.empty()) {
        train_groups = groups;
        for (const auto& g : load_manifest(args.val_manifest))
            val_refs.insert(val_refs.end(), g.tracks.begin(), g.tracks.end());
    } else {
        auto split = split_manifest(groups, cfg.seed);
        train_groups = std::move(split.train);
        val_refs = std::move(split.val);
        fs::create_directories(args.out_dir);
        std::ofstream held(fs::path(args.out_dir) / "test_tracks.txt");
        for (const auto& t : split.test)
            held << t.audio_path << '\t' << t.annotation_path << '\n';
    }
    if (val_refs.empty()) throw DataError("no validation tracks available");

    std::vector<LoadedDataset> datasets;
    for (const auto& g : train_groups) {
        LoadedDataset set{g.label, {}};
        for (const auto& t : g.tracks)
            set.tracks.push_back(load_track(t, fs::path(t.audio_path).stem().string()));
        if (!set.tracks.empty()) datasets.push_back(std::move(set));
    }
    std::vector<LoadedTrack> val_tracks;
    for (const auto& t : val_refs)
        val_tracks.push_back(load_track(t, fs::path(t.audio_path).stem().string()));

    auto model = WaveBeatModel::build(model_cfg, cfg.seed);
    std::cout << "training: " << datasets.size() << " dataset(s), " << val_tracks.size()
              << " validation track(s), " << cfg.epochs << " epochs\n";
    const auto result = train(model, datasets, val_tracks, cfg, args.out_dir,
                              [](const EpochStats& row) {
                                  std::cout << "epoch " << row.epoch << ": loss "
                                            << row.train_loss << ", val beat F " << row.val_beat_f
                                            << ", val downbeat F " << row.val_downbeat_f
                                            << ", lr " << row.lr << std::endl;
                              });
    train_config_to_file(cfg, (fs::path(args.out_dir) / "train_config.txt").string());
    std::cout << "best validation score " << result.best_score << ", checkpoint "
              << result.checkpoint_path << "\n";
    return 0;
}

struct PredictArgs {
    std::string model;
    std::string input;
    std::string decoder{"peak"};
    std::string out;
    std::string dump_activations;
};

int run_predict(const PredictArgs& args) {
    auto model = load_model(args.model);
    model.eval();
    const Waveform audio = load_audio(args.input);
    const ActivationMatrix act = infer_activations(model, audio);

    if (!args.dump_activations.empty()) {
        std::ofstream out(args.dump_activations, std::ios::binary);
        if (!out) throw DataError("cannot write activations: " + args.dump_activations);
        const double rate = act.frame_rate;
        const std::uint64_t frames = act.n_frames();
        out.write(reinterpret_cast<const char*>(&rate), sizeof(rate));
        out.write(reinterpret_cast<const char*>(&frames), sizeof(frames));
        out.write(reinterpret_cast<const char*>(act.values.data()),
                  static_cast<std::streamsize>(act.values.numel() * sizeof(float)));
    }

    const BeatSequence seq = args.decoder == "dbn" ? dbn_decode(act) : peak_pick(act);
    save_annotations(args.out, to_annotation(seq));
    std::cout << seq.beats.size() << " beats (" << seq.downbeats.size() << " downbeats) -> "
              << args.out << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string pred_dir;
    std::string ref_dir;
    std::string csv;
    bool skip_first_5s{false};
};

BeatAnnotation maybe_skip(BeatAnnotation ann, bool skip) {
    if (!skip) return ann;
    BeatAnnotation out;
    for (const auto& e : ann.events)
        if (e.time >= 5.0) out.events.push_back(e);
    return out;
}

int run_evaluate(const EvaluateArgs& args) {
    std::map<std::string, BeatAnnotation> refs;
    for (const auto& entry : fs::directory_iterator(args.ref_dir))
        if (entry.path().extension() == ".beats")
            refs[entry.path().stem().string()] =
                maybe_skip(load_annotations(entry.path().string()), args.skip_first_5s);
    if (refs.empty())
        throw DataError("no .beats files in reference directory " + args.ref_dir);

    std::map<std::string, BeatSequence> preds;
    for (const auto& [stem, unused] : refs) {
        (void)unused;
        const auto path = fs::path(args.pred_dir) / (stem + ".beats");
        if (!fs::exists(path)) throw DataError("missing prediction for track: " + stem);
        const auto ann = maybe_skip(load_annotations(path.string()), args.skip_first_5s);
        preds[stem] = BeatSequence{ann.beat_times(), ann.downbeat_times()};
    }

    const EvalReport report = evaluate_dataset(preds, refs);
    std::cout << format_report(report);
    const std::string csv = args.csv.empty()
                                ? (fs::path(args.pred_dir) / "evaluation.csv").string()
                                : args.csv;
    write_report_csv(report, csv);
    std::cout << "csv written to " << csv << "\n";
    return 0;
}

int run_info(const std::string& config_file) {
    const ModelConfig cfg =
        config_file.empty() ? ModelConfig{} : model_config_from_file(config_file);
    cfg.validate();
    auto model = WaveBeatModel::build(cfg, 0);

    std::cout << "layer  ch_in  ch_out  kernel  stride  dilation  padding\n";
    int c_prev = cfg.input_channels;
    for (int l = 1; l <= cfg.layers(); ++l) {
        const auto d = cfg.dilation_at(l);
        std::printf("%5d  %5d  %6d  %6d  %6d  %8lld  %7lld\n", l, c_prev, cfg.channels_at(l),
                    cfg.kernel_size, cfg.stride, static_cast<long long>(d),
                    static_cast<long long>(d * (cfg.kernel_size - 1) / 2));
        c_prev = cfg.channels_at(l);
    }
    const auto rf = receptive_field(cfg);
    std::cout.precision(10);
    std::cout << "receptive field: " << rf.samples << " samples (" << rf.seconds << " s at "
              << cfg.sample_rate << " Hz)\n";
    std::cout << "downsampling factor: " << cfg.downsample_factor() << "\n";
    std::cout << "output frame rate: " << cfg.frame_rate() << " Hz\n";
    std::cout << "trainable parameters: " << model.param_count() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"WaveBeat: joint beat and downbeat tracking on raw waveforms"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic click-track dataset");
    synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
    synth->add_option("--tracks", synth_args.tracks, "Number of tracks")
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_args.seed, "Random seed");
    synth->add_option("--tempo-range", synth_args.tempo_range, "Tempo range LO:HI in BPM");
    synth->add_option("--meter", synth_args.meter, "Beats per bar")
        ->check(CLI::IsMember({"3", "4", "both"}));
    synth->add_option("--duration", synth_args.duration, "Track duration in seconds")
        ->check(CLI::PositiveNumber);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a model");
    train_cmd->add_option("--manifest", train_args.manifest, "Dataset manifest")->required();
    train_cmd->add_option("--out", train_args.out_dir, "Output directory")->required();
    train_cmd->add_option("--preset", train_args.preset, "Configuration preset")
        ->check(CLI::IsMember({"desk", "paper"}));
    train_cmd->add_option("--config", train_args.config_file, "Training config file");
    train_cmd->add_option("--model-config", train_args.model_config_file, "Model config file");
    train_cmd->add_option("--val-manifest", train_args.val_manifest,
                          "Validation manifest (default: 80/10/10 split by track)");
    train_cmd->add_option("--seed", train_args.seed, "Random seed")
        ->each([&train_args](const std::string&) { train_args.seed_set = true; });
    train_cmd->add_option("--epochs", train_args.epochs, "Epoch count override");
    train_cmd->add_option("--batch-size", train_args.batch_size, "Batch size override");
    train_cmd->add_option("--excerpts", train_args.excerpts,
                          "Excerpts per dataset per epoch override");
    train_cmd->add_option("--excerpt-length", train_args.excerpt_length,
                          "Excerpt length override (samples)");
    train_cmd->add_option("--lr", train_args.lr, "Learning rate override");
    train_cmd->add_option("--workers", train_args.workers, "Data worker threads");

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "Decode beats from an audio file");
    predict->add_option("--model", predict_args.model, "Model checkpoint")->required();
    predict->add_option("--input", predict_args.input, "Input WAV file")->required();
    predict->add_option("--decoder", predict_args.decoder, "Decoder")
        ->check(CLI::IsMember({"peak", "dbn"}));
    predict->add_option("--out", predict_args.out, "Output beats file")->required();
    predict->add_option("--dump-activations", predict_args.dump_activations,
                        "Write raw activations to this file");

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against references");
    evaluate->add_option("--pred", eval_args.pred_dir, "Predictions directory")->required();
    evaluate->add_option("--ref", eval_args.ref_dir, "References directory")->required();
    evaluate->add_option("--csv", eval_args.csv, "CSV output path");
    evaluate->add_flag("--skip-first-5s", eval_args.skip_first_5s,
                       "Ignore events in the first five seconds");

    std::string info_config;
    auto* info = app.add_subcommand("info", "Print architecture summary");
    info->add_option("--config", info_config, "Model config file");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return run_synth(synth_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (predict->parsed()) return run_predict(predict_args);
        if (evaluate->parsed()) return run_evaluate(eval_args);
        if (info->parsed()) return run_info(info_config);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
