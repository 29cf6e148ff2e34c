#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wavebeat/data.hpp"
#include "wavebeat/model.hpp"

namespace wavebeat {

struct TrainConfig {
    int batch_size{16};
    std::size_t excerpt_length{std::size_t(1) << 21};
    int epochs{100};
    int excerpts_per_dataset_per_epoch{1000};
    double lr{1e-3};
    double lr_decay_factor{0.1};
    int patience_epochs{10};
    double clip_norm{4.0};
    std::uint64_t seed{0};
    int workers{0}; // 0 = prepare excerpts on the trainer thread
    AugmentationConfig augmentation{};

    void validate() const;
};

// The published training recipe.
TrainConfig paper_train_config();
ModelConfig paper_model_config();

// Small enough to overfit a synthetic click corpus on a laptop CPU in
// minutes: 4 blocks, channel growth 8, 2^17-sample excerpts.
TrainConfig desk_train_config();
ModelConfig desk_model_config();

TrainConfig train_config_from_file(const std::string& path);
void train_config_to_file(const TrainConfig& cfg, const std::string& path);

struct LoadedTrack {
    std::string name;
    Waveform audio;
    BeatAnnotation annotation;
};

struct LoadedDataset {
    std::string label;
    std::vector<LoadedTrack> tracks;
};

LoadedTrack load_track(const TrackRef& ref, const std::string& name);

// 80/10/10 split by track within each dataset label, seeded.
struct ManifestSplit {
    std::vector<DatasetGroup> train;
    std::vector<TrackRef> val;
    std::vector<TrackRef> test;
};
ManifestSplit split_manifest(const std::vector<DatasetGroup>& groups, std::uint64_t seed);

// Full-track activations; inputs longer than chunk_samples are processed in
// overlapping chunks (half receptive field of context) keeping center frames.
ActivationMatrix infer_activations(WaveBeatModel& model, const Waveform& audio,
                                   std::size_t chunk_samples = std::size_t(1) << 21);

// Peak-picked F-measure means over the given tracks: (beat F, downbeat F).
// Downbeat F averages over tracks whose annotations carry positions.
std::pair<double, double> validate(WaveBeatModel& model, const std::vector<LoadedTrack>& tracks,
                                   std::size_t chunk_samples = std::size_t(1) << 21);

// Task-to-dataset layout within an epoch: round-robin, so every dataset
// label contributes exactly excerpts_per_dataset_per_epoch draws.
inline std::size_t dataset_for_task(std::size_t task_index, std::size_t n_datasets) {
    return task_index % n_datasets;
}

struct EpochStats {
    int epoch{0};
    double train_loss{0.0};
    double val_beat_f{0.0};
    double val_downbeat_f{0.0};
    double lr{0.0};
};

struct TrainResult {
    std::vector<EpochStats> history;
    double best_score{0.0};
    std::string checkpoint_path;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// The training loop: balanced sampling with replacement across dataset
// labels, augmentation, MFE loss, gradient clipping, Adam, per-epoch
// validation, plateau learning-rate decay, best-so-far checkpointing.
// Writes <out_dir>/best.ckpt (+.meta) and <out_dir>/history.csv.
TrainResult train(WaveBeatModel& model, const std::vector<LoadedDataset>& datasets,
                  const std::vector<LoadedTrack>& val_tracks, const TrainConfig& cfg,
                  const std::string& out_dir, const EpochCallback& on_epoch = {});

// Checkpoint + human-readable config sidecar ("<path>.meta").
void save_model(WaveBeatModel& model, const std::string& path);
WaveBeatModel load_model(const std::string& path);

} // namespace wavebeat
