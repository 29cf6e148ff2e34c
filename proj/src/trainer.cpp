#include "wavebeat/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "wavebeat/errors.hpp"
#include "wavebeat/loss.hpp"
#include "wavebeat/metrics.hpp"
#include "wavebeat/nn/checkpoint.hpp"
#include "wavebeat/nn/optim.hpp"

namespace wavebeat {

void TrainConfig::validate() const {
    if (batch_size < 1 || excerpt_length < 1 || epochs < 0 ||
        excerpts_per_dataset_per_epoch < 1 || patience_epochs < 1 || workers < 0)
        throw std::invalid_argument("train config counts must be positive");
    if (lr <= 0 || clip_norm <= 0) throw std::invalid_argument("lr and clip_norm must be positive");
    if (lr_decay_factor <= 0 || lr_decay_factor >= 1)
        throw std::invalid_argument("lr_decay_factor must lie in (0, 1)");
}

TrainConfig paper_train_config() { return TrainConfig{}; }

ModelConfig paper_model_config() { return ModelConfig{}; }

TrainConfig desk_train_config() {
    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.excerpt_length = std::size_t(1) << 17;
    cfg.epochs = 30;
    cfg.excerpts_per_dataset_per_epoch = 8;
    return cfg;
}

ModelConfig desk_model_config() {
    // Full 8-layer shape at an eighth of the width: keeps the 86 Hz output
    // rate (the mean-false-error loss needs the 256x downsampling to see
    // enough positives per frame) while cutting compute ~30x.
    ModelConfig cfg;
    cfg.channel_growth = 8;
    return cfg;
}

// ---------------------------------------------------------------------------
// Key-value config files

namespace {

std::map<std::string, std::string> read_kv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key, value;
        if (!(ss >> key)) continue;
        if (key[0] == '#') continue;
        if (!(ss >> value)) throw DataError("config line missing value: " + line);
        kv[key] = value;
    }
    return kv;
}

template <typename T>
void kv_get(const std::map<std::string, std::string>& kv, const std::string& key, T& out) {
    const auto it = kv.find(key);
    if (it == kv.end()) return;
    std::istringstream ss(it->second);
    if (!(ss >> out)) throw DataError("bad config value for " + key + ": " + it->second);
}

} // namespace

ModelConfig model_config_from_file(const std::string& path) {
    const auto kv = read_kv(path);
    ModelConfig cfg;
    kv_get(kv, "input_channels", cfg.input_channels);
    kv_get(kv, "output_channels", cfg.output_channels);
    kv_get(kv, "n_stacks", cfg.n_stacks);
    kv_get(kv, "blocks_per_stack", cfg.blocks_per_stack);
    kv_get(kv, "kernel_size", cfg.kernel_size);
    kv_get(kv, "stride", cfg.stride);
    kv_get(kv, "dilation_base", cfg.dilation_base);
    kv_get(kv, "channel_growth", cfg.channel_growth);
    kv_get(kv, "sample_rate", cfg.sample_rate);
    cfg.validate();
    return cfg;
}

void model_config_to_file(const ModelConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config file: " + path);
    out << "input_channels " << cfg.input_channels << '\n'
        << "output_channels " << cfg.output_channels << '\n'
        << "n_stacks " << cfg.n_stacks << '\n'
        << "blocks_per_stack " << cfg.blocks_per_stack << '\n'
        << "kernel_size " << cfg.kernel_size << '\n'
        << "stride " << cfg.stride << '\n'
        << "dilation_base " << cfg.dilation_base << '\n'
        << "channel_growth " << cfg.channel_growth << '\n'
        << "sample_rate " << cfg.sample_rate << '\n';
}

TrainConfig train_config_from_file(const std::string& path) {
    const auto kv = read_kv(path);
    TrainConfig cfg;
    kv_get(kv, "batch_size", cfg.batch_size);
    kv_get(kv, "excerpt_length", cfg.excerpt_length);
    kv_get(kv, "epochs", cfg.epochs);
    kv_get(kv, "excerpts_per_dataset_per_epoch", cfg.excerpts_per_dataset_per_epoch);
    kv_get(kv, "lr", cfg.lr);
    kv_get(kv, "lr_decay_factor", cfg.lr_decay_factor);
    kv_get(kv, "patience_epochs", cfg.patience_epochs);
    kv_get(kv, "clip_norm", cfg.clip_norm);
    kv_get(kv, "seed", cfg.seed);
    kv_get(kv, "workers", cfg.workers);
    kv_get(kv, "p_filter", cfg.augmentation.p_filter);
    kv_get(kv, "p_pitch", cfg.augmentation.p_pitch);
    kv_get(kv, "p_noise", cfg.augmentation.p_noise);
    kv_get(kv, "p_tanh", cfg.augmentation.p_tanh);
    kv_get(kv, "p_shift", cfg.augmentation.p_shift);
    kv_get(kv, "p_dropout", cfg.augmentation.p_dropout);
    kv_get(kv, "p_invert", cfg.augmentation.p_invert);
    cfg.validate();
    return cfg;
}

void train_config_to_file(const TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config file: " + path);
    out << "batch_size " << cfg.batch_size << '\n'
        << "excerpt_length " << cfg.excerpt_length << '\n'
        << "epochs " << cfg.epochs << '\n'
        << "excerpts_per_dataset_per_epoch " << cfg.excerpts_per_dataset_per_epoch << '\n'
        << "lr " << cfg.lr << '\n'
        << "lr_decay_factor " << cfg.lr_decay_factor << '\n'
        << "patience_epochs " << cfg.patience_epochs << '\n'
        << "clip_norm " << cfg.clip_norm << '\n'
        << "seed " << cfg.seed << '\n'
        << "workers " << cfg.workers << '\n'
        << "p_filter " << cfg.augmentation.p_filter << '\n'
        << "p_pitch " << cfg.augmentation.p_pitch << '\n'
        << "p_noise " << cfg.augmentation.p_noise << '\n'
        << "p_tanh " << cfg.augmentation.p_tanh << '\n'
        << "p_shift " << cfg.augmentation.p_shift << '\n'
        << "p_dropout " << cfg.augmentation.p_dropout << '\n'
        << "p_invert " << cfg.augmentation.p_invert << '\n';
}

// ---------------------------------------------------------------------------

LoadedTrack load_track(const TrackRef& ref, const std::string& name) {
    return {name, load_audio(ref.audio_path), load_annotations(ref.annotation_path)};
}

ManifestSplit split_manifest(const std::vector<DatasetGroup>& groups, std::uint64_t seed) {
    ManifestSplit split;
    for (const auto& group : groups) {
        Rng rng = Rng::stream(seed, std::hash<std::string>{}(group.label), 0x5370ULL);
        std::vector<std::size_t> order(group.tracks.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);

        const std::size_t n = order.size();
        std::size_t n_val = 0, n_test = 0;
        if (n >= 2) n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * n)));
        if (n >= 3) n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * n)));
        DatasetGroup train_group{group.label, {}};
        for (std::size_t i = 0; i < n; ++i) {
            const TrackRef& t = group.tracks[order[i]];
            if (i < n_val)
                split.val.push_back(t);
            else if (i < n_val + n_test)
                split.test.push_back(t);
            else
                train_group.tracks.push_back(t);
        }
        split.train.push_back(std::move(train_group));
    }
    return split;
}

// ---------------------------------------------------------------------------
// Inference

ActivationMatrix infer_activations(WaveBeatModel& model, const Waveform& audio,
                                   std::size_t chunk_samples) {
    const auto factor = static_cast<std::size_t>(model.config().downsample_factor());
    if (audio.samples.empty()) throw std::invalid_argument("cannot infer on empty audio");
    const std::size_t padded = (audio.samples.size() + factor - 1) / factor * factor;
    chunk_samples = std::max(chunk_samples, factor) / factor * factor;
    const std::size_t total_frames = padded / factor;
    ActivationMatrix act(total_frames, model.config().frame_rate());

    auto run_window = [&](std::size_t start, std::size_t window) {
        Tensor x({1, 1, window});
        const std::size_t avail =
            start < audio.samples.size() ? std::min(window, audio.samples.size() - start) : 0;
        std::copy_n(audio.samples.begin() + static_cast<std::ptrdiff_t>(start), avail, x.data());
        return model.forward(x);
    };

    if (padded <= chunk_samples) {
        Tensor out = run_window(0, padded);
        for (std::size_t f = 0; f < total_frames; ++f) {
            act.beat(f) = out.at3(0, 0, f);
            act.downbeat(f) = out.at3(0, 1, f);
        }
        return act;
    }

    // Overlapping chunks, keeping the center region of each.
    const auto rf = static_cast<std::size_t>(receptive_field(model.config()).samples);
    std::size_t context = std::min((rf / 2 + factor - 1) / factor * factor, chunk_samples / 4);
    context = context / factor * factor;
    const std::size_t hop = chunk_samples - 2 * context;
    const std::size_t chunk_frames = chunk_samples / factor;
    const std::size_t context_frames = context / factor;

    std::size_t start = 0;
    while (true) {
        const bool first = start == 0;
        const bool last = start + chunk_samples >= padded;
        Tensor out = run_window(start, chunk_samples);
        const std::size_t lo = first ? 0 : context_frames;
        const std::size_t hi = last ? chunk_frames : chunk_frames - context_frames;
        for (std::size_t f = lo; f < hi; ++f) {
            const std::size_t global = start / factor + f;
            if (global >= total_frames) break;
            act.beat(global) = out.at3(0, 0, f);
            act.downbeat(global) = out.at3(0, 1, f);
        }
        if (last) break;
        start += hop;
    }
    return act;
}

std::pair<double, double> validate(WaveBeatModel& model, const std::vector<LoadedTrack>& tracks,
                                   std::size_t chunk_samples) {
    const bool was_training = model.is_training();
    model.eval();
    double beat_sum = 0.0, down_sum = 0.0;
    std::size_t down_count = 0;
    for (const auto& track : tracks) {
        const ActivationMatrix act = infer_activations(model, track.audio, chunk_samples);
        const BeatSequence seq = peak_pick(act);
        beat_sum += f_measure(seq.beats, track.annotation.beat_times());
        if (track.annotation.has_positions()) {
            down_sum += f_measure(seq.downbeats, track.annotation.downbeat_times());
            ++down_count;
        }
    }
    if (was_training) model.train();
    const double n = tracks.empty() ? 1.0 : static_cast<double>(tracks.size());
    return {beat_sum / n, down_count ? down_sum / static_cast<double>(down_count) : 0.0};
}

// ---------------------------------------------------------------------------
// Checkpoint + sidecar

void save_model(WaveBeatModel& model, const std::string& path) {
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (auto& [name, tensor] : model.state_tensors()) tensors.emplace_back(name, tensor);
    nn::save_tensors(path, tensors);
    model_config_to_file(model.config(), path + ".meta");
}

WaveBeatModel load_model(const std::string& path) {
    const ModelConfig cfg = model_config_from_file(path + ".meta");
    WaveBeatModel model = WaveBeatModel::build(cfg, 0);
    auto loaded = nn::load_tensors(path);
    auto expected = model.state_tensors();
    if (loaded.size() != expected.size())
        throw DataError("checkpoint/config mismatch: tensor count differs in " + path);
    for (auto& [name, tensor] : expected) {
        const auto it = loaded.find(name);
        if (it == loaded.end()) throw DataError("checkpoint/config mismatch: missing " + name);
        if (it->second.shape() != tensor->shape())
            throw DataError("checkpoint/config mismatch: shape of " + name);
        *tensor = it->second;
    }
    model.mark_stats_initialized();
    return model;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct PreparedExcerpt {
    std::vector<float> samples;
    TargetMatrix targets;
};

PreparedExcerpt prepare_excerpt(const LoadedDataset& dataset, std::size_t length,
                                const AugmentationConfig& aug, double frame_rate,
                                std::size_t factor, Rng rng) {
    const auto& track = dataset.tracks[rng.uniform_int(dataset.tracks.size())];
    Excerpt ex = sample_excerpt(track.audio, track.annotation, length, rng, track.name);
    auto [audio, ann] = augment(ex.audio, ex.annotation, aug, rng);
    fit_length(audio, ann, length);
    PreparedExcerpt out;
    out.targets = make_targets(ann, length / factor, frame_rate);
    out.samples = std::move(audio.samples);
    return out;
}

// Hands excerpts to the trainer in task order while up to `workers` threads
// prepare them ahead; excerpt content depends only on the task seed, so any
// worker count yields identical batches.
class ExcerptQueue {
public:
    ExcerptQueue(int workers, std::size_t total, std::size_t capacity,
                 std::function<PreparedExcerpt(std::size_t)> make)
        : total_(total), capacity_(std::max<std::size_t>(capacity, 1)), make_(std::move(make)) {
        for (int i = 0; i < workers; ++i)
            threads_.emplace_back([this] { work(); });
    }

    ~ExcerptQueue() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        space_.notify_all();
        for (auto& t : threads_) t.join();
    }

    PreparedExcerpt get(std::size_t index) {
        if (threads_.empty()) return make_(index);
        std::unique_lock<std::mutex> lock(mutex_);
        ready_.wait(lock, [&] { return done_.count(index) > 0; });
        PreparedExcerpt out = std::move(done_.at(index));
        done_.erase(index);
        consumed_ = index + 1;
        space_.notify_all();
        return out;
    }

private:
    void work() {
        while (true) {
            const std::size_t index = next_.fetch_add(1);
            if (index >= total_) return;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                space_.wait(lock, [&] { return stop_ || index < consumed_ + capacity_; });
                if (stop_) return;
            }
            PreparedExcerpt item = make_(index);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                done_.emplace(index, std::move(item));
            }
            ready_.notify_all();
        }
    }

    std::size_t total_;
    std::size_t capacity_;
    std::function<PreparedExcerpt(std::size_t)> make_;
    std::atomic<std::size_t> next_{0};
    std::size_t consumed_{0};
    std::map<std::size_t, PreparedExcerpt> done_;
    std::mutex mutex_;
    std::condition_variable ready_, space_;
    std::vector<std::thread> threads_;
    bool stop_{false};
};

} // namespace

TrainResult train(WaveBeatModel& model, const std::vector<LoadedDataset>& datasets,
                  const std::vector<LoadedTrack>& val_tracks, const TrainConfig& cfg,
                  const std::string& out_dir, const EpochCallback& on_epoch) {
    cfg.validate();
    if (datasets.empty()) throw DataError("no training datasets");
    for (const auto& d : datasets)
        if (d.tracks.empty()) throw DataError("dataset has no tracks: " + d.label);

    TrainResult result;
    if (cfg.epochs == 0) return result;

    std::filesystem::create_directories(out_dir);
    const std::string checkpoint_path = (std::filesystem::path(out_dir) / "best.ckpt").string();

    const auto factor = static_cast<std::size_t>(model.config().downsample_factor());
    if (cfg.excerpt_length % factor != 0)
        throw std::invalid_argument("excerpt_length must be a multiple of the downsampling factor");
    const double frame_rate = model.config().frame_rate();
    const std::size_t n_frames = cfg.excerpt_length / factor;

    model.train();
    nn::Adam adam(model.parameters(), {cfg.lr});
    auto params = model.parameters();

    double best_score = -1.0;
    int epochs_since_improvement = 0;
    const std::size_t tasks_per_epoch =
        static_cast<std::size_t>(cfg.excerpts_per_dataset_per_epoch) * datasets.size();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto make = [&, epoch](std::size_t index) {
            const auto& dataset = datasets[dataset_for_task(index, datasets.size())];
            return prepare_excerpt(dataset, cfg.excerpt_length, cfg.augmentation, frame_rate,
                                   factor,
                                   Rng::stream(cfg.seed, static_cast<std::uint64_t>(epoch),
                                               index + 1));
        };
        ExcerptQueue queue(cfg.workers, tasks_per_epoch,
                           static_cast<std::size_t>(cfg.workers) * 2 + cfg.batch_size, make);

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        std::size_t task = 0;
        while (task < tasks_per_epoch) {
            const std::size_t batch =
                std::min<std::size_t>(cfg.batch_size, tasks_per_epoch - task);
            Tensor input({batch, 1, cfg.excerpt_length});
            Tensor targets({batch, 2, n_frames});
            for (std::size_t b = 0; b < batch; ++b) {
                PreparedExcerpt ex = queue.get(task + b);
                std::copy(ex.samples.begin(), ex.samples.end(),
                          input.data() + b * cfg.excerpt_length);
                std::copy(ex.targets.values.data(), ex.targets.values.data() + 2 * n_frames,
                          targets.data() + b * 2 * n_frames);
            }

            WaveBeatModel::ForwardContext ctx;
            Tensor pred = model.forward_train(input, ctx);
            const MfeParts loss = mfe(pred, targets);
            if (!std::isfinite(loss.total))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", tasks " + std::to_string(task) + ".." +
                                   std::to_string(task + batch - 1) + " (seed " +
                                   std::to_string(cfg.seed) + ")");
            Tensor grad = mfe_grad(pred, targets);
            model.backward(ctx, grad);
            nn::clip_grad_norm(params, cfg.clip_norm);
            adam.step();
            model.zero_grad();

            loss_sum += loss.total * static_cast<double>(batch);
            loss_count += batch;
            task += batch;
        }

        const auto [val_beat_f, val_down_f] = validate(model, val_tracks);
        const bool any_downbeats = std::any_of(val_tracks.begin(), val_tracks.end(), [](auto& t) {
            return t.annotation.has_positions();
        });
        const double score = any_downbeats ? (val_beat_f + val_down_f) / 2.0 : val_beat_f;

        result.history.push_back({epoch, loss_sum / static_cast<double>(loss_count), val_beat_f,
                                  val_down_f, adam.lr()});
        if (on_epoch) on_epoch(result.history.back());

        if (score > best_score) {
            best_score = score;
            epochs_since_improvement = 0;
            save_model(model, checkpoint_path);
            result.checkpoint_path = checkpoint_path;
        } else if (++epochs_since_improvement >= cfg.patience_epochs) {
            adam.set_lr(adam.lr() * cfg.lr_decay_factor);
            epochs_since_improvement = 0;
        }
    }
    result.best_score = best_score;

    std::ofstream history(std::filesystem::path(out_dir) / "history.csv");
    history << "epoch,train_loss,val_beat_f,val_downbeat_f,lr\n";
    history.precision(10);
    for (const auto& row : result.history)
        history << row.epoch << ',' << row.train_loss << ',' << row.val_beat_f << ','
                << row.val_downbeat_f << ',' << row.lr << '\n';
    return result;
}

} // namespace wavebeat
