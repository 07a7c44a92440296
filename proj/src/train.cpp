// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "flank/train.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "flank/dataset_pipeline.hpp"
#include "flank/image.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace flank {

FreezeMask build_freeze_mask(int layer_count, Phase phase) {
    if (layer_count < 2) throw Error("freeze mask needs at least 2 layers");
    int frozen = 0;
    switch (phase.kind) {
        case Phase::Phase1: frozen = layer_count - 1; break;
        case Phase::Phase2: frozen = layer_count / 2; break;
        case Phase::Custom:
            frozen = phase.frozen_count;
            if (frozen < 0 || frozen >= layer_count)
                throw Error("Custom frozen count must lie in [0, layer_count-1]; "
                            "the head is never frozen");
            break;
    }
    FreezeMask mask(layer_count, false);
    for (int i = 0; i < frozen; ++i) mask[i] = true;
    return mask;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("epochs must be >= 1");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
}

TensorDataset load_tensor_dataset(const std::vector<ManifestEntry>& manifest,
                                  const std::filesystem::path& crops_dir,
                                  int input_size) {
    TensorDataset ds;
    ds.input_size = input_size;
    for (const auto& e : manifest) {
        Image img;
        try {
            img = load_ppm(crops_dir / e.crop_path);
        } catch (const Error&) {
            ++ds.unreadable;
            continue;
        }
        if (img.width != input_size || img.height != input_size)
            throw Error("crop '" + e.crop_path + "' is " +
                        std::to_string(img.width) + "x" + std::to_string(img.height) +
                        ", expected " + std::to_string(input_size));
        LabeledSample s;
        s.label = e.label == Flank::Right ? 1 : 0;
        s.source_id = e.source_id;
        s.species = e.species;
        s.pixels.resize(static_cast<std::size_t>(3) * input_size * input_size);
        const int plane = input_size * input_size;
        for (int y = 0; y < input_size; ++y)
            for (int x = 0; x < input_size; ++x)
                for (int c = 0; c < 3; ++c)
                    s.pixels[c * plane + y * input_size + x] =
                        static_cast<float>(img.at(x, y, c)) / 255.0f;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

double dataset_accuracy(const LayeredModel& model, const TensorDataset& data) {
    if (data.samples.empty()) throw Error("accuracy over an empty dataset");
    std::vector<float> batch;
    batch.reserve(data.samples.size() * data.samples[0].pixels.size());
    for (const auto& s : data.samples)
        batch.insert(batch.end(), s.pixels.begin(), s.pixels.end());
    const auto probs = forward(model, batch);
    long correct = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        // exact 0.5/0.5 ties predict left (index 0)
        const int pred = probs[i][1] > probs[i][0] ? 1 : 0;
        if (pred == data.samples[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probs.size());
}

TrainHistory train_phase(LayeredModel& model, const TensorDataset& train_set,
                         const TensorDataset* validation_set,
                         const FreezeMask& mask, const TrainConfig& config) {
    config.validate();
    if (train_set.samples.empty()) throw Error("empty training set");
    if (static_cast<int>(mask.size()) != model.layer_count())
        throw Error("freeze mask length does not match layer count");
    if (train_set.input_size != model.input_size)
        throw Error("dataset input size does not match model");

    // backward can stop at the first trainable layer; parameters below it
    // never receive updates
    int first_trainable = 0;
    while (first_trainable < model.layer_count() && mask[first_trainable])
        ++first_trainable;
    if (first_trainable == model.layer_count())
        throw Error("all layers frozen; nothing to train");

    GradSet<float> velocity = zero_grads(model);
    const std::size_t stride = train_set.samples[0].pixels.size();
    const std::size_t n = train_set.samples.size();

    TrainHistory history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(config.rng_seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        double loss_sum = 0.0;
        long loss_batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            std::vector<float> batch;
            batch.reserve((end - start) * stride);
            std::vector<int> labels;
            labels.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const auto& s = train_set.samples[order[i]];
                batch.insert(batch.end(), s.pixels.begin(), s.pixels.end());
                labels.push_back(s.label);
            }
            double loss;
            GradSet<float> grads;
            try {
                std::tie(loss, grads) =
                    loss_and_grads(model, batch, labels, first_trainable);
            } catch (const NumericalError& e) {
                throw NumericalError(
                    e.layer_index,
                    std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(start / config.batch_size) + ")");
            }
            loss_sum += loss;
            ++loss_batches;
            for (int l = first_trainable; l < model.layer_count(); ++l) {
                if (mask[l]) continue;
                auto params = model.layer_params(l);
                for (std::size_t t = 0; t < params.size(); ++t) {
                    auto& v = velocity[l][t].data;
                    const auto& g = grads[l][t].data;
                    auto& p = params[t]->data;
                    const float lr = static_cast<float>(config.learning_rate);
                    const float mu = static_cast<float>(config.momentum);
                    for (std::size_t k = 0; k < p.size(); ++k) {
                        v[k] = mu * v[k] + g[k];
                        p[k] -= lr * v[k];
                    }
                }
            }
        }

        EpochRecord rec;
        rec.train_loss = loss_sum / static_cast<double>(loss_batches);
        rec.train_accuracy = dataset_accuracy(model, train_set);
        if (validation_set && !validation_set->samples.empty())
            rec.validation_accuracy = dataset_accuracy(model, *validation_set);
        history.push_back(rec);
    }
    return history;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[4] = {'F', 'L', 'N', 'K'};
constexpr std::uint16_t kVersion = 1;

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n,
                      std::uint64_t h = 0xcbf29ce484222325ull) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

template <typename V>
void write_raw(std::ostream& out, const V& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename V>
V read_raw(std::istream& in) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw CheckpointError("truncated checkpoint file");
    return v;
}

}  // namespace

void save_checkpoint(const LayeredModel& model,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
    out.write(kMagic, 4);
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint16_t>(model.layer_count()));
    std::uint64_t checksum = 0xcbf29ce484222325ull;
    for (int i = 0; i < model.layer_count(); ++i) {
        for (const Tensor<float>* t : model.layer_params(i)) {
            write_raw(out, static_cast<std::uint32_t>(t->shape.size()));
            for (auto d : t->shape) write_raw(out, d);
            const auto* bytes = reinterpret_cast<const std::uint8_t*>(t->data.data());
            const std::size_t nbytes = t->data.size() * sizeof(float);
            out.write(reinterpret_cast<const char*>(bytes),
                      static_cast<std::streamsize>(nbytes));
            checksum = fnv1a64(bytes, nbytes, checksum);
        }
    }
    write_raw(out, checksum);
    if (!out) throw CheckpointError("write failure: " + path.string());
}

LayeredModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("bad magic bytes in " + path.string());
    const auto version = read_raw<std::uint16_t>(in);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " +
                              std::to_string(version));
    const auto layer_count = read_raw<std::uint16_t>(in);
    if (layer_count < 2) throw CheckpointError("implausible layer count");

    // tensor ranks identify the block kinds: rank 4 = conv weight,
    // rank 2 = dense weight, each followed by its rank-1 bias
    LayeredModel model;
    std::uint64_t checksum = 0xcbf29ce484222325ull;
    auto read_tensor = [&](std::uint32_t expected_rank) {
        const auto rank = read_raw<std::uint32_t>(in);
        if (expected_rank != 0 && rank != expected_rank)
            throw CheckpointError("shape table inconsistent with layer structure");
        Tensor<float> t;
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            const auto d = read_raw<std::uint32_t>(in);
            if (d == 0 || n > (1u << 28))
                throw CheckpointError("implausible tensor dimension");
            t.shape.push_back(d);
            n *= d;
        }
        t.data.resize(n);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw CheckpointError("truncated tensor payload");
        checksum = fnv1a64(reinterpret_cast<const std::uint8_t*>(t.data.data()),
                           n * sizeof(float), checksum);
        return t;
    };

    bool seen_dense = false;
    for (int i = 0; i < layer_count; ++i) {
        // peek the rank to decide conv vs dense
        const auto pos = in.tellg();
        const auto rank = read_raw<std::uint32_t>(in);
        in.seekg(pos);
        if (rank == 4) {
            if (seen_dense)
                throw CheckpointError("conv layer after dense layer in checkpoint");
            ConvBlock<float> b;
            b.weight = read_tensor(4);
            b.bias = read_tensor(1);
            b.out_ch = static_cast<int>(b.weight.shape[0]);
            b.in_ch = static_cast<int>(b.weight.shape[1]);
            if (b.weight.shape[2] != 3 || b.weight.shape[3] != 3 ||
                b.bias.shape[0] != b.weight.shape[0])
                throw CheckpointError("shape table inconsistent with payload");
            model.conv_blocks.push_back(std::move(b));
        } else if (rank == 2) {
            seen_dense = true;
            DenseBlock<float> b;
            b.weight = read_tensor(2);
            b.bias = read_tensor(1);
            b.out_dim = static_cast<int>(b.weight.shape[0]);
            b.in_dim = static_cast<int>(b.weight.shape[1]);
            if (b.bias.shape[0] != b.weight.shape[0])
                throw CheckpointError("shape table inconsistent with payload");
            model.dense_blocks.push_back(std::move(b));
        } else {
            throw CheckpointError("unexpected tensor rank " + std::to_string(rank));
        }
    }
    const auto stored = read_raw<std::uint64_t>(in);
    if (stored != checksum) throw CheckpointError("payload checksum mismatch");
    if (model.dense_blocks.empty() || model.dense_blocks.back().out_dim != 2)
        throw CheckpointError("checkpoint lacks the binary head");
    model.dense_blocks.back().rectified = false;
    for (std::size_t d = 0; d + 1 < model.dense_blocks.size(); ++d)
        model.dense_blocks[d].rectified = true;

    // recover the square input side from the channel/dimension chain
    if (!model.conv_blocks.empty()) {
        const int ch = model.conv_blocks.back().out_ch;
        const int flat = model.dense_blocks.front().in_dim;
        if (flat % ch != 0) throw CheckpointError("inconsistent dense input width");
        const int spatial2 = flat / ch;
        const int spatial = static_cast<int>(std::lround(std::sqrt(spatial2)));
        if (spatial * spatial != spatial2)
            throw CheckpointError("inconsistent dense input width");
        model.input_size = spatial << model.conv_blocks.size();
        if (model.conv_blocks.front().in_ch != 3)
            throw CheckpointError("first conv layer must take 3 channels");
    } else {
        throw CheckpointError("checkpoint has no conv layers");
    }
    return model;
}

}  // namespace flank
