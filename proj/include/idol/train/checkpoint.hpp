#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "idol/diff/tensor.hpp"
#include "idol/nn/mlp.hpp"
#include "idol/util/base64.hpp"
#include "idol/util/binio.hpp"
#include "idol/util/errors.hpp"

namespace idol::train {

struct CheckpointMeta {
    int epoch = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::int64_t adam_step = 0;
    int best_epoch = -1;
    double best_val = 0.0;
};

// Checkpoints are one JSON document: the metadata keys at top level next to
// one entry per named tensor, each {shape, dtype: "f32", data: base64 of
// row-major little-endian floats}. Values are quantized to f32 regardless of
// the in-memory scalar type.
inline const char* const kMetaKeys[] = {"epoch",     "seed",       "config_hash",
                                        "adam_step", "best_epoch", "best_val"};

inline bool is_meta_key(const std::string& k) {
    for (const char* m : kMetaKeys)
        if (k == m) return true;
    return false;
}

template <class S>
std::string checkpoint_text(const CheckpointMeta& meta,
                            const std::vector<nn::ParamRef<S>>& tensors) {
    nlohmann::json doc;
    doc["epoch"] = meta.epoch;
    doc["seed"] = meta.seed;
    doc["config_hash"] = meta.config_hash;
    doc["adam_step"] = meta.adam_step;
    doc["best_epoch"] = meta.best_epoch;
    doc["best_val"] = meta.best_val;
    for (const auto& t : tensors) {
        if (is_meta_key(t.name))
            throw ContractError("checkpoint: tensor name collides with metadata: " +
                                t.name);
        std::vector<float> f(t.tensor->data().size());
        for (size_t i = 0; i < f.size(); ++i)
            f[i] = static_cast<float>(t.tensor->data()[i]);
        nlohmann::json entry;
        entry["shape"] = t.tensor->shape();
        entry["dtype"] = "f32";
        entry["data"] = util::base64_encode(f.data(), f.size() * sizeof(float));
        doc[t.name] = std::move(entry);
    }
    return doc.dump(2) + "\n";
}

template <class S>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<nn::ParamRef<S>>& tensors) {
    util::write_text_file(path, checkpoint_text(meta, tensors));
}

// Loads a checkpoint into existing tensors matched by name. Every stored
// tensor must find a target with the same shape and vice versa.
template <class S>
CheckpointMeta load_checkpoint(const std::string& path,
                               const std::vector<nn::ParamRef<S>>& tensors) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + ": " + e.what());
    }
    CheckpointMeta meta;
    try {
        meta.epoch = doc.at("epoch").get<int>();
        meta.seed = doc.at("seed").get<std::uint64_t>();
        meta.config_hash = doc.at("config_hash").get<std::string>();
        meta.adam_step = doc.value("adam_step", std::int64_t{0});
        meta.best_epoch = doc.value("best_epoch", -1);
        meta.best_val = doc.value("best_val", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + ": bad metadata: " + e.what());
    }

    size_t stored = 0;
    for (const auto& [key, value] : doc.items())
        if (!is_meta_key(key)) ++stored;
    if (stored != tensors.size())
        throw DataError("checkpoint " + path + ": holds " +
                        std::to_string(stored) + " tensors, expected " +
                        std::to_string(tensors.size()));

    for (const auto& t : tensors) {
        if (!doc.contains(t.name))
            throw DataError("checkpoint " + path + ": missing tensor " + t.name);
        const auto& entry = doc.at(t.name);
        std::vector<int> shape;
        try {
            shape = entry.at("shape").template get<std::vector<int>>();
            if (entry.at("dtype").template get<std::string>() != "f32")
                throw DataError("checkpoint " + path + ": tensor " + t.name +
                                " has unsupported dtype");
        } catch (const nlohmann::json::exception& e) {
            throw DataError("checkpoint " + path + ": tensor " + t.name + ": " +
                            e.what());
        }
        if (shape != t.tensor->shape())
            throw DataError("checkpoint " + path + ": tensor " + t.name +
                            " shape " + diff::shape_string(shape) +
                            " does not match " +
                            diff::shape_string(t.tensor->shape()));
        std::vector<std::uint8_t> bytes =
            util::base64_decode(entry.at("data").template get<std::string>());
        if (bytes.size() != t.tensor->data().size() * sizeof(float))
            throw DataError("checkpoint " + path + ": tensor " + t.name +
                            " has " + std::to_string(bytes.size()) +
                            " payload bytes");
        const float* f = reinterpret_cast<const float*>(bytes.data());
        for (size_t i = 0; i < t.tensor->data().size(); ++i)
            t.tensor->data()[i] = static_cast<S>(f[i]);
    }
    return meta;
}

// Rounds values through f32 so an uninterrupted run agrees bitwise with one
// resumed from the checkpoint that was just written.
template <class S>
void quantize_to_f32(const std::vector<nn::ParamRef<S>>& tensors) {
    for (const auto& t : tensors)
        for (auto& v : t.tensor->data())
            v = static_cast<S>(static_cast<float>(v));
}

} // namespace idol::train
