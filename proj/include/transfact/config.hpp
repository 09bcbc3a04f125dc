#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "transfact/losses.hpp"
#include "transfact/model.hpp"
#include "transfact/videodata.hpp"

namespace transfact {

struct TrainConfig {
    double learning_rate = 1e-4;
    int warmup_steps = 200;
    int epochs = 50;
    int batch_size = 32;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    LossWeights loss;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig base = {});

/// FNV-1a over the canonical (key-sorted, compact) JSON dump.
std::uint64_t fingerprint(const nlohmann::json& j);
std::string fingerprint_hex(std::uint64_t fp);

} // namespace transfact
