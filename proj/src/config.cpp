#include "transfact/config.hpp"

#include <cstdio>

#include "transfact/error.hpp"

namespace transfact {

void TrainConfig::validate() const {
    require(learning_rate > 0, ErrorKind::Config, "learning_rate must be positive");
    require(warmup_steps >= 0, ErrorKind::Config, "warmup_steps must be non-negative");
    require(epochs >= 1, ErrorKind::Config, "epochs must be >= 1");
    require(batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1");
    require(weight_decay >= 0, ErrorKind::Config, "weight_decay must be non-negative");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorKind::Config, "betas must lie in [0,1)");
    require(adam_eps > 0, ErrorKind::Config, "adam_eps must be positive");
    loss.validate();
}

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("bad value for \"") + key + "\": " + e.what());
    }
}

} // namespace

nlohmann::json to_json(const ModelConfig& c) {
    return {{"num_blocks", c.num_blocks},   {"num_tokens", c.num_tokens}, {"num_stages", c.num_stages},
            {"hidden_dim", c.hidden_dim},   {"heads", c.heads},           {"dilations", c.dilations},
            {"input_modality", to_string(c.input_modality)},              {"use_mhi", c.use_mhi},
            {"input_dim", c.input_dim},     {"mhi_dim", c.mhi_dim}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
    read(j, "num_blocks", c.num_blocks);
    read(j, "num_tokens", c.num_tokens);
    read(j, "num_stages", c.num_stages);
    read(j, "hidden_dim", c.hidden_dim);
    read(j, "heads", c.heads);
    read(j, "dilations", c.dilations);
    std::string modality = to_string(c.input_modality);
    read(j, "input_modality", modality);
    c.input_modality = parse_modality(modality);
    read(j, "use_mhi", c.use_mhi);
    read(j, "input_dim", c.input_dim);
    read(j, "mhi_dim", c.mhi_dim);
    return c;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"warmup_steps", c.warmup_steps},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"weight_decay", c.weight_decay},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"seed", c.seed},
            {"w_trans", c.loss.trans},
            {"w_frame", c.loss.frame},
            {"w_stage", c.loss.stage},
            {"w_cross", c.loss.cross},
            {"w_smooth", c.loss.smooth}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    read(j, "learning_rate", c.learning_rate);
    read(j, "warmup_steps", c.warmup_steps);
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "weight_decay", c.weight_decay);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "adam_eps", c.adam_eps);
    read(j, "seed", c.seed);
    read(j, "w_trans", c.loss.trans);
    read(j, "w_frame", c.loss.frame);
    read(j, "w_stage", c.loss.stage);
    read(j, "w_cross", c.loss.cross);
    read(j, "w_smooth", c.loss.smooth);
    return c;
}

nlohmann::json to_json(const GeneratorConfig& c) {
    return {{"frames", c.frames},
            {"size", c.size},
            {"p_anomaly", c.p_anomaly},
            {"stable_min", c.stable_min},
            {"stable_max", c.stable_max},
            {"cleavage_min", c.cleavage_min},
            {"cleavage_max", c.cleavage_max},
            {"w_arrest", c.w_arrest},
            {"w_direct", c.w_direct},
            {"w_underdev", c.w_underdev},
            {"late_anomaly", c.late_anomaly},
            {"noise_std", c.noise_std}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig c) {
    read(j, "frames", c.frames);
    read(j, "size", c.size);
    read(j, "p_anomaly", c.p_anomaly);
    read(j, "stable_min", c.stable_min);
    read(j, "stable_max", c.stable_max);
    read(j, "cleavage_min", c.cleavage_min);
    read(j, "cleavage_max", c.cleavage_max);
    read(j, "w_arrest", c.w_arrest);
    read(j, "w_direct", c.w_direct);
    read(j, "w_underdev", c.w_underdev);
    read(j, "late_anomaly", c.late_anomaly);
    read(j, "noise_std", c.noise_std);
    return c;
}

std::uint64_t fingerprint(const nlohmann::json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
    return buf;
}

} // namespace transfact
