#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "transfact/autodiff.hpp"
#include "transfact/features.hpp"

namespace transfact {

using ad::Matrix;

struct ModelConfig {
    int num_blocks = 3;
    int num_tokens = 60;
    int num_stages = 11;
    int hidden_dim = 64;
    int heads = 4;
    std::vector<int> dilations{1, 2, 4, 8};
    /// Feature stream driving the frame branch.
    Modality input_modality = Modality::Frame;
    /// Fuse MHI features into the frame branch through cross-attention.
    bool use_mhi = false;
    int input_dim = 32;
    int mhi_dim = 32;

    int ffn_dim() const { return 2 * hidden_dim; }
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named learnable tensors in a fixed registration order.
struct Parameters {
    std::vector<std::string> names;
    std::vector<Matrix> tensors;

    std::size_t scalar_count() const;
    int index_of(const std::string& name) const;
    std::vector<Matrix> zeros_like() const;
};

/// Analytic parameter count for a configuration (documented in the README).
std::size_t parameter_count(const ModelConfig& config);

Parameters init_model(const ModelConfig& config, std::uint64_t seed);

/// Per-block predictions. Attention maps are both T x M: attn_f2s is the
/// frame-query map, attn_s2f the stage-query map transposed and
/// renormalized over tokens.
template <typename T>
struct BlockPredictions {
    T frame_probs;
    T frame_log_probs;
    T token_probs;
    T attn_f2s;
    T attn_s2f;
    T trans_probs;
};

using BlockVars = BlockPredictions<ad::Var>;
using BlockOutput = BlockPredictions<Matrix>;

struct ForwardVars {
    std::vector<BlockVars> blocks;
};

struct ForwardOutput {
    std::vector<BlockOutput> blocks;

    int predicted_transfer() const;
    std::vector<int> predicted_stages() const;
};

/// Records the network on `graph` with every parameter bound as a leaf.
ForwardVars forward(ad::Graph& graph, const ModelConfig& config, const Parameters& params,
                    const FeatureSequence& input, const FeatureSequence* mhi);

ForwardOutput forward(const ModelConfig& config, const Parameters& params, const FeatureSequence& input,
                      const FeatureSequence* mhi);

ForwardOutput values_of(const ForwardVars& vars);

/// Multi-head scaled dot-product attention with a shared projection set.
struct AttentionWeights {
    Matrix wq;
    Matrix wk;
    Matrix wv;
    Matrix wo;
};

struct AttentionResult {
    Matrix output;
    /// Head-averaged probabilities, one row per query.
    Matrix weights;
};

AttentionResult cross_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                                const AttentionWeights& weights, int heads);

/// Graph version used inside the network; returns (output, head-mean weights).
std::pair<ad::Var, ad::Var> cross_attention(ad::Var queries, ad::Var keys, ad::Var values, ad::Var wq, ad::Var wk,
                                            ad::Var wv, ad::Var wo, int heads);

/// Mean-pool both token sets, concatenate, project to 2 logits, softmax.
ad::Var transferability_head(ad::Var frame_tokens, ad::Var stage_tokens, ad::Var weight, ad::Var bias);

Matrix sinusoidal_encoding(int length, int dim);

} // namespace transfact
