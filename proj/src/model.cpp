#include "transfact/model.hpp"

#include <cmath>

#include "transfact/error.hpp"
#include "transfact/rng.hpp"

namespace transfact {

using ad::Graph;
using ad::Var;

void ModelConfig::validate() const {
    require(num_blocks >= 1, ErrorKind::Config, "num_blocks must be >= 1");
    require(num_tokens >= 1, ErrorKind::Config, "num_tokens must be >= 1");
    require(num_stages >= 1, ErrorKind::Config, "num_stages must be >= 1");
    require(hidden_dim >= 1 && heads >= 1, ErrorKind::Config, "hidden_dim and heads must be positive");
    require(hidden_dim % heads == 0, ErrorKind::Config,
            "hidden_dim " + std::to_string(hidden_dim) + " not divisible by heads " + std::to_string(heads));
    require(!dilations.empty(), ErrorKind::Config, "at least one dilation is required");
    for (int d : dilations) {
        require(d >= 1, ErrorKind::Config, "dilations must be >= 1");
    }
    require(input_dim >= 1, ErrorKind::Config, "input_dim must be positive");
    require(!use_mhi || mhi_dim >= 1, ErrorKind::Config, "mhi_dim must be positive");
    require(!(use_mhi && input_modality == Modality::Mhi), ErrorKind::Config,
            "MHI fusion requires the frame modality as primary input");
}

std::size_t Parameters::scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) {
        n += static_cast<std::size_t>(t.size());
    }
    return n;
}

int Parameters::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return static_cast<int>(i);
        }
    }
    fail(ErrorKind::Index, "no parameter named \"" + name + "\"");
}

std::vector<Matrix> Parameters::zeros_like() const {
    std::vector<Matrix> out;
    out.reserve(tensors.size());
    for (const auto& t : tensors) {
        out.push_back(Matrix::Zero(t.rows(), t.cols()));
    }
    return out;
}

namespace {

struct Linear {
    int w = -1;
    int b = -1;
};
struct Norm {
    int gamma = -1;
    int beta = -1;
};
struct Attention {
    int wq = -1;
    int wk = -1;
    int wv = -1;
    int wo = -1;
};
struct ConvLayer {
    Linear dilated;
    Linear pointwise;
};
struct Block {
    std::vector<ConvLayer> convs;
    Norm mhi_norm;
    Attention mhi_attn;
    Norm self_norm;
    Attention self_attn;
    Norm cross_norm;
    Norm frame_norm;
    Attention stage_cross;
    Norm ffn_norm;
    Linear ffn_in;
    Linear ffn_out;
    Norm stage_kv_norm;
    Attention frame_cross;
    Norm frame_head_norm;
    Linear frame_head;
    Norm token_head_norm;
    Linear token_head;
    Linear trans_head;
};

enum class Init { FanIn, Zero, One, Token };

// Unit-scale token embeddings. The tokens pass straight into layer norm, whose
// curvature grows like 1/std^3; at std 0.02 a 1e-4 finite-difference step is
// already far from linear.
constexpr double kTokenInitStd = 1.0;

struct Spec {
    std::string name;
    int rows;
    int cols;
    Init init;
    int fan_in;
};

// Single source of truth for parameter order, shapes and initialization.
struct Layout {
    Linear input;
    Linear mhi_input;
    int tokens = -1;
    std::vector<Block> blocks;
    std::vector<Spec> specs;

    int add(std::string name, int rows, int cols, Init init, int fan_in = 0) {
        specs.push_back({std::move(name), rows, cols, init, fan_in});
        return static_cast<int>(specs.size()) - 1;
    }
    Linear linear(const std::string& name, int in, int out) {
        return {add(name + ".w", in, out, Init::FanIn, in), add(name + ".b", 1, out, Init::Zero)};
    }
    Norm norm(const std::string& name, int dim) {
        return {add(name + ".gamma", 1, dim, Init::One), add(name + ".beta", 1, dim, Init::Zero)};
    }
    Attention attention(const std::string& name, int dim) {
        return {add(name + ".wq", dim, dim, Init::FanIn, dim), add(name + ".wk", dim, dim, Init::FanIn, dim),
                add(name + ".wv", dim, dim, Init::FanIn, dim), add(name + ".wo", dim, dim, Init::FanIn, dim)};
    }

    explicit Layout(const ModelConfig& c) {
        const int d = c.hidden_dim;
        input = linear("input_proj", c.input_dim, d);
        if (c.use_mhi) {
            mhi_input = linear("mhi_proj", c.mhi_dim, d);
        }
        tokens = add("stage_tokens", c.num_tokens, d, Init::Token);
        for (int b = 0; b < c.num_blocks; ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            Block blk;
            for (std::size_t l = 0; l < c.dilations.size(); ++l) {
                const std::string q = p + "conv" + std::to_string(l);
                blk.convs.push_back({linear(q + ".dilated", 3 * d, d), linear(q + ".pointwise", d, d)});
            }
            if (c.use_mhi) {
                blk.mhi_norm = norm(p + "mhi_norm", d);
                blk.mhi_attn = attention(p + "mhi_attn", d);
            }
            blk.self_norm = norm(p + "self_norm", d);
            blk.self_attn = attention(p + "self_attn", d);
            blk.cross_norm = norm(p + "cross_norm", d);
            blk.frame_norm = norm(p + "frame_norm", d);
            blk.stage_cross = attention(p + "stage_cross", d);
            blk.ffn_norm = norm(p + "ffn_norm", d);
            blk.ffn_in = linear(p + "ffn_in", d, c.ffn_dim());
            blk.ffn_out = linear(p + "ffn_out", c.ffn_dim(), d);
            blk.stage_kv_norm = norm(p + "stage_kv_norm", d);
            blk.frame_cross = attention(p + "frame_cross", d);
            blk.frame_head_norm = norm(p + "frame_head_norm", d);
            blk.frame_head = linear(p + "frame_head", d, c.num_stages);
            blk.token_head_norm = norm(p + "token_head_norm", d);
            blk.token_head = linear(p + "token_head", d, c.num_stages + 1);
            blk.trans_head = linear(p + "trans_head", 2 * d, 2);
            blocks.push_back(std::move(blk));
        }
    }
};

} // namespace

std::size_t parameter_count(const ModelConfig& c) {
    const std::size_t d = static_cast<std::size_t>(c.hidden_dim);
    const std::size_t s = static_cast<std::size_t>(c.num_stages);
    const std::size_t f = static_cast<std::size_t>(c.ffn_dim());
    const std::size_t layers = c.dilations.size();
    std::size_t n = c.input_dim * d + d + c.num_tokens * d;
    if (c.use_mhi) {
        n += c.mhi_dim * d + d;
    }
    std::size_t block = layers * (3 * d * d + d + d * d + d);
    if (c.use_mhi) {
        block += 2 * d + 4 * d * d;
    }
    block += 2 * d + 4 * d * d;                  // stage self-attention
    block += 4 * d + 4 * d * d;                  // stage-query cross-attention
    block += 2 * d + d * f + f + f * d + d;      // stage feed-forward
    block += 2 * d + 4 * d * d;                  // frame-query cross-attention
    block += 2 * d + d * s + s;                  // frame head
    block += 2 * d + d * (s + 1) + (s + 1);      // token head
    block += 2 * d * 2 + 2;                      // transferability head
    return n + c.num_blocks * block;
}

Parameters init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    const Layout layout(config);
    Rng rng(derive_seed(seed, SeedStream::ModelInit));
    Parameters params;
    for (const auto& spec : layout.specs) {
        Matrix m(spec.rows, spec.cols);
        switch (spec.init) {
        case Init::Zero: m.setZero(); break;
        case Init::One: m.setOnes(); break;
        case Init::Token:
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                m.data()[i] = rng.normal(0.0, kTokenInitStd);
            }
            break;
        case Init::FanIn: {
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                m.data()[i] = rng.uniform(-bound, bound);
            }
            break;
        }
        }
        params.names.push_back(spec.name);
        params.tensors.push_back(std::move(m));
    }
    return params;
}

Matrix sinusoidal_encoding(int length, int dim) {
    Matrix pe(length, dim);
    for (int t = 0; t < length; ++t) {
        for (int i = 0; i < dim; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
            pe(t, i) = (i % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
        }
    }
    return pe;
}

std::pair<Var, Var> cross_attention(Var queries, Var keys, Var values, Var wq, Var wk, Var wv, Var wo, int heads) {
    require(keys.rows() == values.rows(), ErrorKind::Shape, "key and value lengths differ");
    const Var q = ad::matmul(queries, wq);
    const Var k = ad::matmul(keys, wk);
    const Var v = ad::matmul(values, wv);
    const Var probs = ad::attention_probs(q, k, heads);
    const Var mixed = ad::attention_mix(probs, v, heads);
    return {ad::matmul(mixed, wo), ad::head_mean(probs, heads)};
}

AttentionResult cross_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                                const AttentionWeights& w, int heads) {
    require(queries.cols() == w.wq.rows() && keys.cols() == w.wk.rows() && values.cols() == w.wv.rows(),
            ErrorKind::Shape, "attention input dims do not match projections");
    require(w.wq.cols() % heads == 0, ErrorKind::Shape, "projection width not divisible by heads");
    Graph g;
    const auto [out, weights] =
        cross_attention(g.constant(queries), g.constant(keys), g.constant(values), g.constant(w.wq),
                        g.constant(w.wk), g.constant(w.wv), g.constant(w.wo), heads);
    return {out.value(), weights.value()};
}

Var transferability_head(Var frame_tokens, Var stage_tokens, Var weight, Var bias) {
    const Var pooled = ad::concat_cols(ad::mean_rows(frame_tokens), ad::mean_rows(stage_tokens));
    return ad::softmax_rows(ad::add_row(ad::matmul(pooled, weight), bias));
}

namespace {

struct Bound {
    Graph& g;
    std::vector<Var> p;

    Var operator[](int i) const { return p[static_cast<std::size_t>(i)]; }
    Var linear(Var x, const Linear& l) const { return ad::add_row(ad::matmul(x, (*this)[l.w]), (*this)[l.b]); }
    Var norm(Var x, const Norm& n) const { return ad::layer_norm(x, (*this)[n.gamma], (*this)[n.beta]); }
    std::pair<Var, Var> attend(Var q, Var kv, const Attention& a, int heads) const {
        return cross_attention(q, kv, kv, (*this)[a.wq], (*this)[a.wk], (*this)[a.wv], (*this)[a.wo], heads);
    }
};

Var to_input(Graph& g, const FeatureSequence& seq) {
    Matrix m(seq.length, seq.dim);
    for (int t = 0; t < seq.length; ++t) {
        for (int d = 0; d < seq.dim; ++d) {
            m(t, d) = seq.at(t, d);
        }
    }
    return g.constant(std::move(m));
}

} // namespace

ForwardVars forward(Graph& graph, const ModelConfig& config, const Parameters& params, const FeatureSequence& input,
                    const FeatureSequence* mhi) {
    const Layout layout(config);
    require(params.tensors.size() == layout.specs.size(), ErrorKind::Input,
            "parameter set does not match the model configuration");
    require(input.length >= 1, ErrorKind::Input, "empty feature sequence");
    require(input.dim == config.input_dim, ErrorKind::Shape,
            "input feature dim " + std::to_string(input.dim) + " != configured " + std::to_string(config.input_dim));
    if (config.use_mhi) {
        require(mhi != nullptr, ErrorKind::Input, "model uses MHI fusion but no MHI features were given");
        require(mhi->length == input.length, ErrorKind::Input, "MHI and frame feature lengths differ");
        require(mhi->dim == config.mhi_dim, ErrorKind::Shape, "MHI feature dim does not match configuration");
    }

    Bound P{graph, {}};
    P.p.reserve(params.tensors.size());
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        P.p.push_back(graph.parameter(params.tensors[i], static_cast<int>(i)));
    }

    const int T = input.length;
    const int heads = config.heads;
    const Var pe = graph.constant(sinusoidal_encoding(T, config.hidden_dim));
    Var x = ad::add(P.linear(to_input(graph, input), layout.input), pe);
    Var s = P[layout.tokens];
    Var m;
    if (config.use_mhi) {
        m = ad::add(P.linear(to_input(graph, *mhi), layout.mhi_input), pe);
    }

    ForwardVars out;
    for (const auto& blk : layout.blocks) {
        for (std::size_t l = 0; l < blk.convs.size(); ++l) {
            const Var window = ad::im2col_dilated(x, config.dilations[l]);
            const Var h = ad::gelu(P.linear(window, blk.convs[l].dilated));
            x = ad::add(x, P.linear(h, blk.convs[l].pointwise));
        }
        if (config.use_mhi) {
            x = ad::add(x, P.attend(P.norm(x, blk.mhi_norm), m, blk.mhi_attn, heads).first);
        }

        const Var sn = P.norm(s, blk.self_norm);
        s = ad::add(s, P.attend(sn, sn, blk.self_attn, heads).first);
        const Var xn = P.norm(x, blk.frame_norm);
        const auto [stage_update, stage_map] = P.attend(P.norm(s, blk.cross_norm), xn, blk.stage_cross, heads);
        s = ad::add(s, stage_update);
        s = ad::add(s, P.linear(ad::gelu(P.linear(P.norm(s, blk.ffn_norm), blk.ffn_in)), blk.ffn_out));

        const auto [frame_update, frame_map] = P.attend(xn, P.norm(s, blk.stage_kv_norm), blk.frame_cross, heads);
        x = ad::add(x, frame_update);

        BlockVars bv;
        const Var frame_logits = P.linear(P.norm(x, blk.frame_head_norm), blk.frame_head);
        bv.frame_probs = ad::softmax_rows(frame_logits);
        bv.frame_log_probs = ad::log_softmax_rows(frame_logits);
        bv.token_probs = ad::softmax_rows(P.linear(P.norm(s, blk.token_head_norm), blk.token_head));
        bv.attn_f2s = frame_map;
        bv.attn_s2f = ad::normalize_rows(ad::transpose(stage_map));
        bv.trans_probs = transferability_head(x, s, P[blk.trans_head.w], P[blk.trans_head.b]);
        out.blocks.push_back(bv);
    }
    return out;
}

ForwardOutput values_of(const ForwardVars& vars) {
    ForwardOutput out;
    for (const auto& b : vars.blocks) {
        out.blocks.push_back({b.frame_probs.value(), b.frame_log_probs.value(), b.token_probs.value(),
                              b.attn_f2s.value(), b.attn_s2f.value(), b.trans_probs.value()});
    }
    return out;
}

ForwardOutput forward(const ModelConfig& config, const Parameters& params, const FeatureSequence& input,
                      const FeatureSequence* mhi) {
    Graph g;
    return values_of(forward(g, config, params, input, mhi));
}

int ForwardOutput::predicted_transfer() const {
    const auto& p = blocks.back().trans_probs;
    return p(0, 1) > p(0, 0) ? 1 : 0;
}

std::vector<int> ForwardOutput::predicted_stages() const {
    const auto& p = blocks.back().frame_probs;
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
        Eigen::Index arg = 0;
        p.row(t).maxCoeff(&arg);
        out[static_cast<std::size_t>(t)] = static_cast<int>(arg);
    }
    return out;
}

} // namespace transfact
