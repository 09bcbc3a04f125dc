#include "transfact/losses.hpp"

#include <iostream>

#include "transfact/error.hpp"

namespace transfact {

using ad::Graph;
using ad::Var;

void LossWeights::validate() const {
    require(trans >= 0 && frame >= 0 && stage >= 0 && cross >= 0 && smooth >= 0, ErrorKind::Config,
            "loss weights must be non-negative");
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    trans += o.trans;
    frame += o.frame;
    stage += o.stage;
    cross_att += o.cross_att;
    smooth += o.smooth;
    total += o.total;
    return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
    return {trans * s, frame * s, stage * s, cross_att * s, smooth * s, total * s};
}

namespace {

Var zero_scalar(Graph& g) { return g.constant(Matrix::Zero(1, 1)); }

Var sum_terms(Graph& g, const std::vector<std::pair<Var, double>>& terms) {
    if (terms.empty()) {
        return zero_scalar(g);
    }
    return ad::weighted_sum(terms);
}

void check_assignment(const Assignment& a, const std::vector<Segment>& segments, Eigen::Index tokens) {
    require(a.token_of.size() == segments.size(), ErrorKind::Index, "assignment does not cover every segment");
    for (int m : a.token_of) {
        require(m >= 0 && m < tokens, ErrorKind::Index, "assignment references token " + std::to_string(m));
    }
    for (int m : a.unmatched_tokens) {
        require(m >= 0 && m < tokens, ErrorKind::Index, "unmatched token " + std::to_string(m) + " out of range");
    }
}

} // namespace

Var loss_trans(const std::vector<Var>& trans_probs, Transfer label) {
    require(!trans_probs.empty(), ErrorKind::InsufficientInput, "no blocks");
    Graph& g = *trans_probs.front().graph;
    const auto col = static_cast<Eigen::Index>(label);
    std::vector<std::pair<Var, double>> terms;
    for (const Var& p : trans_probs) {
        terms.emplace_back(ad::pick_sum(ad::log_clamped(p, kProbFloor), {{0, col, -1.0}}), 1.0);
    }
    return sum_terms(g, terms);
}

Var loss_frame(const std::vector<Var>& frame_probs, const std::vector<StageLabel>& labels) {
    require(!frame_probs.empty(), ErrorKind::InsufficientInput, "no blocks");
    Graph& g = *frame_probs.front().graph;
    const auto T = static_cast<Eigen::Index>(labels.size());
    std::vector<std::pair<Var, double>> terms;
    for (const Var& p : frame_probs) {
        require(p.rows() == T, ErrorKind::Shape, "label count does not match frame count");
        std::vector<ad::Pick> picks;
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto c = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(t)]);
            require(c < p.cols(), ErrorKind::Label, "stage label " + std::to_string(c) + " out of range");
            picks.push_back({t, c, -1.0 / static_cast<double>(T)});
        }
        terms.emplace_back(ad::pick_sum(ad::log_clamped(p, kProbFloor), std::move(picks)), 1.0);
    }
    return sum_terms(g, terms);
}

Var loss_stage(const std::vector<Var>& token_probs, const Assignment& assignment,
               const std::vector<Segment>& segments) {
    require(!token_probs.empty(), ErrorKind::InsufficientInput, "no blocks");
    Graph& g = *token_probs.front().graph;
    const auto M = token_probs.front().rows();
    const auto null_class = token_probs.front().cols() - 1;
    check_assignment(assignment, segments, M);
    std::vector<std::pair<Var, double>> terms;
    for (const Var& p : token_probs) {
        std::vector<ad::Pick> picks;
        const double w = -1.0 / static_cast<double>(M);
        for (std::size_t n = 0; n < segments.size(); ++n) {
            require(segments[n].label < null_class, ErrorKind::Label, "segment label out of range");
            picks.push_back({assignment.token_of[n], segments[n].label, w});
        }
        for (int m : assignment.unmatched_tokens) {
            picks.push_back({m, null_class, w});
        }
        terms.emplace_back(ad::pick_sum(ad::log_clamped(p, kProbFloor), std::move(picks)), 1.0);
    }
    return sum_terms(g, terms);
}

Var loss_cross_att(const std::vector<Var>& attn_s2f, const std::vector<Var>& attn_f2s, const Assignment& assignment,
                   const std::vector<Segment>& segments) {
    require(!attn_s2f.empty() && attn_s2f.size() == attn_f2s.size(), ErrorKind::InsufficientInput,
            "attention maps missing");
    Graph& g = *attn_s2f.front().graph;
    if (attn_s2f.size() == 1) {
        static bool warned = false;
        if (!warned) {
            std::cerr << "warning: cross-attention loss is empty with a single block\n";
            warned = true;
        }
        return zero_scalar(g);
    }
    check_assignment(assignment, segments, attn_s2f.front().cols());
    const auto T = attn_s2f.front().rows();
    std::vector<ad::Pick> picks;
    for (std::size_t n = 0; n < segments.size(); ++n) {
        for (int t = segments[n].start; t < segments[n].end; ++t) {
            picks.push_back({t, assignment.token_of[n], -1.0 / static_cast<double>(T)});
        }
    }
    std::vector<std::pair<Var, double>> terms;
    for (std::size_t b = 1; b < attn_s2f.size(); ++b) {
        terms.emplace_back(ad::pick_sum(ad::log_clamped(attn_s2f[b], kProbFloor), picks), 1.0);
        terms.emplace_back(ad::pick_sum(ad::log_clamped(attn_f2s[b], kProbFloor), picks), 1.0);
    }
    return sum_terms(g, terms);
}

Var loss_smooth(const std::vector<Var>& frame_log_probs) {
    require(!frame_log_probs.empty(), ErrorKind::InsufficientInput, "no blocks");
    Graph& g = *frame_log_probs.front().graph;
    if (frame_log_probs.front().rows() < 2) {
        return zero_scalar(g);
    }
    std::vector<std::pair<Var, double>> terms;
    const double w = 1.0 / static_cast<double>(frame_log_probs.size());
    for (const Var& lp : frame_log_probs) {
        terms.emplace_back(ad::truncated_tmse(lp, kSmoothClamp), w);
    }
    return sum_terms(g, terms);
}

LossBreakdown total_loss(const LossBreakdown& t, const LossWeights& w) {
    w.validate();
    LossBreakdown out = t;
    out.total = w.trans * t.trans + w.frame * t.frame + w.stage * t.stage + w.cross * t.cross_att +
                w.smooth * t.smooth;
    return out;
}

VideoLoss video_loss(const ForwardVars& fwd, const std::vector<StageLabel>& labels, Transfer transfer,
                     const LossWeights& weights, const Assignment* fixed) {
    weights.validate();
    const auto segments = segments_from_framewise(labels);
    std::vector<Var> frame_probs;
    std::vector<Var> frame_log_probs;
    std::vector<Var> token_probs;
    std::vector<Var> s2f;
    std::vector<Var> f2s;
    std::vector<Var> trans;
    for (const auto& b : fwd.blocks) {
        frame_probs.push_back(b.frame_probs);
        frame_log_probs.push_back(b.frame_log_probs);
        token_probs.push_back(b.token_probs);
        s2f.push_back(b.attn_s2f);
        f2s.push_back(b.attn_f2s);
        trans.push_back(b.trans_probs);
    }
    VideoLoss out;
    if (fixed != nullptr) {
        out.assignment = *fixed;
    } else {
        const auto& last = fwd.blocks.back();
        const BlockOutput view{last.frame_probs.value(), Matrix(), last.token_probs.value(),
                               last.attn_f2s.value(), last.attn_s2f.value(), Matrix()};
        out.assignment = match_segments(match_cost_matrix(view, segments));
    }
    const Var lt = loss_trans(trans, transfer);
    const Var lf = loss_frame(frame_probs, labels);
    const Var ls = loss_stage(token_probs, out.assignment, segments);
    const Var lc = loss_cross_att(s2f, f2s, out.assignment, segments);
    const Var lsm = loss_smooth(frame_log_probs);
    const std::vector<std::pair<Var, double>> terms{
        {lt, weights.trans}, {lf, weights.frame}, {ls, weights.stage}, {lc, weights.cross}, {lsm, weights.smooth}};
    out.total = ad::weighted_sum(terms);
    out.breakdown = {ad::scalar(lt), ad::scalar(lf), ad::scalar(ls), ad::scalar(lc), ad::scalar(lsm),
                     ad::scalar(out.total)};
    return out;
}

namespace {

std::vector<Var> bind(Graph& g, const std::vector<Matrix>& ms) {
    std::vector<Var> out;
    for (const auto& m : ms) {
        out.push_back(g.constant(m));
    }
    return out;
}

} // namespace

double loss_trans(const std::vector<Matrix>& trans_probs, Transfer label) {
    Graph g;
    return ad::scalar(loss_trans(bind(g, trans_probs), label));
}

double loss_frame(const std::vector<Matrix>& frame_probs, const std::vector<StageLabel>& labels) {
    Graph g;
    return ad::scalar(loss_frame(bind(g, frame_probs), labels));
}

double loss_stage(const std::vector<Matrix>& token_probs, const Assignment& assignment,
                  const std::vector<Segment>& segments) {
    Graph g;
    return ad::scalar(loss_stage(bind(g, token_probs), assignment, segments));
}

double loss_cross_att(const std::vector<Matrix>& attn_s2f, const std::vector<Matrix>& attn_f2s,
                      const Assignment& assignment, const std::vector<Segment>& segments) {
    Graph g;
    return ad::scalar(loss_cross_att(bind(g, attn_s2f), bind(g, attn_f2s), assignment, segments));
}

double loss_smooth(const std::vector<Matrix>& frame_log_probs) {
    Graph g;
    return ad::scalar(loss_smooth(bind(g, frame_log_probs)));
}

} // namespace transfact
