#pragma once

#include <string>
#include <vector>

#include "transfact/autodiff.hpp"
#include "transfact/matching.hpp"
#include "transfact/model.hpp"
#include "transfact/videodata.hpp"

namespace transfact {

struct LossWeights {
    double trans = 1.0;
    double frame = 1.0;
    double stage = 1.0;
    double cross = 1.0;
    double smooth = 5.0;

    void validate() const;
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
    double trans = 0.0;
    double frame = 0.0;
    double stage = 0.0;
    double cross_att = 0.0;
    double smooth = 0.0;
    double total = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o);
    LossBreakdown scaled(double s) const;
};

inline constexpr double kSmoothClamp = 4.0;

// Graph forms: each takes per-block tensors and returns a 1x1 node.

/// -sum_b log p_b(label)
ad::Var loss_trans(const std::vector<ad::Var>& trans_probs, Transfer label);
/// -(1/T) sum_b sum_t log p_b(t, label_t)
ad::Var loss_frame(const std::vector<ad::Var>& frame_probs, const std::vector<StageLabel>& labels);
/// -(1/M) sum_b [sum_n log p_b(token_n, label_n) + sum_{m unmatched} log p_b(m, null)]
ad::Var loss_stage(const std::vector<ad::Var>& token_probs, const Assignment& assignment,
                   const std::vector<Segment>& segments);
/// -(1/T) sum_{b>1} sum_n sum_{t in n} [log A_s2f(t, token_n) + log A_f2s(t, token_n)].
/// Returns 0 for a single block.
ad::Var loss_cross_att(const std::vector<ad::Var>& attn_s2f, const std::vector<ad::Var>& attn_f2s,
                       const Assignment& assignment, const std::vector<Segment>& segments);
/// Mean over blocks of the truncated temporal MSE of frame log-probabilities.
ad::Var loss_smooth(const std::vector<ad::Var>& frame_log_probs);

struct VideoLoss {
    ad::Var total;
    LossBreakdown breakdown;
    Assignment assignment;
};

/// All five terms for one video. Matching uses the final block and is
/// shared by every block; pass `fixed` to reuse a precomputed assignment.
VideoLoss video_loss(const ForwardVars& fwd, const std::vector<StageLabel>& labels, Transfer transfer,
                     const LossWeights& weights, const Assignment* fixed = nullptr);

LossBreakdown total_loss(const LossBreakdown& terms, const LossWeights& weights);

// Plain-value conveniences (evaluated on a throwaway graph).
double loss_trans(const std::vector<Matrix>& trans_probs, Transfer label);
double loss_frame(const std::vector<Matrix>& frame_probs, const std::vector<StageLabel>& labels);
double loss_stage(const std::vector<Matrix>& token_probs, const Assignment& assignment,
                  const std::vector<Segment>& segments);
double loss_cross_att(const std::vector<Matrix>& attn_s2f, const std::vector<Matrix>& attn_f2s,
                      const Assignment& assignment, const std::vector<Segment>& segments);
double loss_smooth(const std::vector<Matrix>& frame_log_probs);

} // namespace transfact
