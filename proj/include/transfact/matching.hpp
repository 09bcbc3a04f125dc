#pragma once

#include <vector>

#include "transfact/model.hpp"
#include "transfact/videodata.hpp"

namespace transfact {

/// Injective segment -> token assignment.
struct Assignment {
    /// token_of[n] is the token matched to segment n.
    std::vector<int> token_of;
    std::vector<int> unmatched_tokens;
    double total_cost = 0.0;
};

inline constexpr double kProbFloor = 1e-12;

/// cost(n, m) = -log p_token(m, label_n) - mean_{t in segment n} log attn_s2f(t, m),
/// evaluated on one block's outputs.
double match_cost(const Matrix& token_probs, const Matrix& attn_s2f, const Segment& segment, int token);

Matrix match_cost_matrix(const BlockOutput& block, const std::vector<Segment>& segments);

/// Minimum-cost injective assignment of rows to columns (rows <= cols).
/// Among optimal assignments the lexicographically smallest token sequence
/// (token_of[0], token_of[1], ...) is returned.
Assignment match_segments(const Matrix& cost);

} // namespace transfact
