#include "transfact/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "transfact/error.hpp"

namespace transfact {

double match_cost(const Matrix& token_probs, const Matrix& attn_s2f, const Segment& segment, int token) {
    require(token >= 0 && token < token_probs.rows() && token < attn_s2f.cols(), ErrorKind::Index,
            "token index out of range");
    require(segment.label < token_probs.cols(), ErrorKind::Label, "segment label out of range");
    require(segment.start >= 0 && segment.end <= attn_s2f.rows() && segment.start < segment.end, ErrorKind::Index,
            "segment outside the attention map");
    double attn = 0.0;
    for (int t = segment.start; t < segment.end; ++t) {
        attn += std::log(std::max(attn_s2f(t, token), kProbFloor));
    }
    return -std::log(std::max(token_probs(token, segment.label), kProbFloor)) - attn / segment.length();
}

Matrix match_cost_matrix(const BlockOutput& block, const std::vector<Segment>& segments) {
    const auto n = static_cast<Eigen::Index>(segments.size());
    const auto m = block.token_probs.rows();
    if (n > m) {
        fail(ErrorKind::Capacity, std::to_string(n) + " segments exceed " + std::to_string(m) + " stage tokens");
    }
    Matrix cost(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            cost(i, j) = match_cost(block.token_probs, block.attn_s2f, segments[static_cast<std::size_t>(i)],
                                    static_cast<int>(j));
        }
    }
    return cost;
}

namespace {

struct Solution {
    std::vector<int> token_of;
    double total = 0.0;
    std::vector<double> u;  // row potentials
    std::vector<double> v;  // column potentials (<= 0, zero on free columns)
};

// Shortest augmenting path Hungarian method for n <= m. Potentials satisfy
// u[i] + v[j] <= cost(i, j) with equality on matched pairs.
Solution hungarian(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(m + 1, 0.0);
    std::vector<int> row_of(m + 1, 0);  // 1-based row matched to column j, 0 = free
    std::vector<int> way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        row_of[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = row_of[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of[j0] != 0);
        do {
            const int j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Solution s;
    s.token_of.assign(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j) {
        if (row_of[j] != 0) {
            s.token_of[static_cast<std::size_t>(row_of[j] - 1)] = j - 1;
        }
    }
    for (int i = 0; i < n; ++i) {
        s.total += cost(i, s.token_of[static_cast<std::size_t>(i)]);
    }
    s.u.assign(u.begin() + 1, u.end());
    s.v.assign(v.begin() + 1, v.end());
    return s;
}

} // namespace

Assignment match_segments(const Matrix& cost) {
    const auto n = cost.rows();
    const auto m = cost.cols();
    if (n > m) {
        fail(ErrorKind::Capacity, std::to_string(n) + " segments exceed " + std::to_string(m) + " tokens");
    }
    if (!cost.allFinite()) {
        fail(ErrorKind::Input, "cost matrix has non-finite entries");
    }
    Assignment out;
    if (n == 0) {
        for (int j = 0; j < m; ++j) {
            out.unmatched_tokens.push_back(j);
        }
        return out;
    }

    Solution best = hungarian(cost);
    const double tol = 1e-9 * (1.0 + std::abs(best.total));

    // Lexicographic tie-break. A pair (n, m) with positive reduced cost
    // cannot appear in any optimal assignment, so only zero-reduced-cost
    // pairs with a smaller token index need an explicit check.
    const double forbid = 1.0 + 2.0 * (cost.cwiseAbs().sum() + 1.0);
    Matrix constrained = cost;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int current = best.token_of[static_cast<std::size_t>(i)];
        for (int j = 0; j < current; ++j) {
            const double reduced = cost(i, j) - best.u[static_cast<std::size_t>(i)] - best.v[static_cast<std::size_t>(j)];
            if (reduced > tol) {
                continue;
            }
            Matrix trial = constrained;
            for (int k = 0; k < m; ++k) {
                if (k != j) {
                    trial(i, k) = forbid;
                }
            }
            Solution s = hungarian(trial);
            if (s.total <= best.total + tol) {
                best = std::move(s);
                break;
            }
        }
        const int chosen = best.token_of[static_cast<std::size_t>(i)];
        for (int k = 0; k < m; ++k) {
            if (k != chosen) {
                constrained(i, k) = forbid;
            }
        }
        // Potentials of the constrained problem stay valid for the
        // reduced-cost filter on later rows.
        best = hungarian(constrained);
    }

    out.token_of = best.token_of;
    out.total_cost = 0.0;
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int j = out.token_of[static_cast<std::size_t>(i)];
        out.total_cost += cost(i, j);
        used[static_cast<std::size_t>(j)] = 1;
    }
    for (int j = 0; j < m; ++j) {
        if (!used[static_cast<std::size_t>(j)]) {
            out.unmatched_tokens.push_back(j);
        }
    }
    return out;
}

} // namespace transfact
