#include "transfact/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "transfact/error.hpp"

namespace transfact::ad {

const Matrix& Var::value() const { return graph->value(*this); }

Var Graph::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(const Matrix& storage, int param_index) {
    Node n;
    n.external = &storage;
    n.requires_grad = true;
    n.param_index = param_index;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::make(Matrix value, std::span<const Var> parents, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (const Var& p : parents) {
        if (nodes_[p.id].requires_grad) {
            n.requires_grad = true;
        }
    }
    if (n.requires_grad) {
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward(Var output) {
    Node& out = nodes_[output.id];
    require(node_value(out).size() == 1, ErrorKind::Shape, "backward needs a scalar output");
    require(std::isfinite(node_value(out)(0, 0)), ErrorKind::Numeric, "non-finite loss");
    for (auto& n : nodes_) {
        n.has_grad = false;
    }
    accumulate(output, Matrix::Ones(1, 1));
    for (int i = output.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.has_grad && n.backward) {
            // The callback may touch other nodes' gradients but never this
            // node's, so a copy is not needed.
            n.backward(*this, n.grad);
        }
    }
}

Matrix Graph::grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (!n.has_grad) {
        return Matrix::Zero(node_value(n).rows(), node_value(n).cols());
    }
    return n.grad;
}

void Graph::collect_parameter_grads(std::span<Matrix> grads) const {
    for (const auto& n : nodes_) {
        if (n.param_index >= 0 && n.has_grad) {
            grads[static_cast<std::size_t>(n.param_index)] += n.grad;
        }
    }
}

namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void check(bool cond, const char* op, const Matrix& a, const Matrix& b) {
    if (!cond) {
        fail(ErrorKind::Shape, std::string(op) + ": incompatible shapes " + shape(a) + " and " + shape(b));
    }
}

} // namespace

Var matmul(Var a, Var b) {
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    check(A.cols() == B.rows(), "matmul", A, B);
    Matrix out = A * B;
    return a.graph->make(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& go) {
        if (g.requires_grad(a)) {
            g.accumulate(a, go * g.value(b).transpose());
        }
        if (g.requires_grad(b)) {
            g.accumulate(b, g.value(a).transpose() * go);
        }
    });
}

Var matmul_nt(Var a, Var b) {
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    check(A.cols() == B.cols(), "matmul_nt", A, B);
    Matrix out = A * B.transpose();
    return a.graph->make(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& go) {
        if (g.requires_grad(a)) {
            g.accumulate(a, go * g.value(b));
        }
        if (g.requires_grad(b)) {
            g.accumulate(b, go.transpose() * g.value(a));
        }
    });
}

Var add(Var a, Var b) {
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    check(A.rows() == B.rows() && A.cols() == B.cols(), "add", A, B);
    Matrix out = A + B;
    return a.graph->make(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& go) {
        g.accumulate(a, go);
        g.accumulate(b, go);
    });
}

Var add_row(Var a, Var row) {
    const Matrix& A = a.value();
    const Matrix& R = row.value();
    check(R.rows() == 1 && R.cols() == A.cols(), "add_row", A, R);
    Matrix out = A.rowwise() + R.row(0);
    return a.graph->make(std::move(out), {a, row}, [a, row](Graph& g, const Matrix& go) {
        g.accumulate(a, go);
        if (g.requires_grad(row)) {
            g.accumulate(row, go.colwise().sum());
        }
    });
}

Var scale(Var a, double s) {
    Matrix out = a.value() * s;
    return a.graph->make(std::move(out), {a}, [a, s](Graph& g, const Matrix& go) { g.accumulate(a, go * s); });
}

Var gelu(Var a) {
    const Matrix& A = a.value();
    Matrix out(A.rows(), A.cols());
    for (Eigen::Index i = 0; i < A.size(); ++i) {
        const double x = A.data()[i];
        out.data()[i] = 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    }
    return a.graph->make(std::move(out), {a}, [a](Graph& g, const Matrix& go) {
        const Matrix& X = g.value(a);
        Matrix d(X.rows(), X.cols());
        const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
        for (Eigen::Index i = 0; i < X.size(); ++i) {
            const double x = X.data()[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            d.data()[i] = go.data()[i] * (cdf + x * pdf);
        }
        g.accumulate(a, d);
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Matrix& X = x.value();
    const Matrix& G = gamma.value();
    const Matrix& B = beta.value();
    check(G.rows() == 1 && G.cols() == X.cols(), "layer_norm", X, G);
    check(B.rows() == 1 && B.cols() == X.cols(), "layer_norm", X, B);
    const auto n = static_cast<double>(X.cols());
    Matrix xhat(X.rows(), X.cols());
    Eigen::VectorXd inv_std(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double mean = X.row(r).mean();
        const double var = (X.row(r).array() - mean).square().sum() / n;
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (X.row(r).array() - mean) * inv_std(r);
    }
    Matrix out = (xhat.array().rowwise() * G.row(0).array()).rowwise() + B.row(0).array();
    return x.graph->make(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n](
                             Graph& g, const Matrix& go) {
                             if (g.requires_grad(gamma)) {
                                 g.accumulate(gamma, (go.array() * xhat.array()).colwise().sum().matrix());
                             }
                             if (g.requires_grad(beta)) {
                                 g.accumulate(beta, go.colwise().sum());
                             }
                             if (g.requires_grad(x)) {
                                 const Matrix dxhat = go.array().rowwise() * g.value(gamma).row(0).array();
                                 Matrix dx(dxhat.rows(), dxhat.cols());
                                 for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                                     const double m1 = dxhat.row(r).sum() / n;
                                     const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
                                     dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                                 }
                                 g.accumulate(x, dx);
                             }
                         });
}

namespace {

Matrix softmax_of(const Matrix& A) {
    Matrix P(A.rows(), A.cols());
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        const double mx = A.row(r).maxCoeff();
        P.row(r) = (A.row(r).array() - mx).exp();
        P.row(r) /= P.row(r).sum();
    }
    return P;
}

// dS = P .* (dP - rowsum(dP .* P))
Matrix softmax_backward(const Matrix& P, const Matrix& dP) {
    const Eigen::VectorXd dots = (dP.array() * P.array()).rowwise().sum();
    return P.array() * (dP.colwise() - dots).array();
}

} // namespace

Var softmax_rows(Var a) {
    Matrix P = softmax_of(a.value());
    const int self = static_cast<int>(a.graph->size());
    return a.graph->make(std::move(P), {a}, [a, self](Graph& g, const Matrix& go) {
        const Matrix& P = g.value(Var{&g, self});
        g.accumulate(a, softmax_backward(P, go));
    });
}

Var log_softmax_rows(Var a) {
    const Matrix& A = a.value();
    Matrix out(A.rows(), A.cols());
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        const double mx = A.row(r).maxCoeff();
        const double lse = mx + std::log((A.row(r).array() - mx).exp().sum());
        out.row(r) = A.row(r).array() - lse;
    }
    const int self = static_cast<int>(a.graph->size());
    return a.graph->make(std::move(out), {a}, [a, self](Graph& g, const Matrix& go) {
        const Matrix P = g.value(Var{&g, self}).array().exp();
        const Eigen::VectorXd sums = go.rowwise().sum();
        g.accumulate(a, go - (P.array().colwise() * sums.array()).matrix());
    });
}

Var log_clamped(Var a, double floor) {
    Matrix out = a.value().array().max(floor).log();
    return a.graph->make(std::move(out), {a}, [a, floor](Graph& g, const Matrix& go) {
        const Matrix& A = g.value(a);
        Matrix d = (A.array() > floor).select(go.array() / A.array(), 0.0);
        g.accumulate(a, d);
    });
}

Var transpose(Var a) {
    Matrix out = a.value().transpose();
    return a.graph->make(std::move(out), {a}, [a](Graph& g, const Matrix& go) { g.accumulate(a, go.transpose()); });
}

Var normalize_rows(Var a) {
    const Matrix& A = a.value();
    const Eigen::VectorXd sums = A.rowwise().sum();
    Matrix out = A.array().colwise() / sums.array();
    const int self = static_cast<int>(a.graph->size());
    return a.graph->make(std::move(out), {a}, [a, self, sums](Graph& g, const Matrix& go) {
        const Matrix& Y = g.value(Var{&g, self});
        const Eigen::VectorXd dots = (go.array() * Y.array()).rowwise().sum();
        g.accumulate(a, ((go.colwise() - dots).array().colwise() / sums.array()).matrix());
    });
}

Var mean_rows(Var a) {
    const Matrix& A = a.value();
    Matrix out = A.colwise().mean();
    const auto rows = A.rows();
    return a.graph->make(std::move(out), {a}, [a, rows](Graph& g, const Matrix& go) {
        g.accumulate(a, go.replicate(rows, 1) / static_cast<double>(rows));
    });
}

Var concat_cols(Var a, Var b) {
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    check(A.rows() == B.rows(), "concat_cols", A, B);
    Matrix out(A.rows(), A.cols() + B.cols());
    out << A, B;
    const auto ca = A.cols();
    const auto cb = B.cols();
    return a.graph->make(std::move(out), {a, b}, [a, b, ca, cb](Graph& g, const Matrix& go) {
        g.accumulate(a, go.leftCols(ca));
        g.accumulate(b, go.rightCols(cb));
    });
}

Var im2col_dilated(Var x, int dilation) {
    const Matrix& X = x.value();
    const auto T = X.rows();
    const auto C = X.cols();
    Matrix out = Matrix::Zero(T, 3 * C);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int k = 0; k < 3; ++k) {
            const Eigen::Index src = t + (k - 1) * dilation;
            if (src >= 0 && src < T) {
                out.block(t, k * C, 1, C) = X.row(src);
            }
        }
    }
    return x.graph->make(std::move(out), {x}, [x, dilation, T, C](Graph& g, const Matrix& go) {
        Matrix dx = Matrix::Zero(T, C);
        for (Eigen::Index t = 0; t < T; ++t) {
            for (int k = 0; k < 3; ++k) {
                const Eigen::Index src = t + (k - 1) * dilation;
                if (src >= 0 && src < T) {
                    dx.row(src) += go.block(t, k * C, 1, C);
                }
            }
        }
        g.accumulate(x, dx);
    });
}

Var attention_probs(Var q, Var k, int heads) {
    const Matrix& Q = q.value();
    const Matrix& K = k.value();
    check(Q.cols() == K.cols() && heads > 0 && Q.cols() % heads == 0, "attention_probs", Q, K);
    const auto lq = Q.rows();
    const auto lk = K.rows();
    const auto dh = Q.cols() / heads;
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix P(heads * lq, lk);
    for (int h = 0; h < heads; ++h) {
        const Matrix scores = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * s;
        P.middleRows(h * lq, lq) = softmax_of(scores);
    }
    const int self = static_cast<int>(q.graph->size());
    return q.graph->make(std::move(P), {q, k}, [q, k, heads, lq, dh, s, self](Graph& g, const Matrix& go) {
        const Matrix& P = g.value(Var{&g, self});
        const Matrix& Q = g.value(q);
        const Matrix& K = g.value(k);
        Matrix dq = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dk = Matrix::Zero(K.rows(), K.cols());
        for (int h = 0; h < heads; ++h) {
            const Matrix dS = softmax_backward(P.middleRows(h * lq, lq), go.middleRows(h * lq, lq)) * s;
            dq.middleCols(h * dh, dh) = dS * K.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh) = dS.transpose() * Q.middleCols(h * dh, dh);
        }
        g.accumulate(q, dq);
        g.accumulate(k, dk);
    });
}

Var attention_mix(Var probs, Var v, int heads) {
    const Matrix& P = probs.value();
    const Matrix& V = v.value();
    check(heads > 0 && P.rows() % heads == 0 && P.cols() == V.rows() && V.cols() % heads == 0, "attention_mix", P,
          V);
    const auto lq = P.rows() / heads;
    const auto dh = V.cols() / heads;
    Matrix out(lq, V.cols());
    for (int h = 0; h < heads; ++h) {
        out.middleCols(h * dh, dh) = P.middleRows(h * lq, lq) * V.middleCols(h * dh, dh);
    }
    return probs.graph->make(std::move(out), {probs, v}, [probs, v, heads, lq, dh](Graph& g, const Matrix& go) {
        const Matrix& P = g.value(probs);
        const Matrix& V = g.value(v);
        Matrix dp(P.rows(), P.cols());
        Matrix dv = Matrix::Zero(V.rows(), V.cols());
        for (int h = 0; h < heads; ++h) {
            dp.middleRows(h * lq, lq) = go.middleCols(h * dh, dh) * V.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh) = P.middleRows(h * lq, lq).transpose() * go.middleCols(h * dh, dh);
        }
        g.accumulate(probs, dp);
        g.accumulate(v, dv);
    });
}

Var head_mean(Var probs, int heads) {
    const Matrix& P = probs.value();
    require(heads > 0 && P.rows() % heads == 0, ErrorKind::Shape, "head_mean: rows not divisible by heads");
    const auto lq = P.rows() / heads;
    Matrix out = Matrix::Zero(lq, P.cols());
    for (int h = 0; h < heads; ++h) {
        out += P.middleRows(h * lq, lq);
    }
    out /= heads;
    return probs.graph->make(std::move(out), {probs}, [probs, heads](Graph& g, const Matrix& go) {
        g.accumulate(probs, go.replicate(heads, 1) / static_cast<double>(heads));
    });
}

Var pick_sum(Var a, std::vector<Pick> picks) {
    const Matrix& A = a.value();
    double total = 0.0;
    for (const auto& p : picks) {
        require(p.row >= 0 && p.row < A.rows() && p.col >= 0 && p.col < A.cols(), ErrorKind::Index,
                "pick_sum index out of range");
        total += p.coef * A(p.row, p.col);
    }
    Matrix out(1, 1);
    out(0, 0) = total;
    return a.graph->make(std::move(out), {a}, [a, picks = std::move(picks)](Graph& g, const Matrix& go) {
        const Matrix& A = g.value(a);
        Matrix d = Matrix::Zero(A.rows(), A.cols());
        for (const auto& p : picks) {
            d(p.row, p.col) += p.coef * go(0, 0);
        }
        g.accumulate(a, d);
    });
}

Var weighted_sum(std::span<const std::pair<Var, double>> terms) {
    require(!terms.empty(), ErrorKind::InsufficientInput, "weighted_sum of nothing");
    Graph* graph = terms.front().first.graph;
    double total = 0.0;
    for (const auto& [v, w] : terms) {
        require(v.value().size() == 1, ErrorKind::Shape, "weighted_sum needs 1x1 terms");
        total += w * v.value()(0, 0);
    }
    Matrix out(1, 1);
    out(0, 0) = total;
    std::vector<std::pair<Var, double>> copy(terms.begin(), terms.end());
    std::vector<Var> parents;
    for (const auto& term : copy) {
        parents.push_back(term.first);
    }
    return graph->make(std::move(out), parents, [copy = std::move(copy)](Graph& g, const Matrix& go) {
        for (const auto& [v, w] : copy) {
            g.accumulate(v, go * w);
        }
    });
}

Var truncated_tmse(Var a, double clamp) {
    const Matrix& A = a.value();
    require(A.rows() >= 2, ErrorKind::InsufficientInput, "truncated_tmse needs at least 2 rows");
    const double norm = 1.0 / static_cast<double>((A.rows() - 1) * A.cols());
    const Matrix diff = A.bottomRows(A.rows() - 1) - A.topRows(A.rows() - 1);
    const Matrix clipped = diff.array().abs().min(clamp);
    Matrix out(1, 1);
    out(0, 0) = clipped.array().square().sum() * norm;
    return a.graph->make(std::move(out), {a}, [a, diff, clamp, norm](Graph& g, const Matrix& go) {
        const Matrix dd = (diff.array().abs() < clamp).select(2.0 * diff.array() * norm * go(0, 0), 0.0);
        const Matrix& A = g.value(a);
        Matrix d = Matrix::Zero(A.rows(), A.cols());
        d.bottomRows(A.rows() - 1) += dd;
        d.topRows(A.rows() - 1) -= dd;
        g.accumulate(a, d);
    });
}

double scalar(Var v) { return v.value()(0, 0); }

} // namespace transfact::ad
