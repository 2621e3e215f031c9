// Dense row-major tensors and a tape-based reverse-mode autodiff graph.
// Everything is 64-bit; sequence activations use the [channels, batch, time]
// layout so convolutions lower to a single GEMM per layer.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace azil {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(count(shape), 0.0);
    }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw std::invalid_argument("tensor data length does not match shape");
    }

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("negative dimension");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = v;
        return t;
    }

    size_t size() const { return data.size(); }

    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // 2-D accessors (most graph tensors are matrices)
    double& at(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }
};

// ---------------------------------------------------------------------------
// GEMM kernels. C is MxN. nn: A[MxK] B[KxN]; nt: A[MxK] B[NxK] (B transposed);
// tn: A[KxM] (A transposed) B[KxN]. All accumulate into C.
// ---------------------------------------------------------------------------

inline void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

inline void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<size_t>(p) * m;
        const double* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Autodiff graph
// ---------------------------------------------------------------------------

struct Node;
using VarPtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated only when requires_grad
    std::vector<VarPtr> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;

    explicit Node(Tensor v, bool rg = false) : value(std::move(v)), requires_grad(rg) {
        if (requires_grad) grad = Tensor(value.shape);
    }

    void zero_grad() {
        if (requires_grad)
            std::fill(grad.data.begin(), grad.data.end(), 0.0);
    }
};

/// Trainable leaf living outside any one graph.
inline VarPtr make_param(Tensor init) { return std::make_shared<Node>(std::move(init), true); }

/// Constant leaf.
inline VarPtr make_const(Tensor v) { return std::make_shared<Node>(std::move(v), false); }

/// One forward pass's tape. Node creation order is a topological order, so
/// the backward sweep is a reverse iteration.
class Graph {
public:
    VarPtr input(Tensor v) { return track(std::make_shared<Node>(std::move(v), false)); }

    VarPtr matmul(const VarPtr& a, const VarPtr& b) {
        check2(a, "matmul lhs");
        check2(b, "matmul rhs");
        int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
        if (b->value.dim(0) != k) throw std::invalid_argument("matmul inner dim mismatch");
        auto out = fresh({m, n}, {a, b});
        gemm_nn(a->value.data.data(), b->value.data.data(), out->value.data.data(), m, k, n);
        out->backward_fn = [m, k, n](Node& node) {
            Node* A = node.parents[0].get();
            Node* B = node.parents[1].get();
            if (A->requires_grad)
                gemm_nt(node.grad.data.data(), B->value.data.data(), A->grad.data.data(), m, n, k);
            if (B->requires_grad)
                gemm_tn(A->value.data.data(), node.grad.data.data(), B->grad.data.data(), k, m, n);
        };
        return track(out);
    }

    /// W[O,I] x[I,B] + bias[O] broadcast over columns.
    VarPtr linear(const VarPtr& w, const VarPtr& x, const VarPtr& bias) {
        check2(w, "linear weight");
        check2(x, "linear input");
        int o = w->value.dim(0), in = w->value.dim(1), b = x->value.dim(1);
        if (x->value.dim(0) != in) throw std::invalid_argument("linear input dim mismatch");
        if (static_cast<int>(bias->value.size()) != o)
            throw std::invalid_argument("linear bias dim mismatch");
        auto out = fresh({o, b}, {w, x, bias});
        gemm_nn(w->value.data.data(), x->value.data.data(), out->value.data.data(), o, in, b);
        for (int i = 0; i < o; ++i) {
            double bv = bias->value.data[i];
            double* row = out->value.data.data() + static_cast<size_t>(i) * b;
            for (int j = 0; j < b; ++j) row[j] += bv;
        }
        out->backward_fn = [o, in, b](Node& node) {
            Node* W = node.parents[0].get();
            Node* X = node.parents[1].get();
            Node* Bi = node.parents[2].get();
            if (W->requires_grad)
                gemm_nt(node.grad.data.data(), X->value.data.data(), W->grad.data.data(), o, b, in);
            if (X->requires_grad)
                gemm_tn(W->value.data.data(), node.grad.data.data(), X->grad.data.data(), in, o, b);
            if (Bi->requires_grad)
                for (int i = 0; i < o; ++i) {
                    const double* row = node.grad.data.data() + static_cast<size_t>(i) * b;
                    double s = 0.0;
                    for (int j = 0; j < b; ++j) s += row[j];
                    Bi->grad.data[i] += s;
                }
        };
        return track(out);
    }

    VarPtr add(const VarPtr& a, const VarPtr& b) {
        same_shape(a, b, "add");
        auto out = fresh(a->value.shape, {a, b});
        for (size_t i = 0; i < out->value.size(); ++i)
            out->value.data[i] = a->value.data[i] + b->value.data[i];
        out->backward_fn = [](Node& node) {
            for (int p = 0; p < 2; ++p) {
                Node* par = node.parents[p].get();
                if (!par->requires_grad) continue;
                for (size_t i = 0; i < node.grad.size(); ++i)
                    par->grad.data[i] += node.grad.data[i];
            }
        };
        return track(out);
    }

    VarPtr mul(const VarPtr& a, const VarPtr& b) {
        same_shape(a, b, "mul");
        auto out = fresh(a->value.shape, {a, b});
        for (size_t i = 0; i < out->value.size(); ++i)
            out->value.data[i] = a->value.data[i] * b->value.data[i];
        out->backward_fn = [](Node& node) {
            Node* A = node.parents[0].get();
            Node* B = node.parents[1].get();
            for (size_t i = 0; i < node.grad.size(); ++i) {
                double g = node.grad.data[i];
                if (A->requires_grad) A->grad.data[i] += g * B->value.data[i];
                if (B->requires_grad) B->grad.data[i] += g * A->value.data[i];
            }
        };
        return track(out);
    }

    /// x[R,C] scaled per column by s[1,C].
    VarPtr mul_rowbcast(const VarPtr& x, const VarPtr& s) {
        check2(x, "mul_rowbcast input");
        if (s->value.shape != std::vector<int>{1, x->value.dim(1)})
            throw std::invalid_argument("broadcast row must be [1, C]");
        int r = x->value.dim(0), c = x->value.dim(1);
        auto out = fresh({r, c}, {x, s});
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) out->value.at(i, j) = x->value.at(i, j) * s->value.data[j];
        out->backward_fn = [r, c](Node& node) {
            Node* X = node.parents[0].get();
            Node* S = node.parents[1].get();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) {
                    double g = node.grad.at(i, j);
                    if (X->requires_grad) X->grad.at(i, j) += g * S->value.data[j];
                    if (S->requires_grad) S->grad.data[j] += g * X->value.at(i, j);
                }
        };
        return track(out);
    }

    VarPtr scale(const VarPtr& x, double s) {
        auto out = fresh(x->value.shape, {x});
        for (size_t i = 0; i < out->value.size(); ++i) out->value.data[i] = s * x->value.data[i];
        out->backward_fn = [s](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (size_t i = 0; i < node.grad.size(); ++i)
                X->grad.data[i] += s * node.grad.data[i];
        };
        return track(out);
    }

    VarPtr relu(const VarPtr& x) {
        auto out = fresh(x->value.shape, {x});
        for (size_t i = 0; i < out->value.size(); ++i)
            out->value.data[i] = x->value.data[i] > 0.0 ? x->value.data[i] : 0.0;
        out->backward_fn = [](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (size_t i = 0; i < node.grad.size(); ++i)
                if (X->value.data[i] > 0.0) X->grad.data[i] += node.grad.data[i];
        };
        return track(out);
    }

    VarPtr sigmoid(const VarPtr& x) {
        auto out = fresh(x->value.shape, {x});
        for (size_t i = 0; i < out->value.size(); ++i)
            out->value.data[i] = 1.0 / (1.0 + std::exp(-x->value.data[i]));
        out->backward_fn = [](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (size_t i = 0; i < node.grad.size(); ++i) {
                double y = node.value.data[i];
                X->grad.data[i] += node.grad.data[i] * y * (1.0 - y);
            }
        };
        return track(out);
    }

    VarPtr tanh_(const VarPtr& x) {
        auto out = fresh(x->value.shape, {x});
        for (size_t i = 0; i < out->value.size(); ++i)
            out->value.data[i] = std::tanh(x->value.data[i]);
        out->backward_fn = [](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (size_t i = 0; i < node.grad.size(); ++i) {
                double y = node.value.data[i];
                X->grad.data[i] += node.grad.data[i] * (1.0 - y * y);
            }
        };
        return track(out);
    }

    /// Same-length 1-D convolution over the time axis of x[C,B,T] with
    /// kernel W[O,C,K] and bias[O], lowered to one GEMM through im2col.
    VarPtr conv1d_same(const VarPtr& x, const VarPtr& w, const VarPtr& bias) {
        if (x->value.shape.size() != 3) throw std::invalid_argument("conv input must be [C,B,T]");
        if (w->value.shape.size() != 3) throw std::invalid_argument("conv kernel must be [O,C,K]");
        int c = x->value.dim(0), b = x->value.dim(1), t = x->value.dim(2);
        int o = w->value.dim(0), k = w->value.dim(2);
        if (w->value.dim(1) != c) throw std::invalid_argument("conv channel mismatch");
        if (k > t) throw std::invalid_argument("conv kernel longer than sequence");
        if (static_cast<int>(bias->value.size()) != o)
            throw std::invalid_argument("conv bias dim mismatch");
        int pad = (k - 1) / 2;

        // col[(ck*K + kk), (bb*T + tt)] = x[ck, bb, tt + kk - pad]
        auto col = std::make_shared<Tensor>(std::vector<int>{c * k, b * t});
        for (int ck = 0; ck < c; ++ck)
            for (int kk = 0; kk < k; ++kk) {
                double* dst = col->data.data() + (static_cast<size_t>(ck) * k + kk) * (b * t);
                for (int bb = 0; bb < b; ++bb) {
                    const double* src =
                        x->value.data.data() + (static_cast<size_t>(ck) * b + bb) * t;
                    double* drow = dst + static_cast<size_t>(bb) * t;
                    int shift = kk - pad;
                    for (int tt = 0; tt < t; ++tt) {
                        int ti = tt + shift;
                        drow[tt] = (ti >= 0 && ti < t) ? src[ti] : 0.0;
                    }
                }
            }

        auto out = fresh({o, b, t}, {x, w, bias});
        gemm_nn(w->value.data.data(), col->data.data(), out->value.data.data(), o, c * k, b * t);
        for (int oo = 0; oo < o; ++oo) {
            double bv = bias->value.data[oo];
            double* row = out->value.data.data() + static_cast<size_t>(oo) * b * t;
            for (int i = 0; i < b * t; ++i) row[i] += bv;
        }

        out->backward_fn = [c, b, t, o, k, pad, col](Node& node) {
            Node* X = node.parents[0].get();
            Node* W = node.parents[1].get();
            Node* Bi = node.parents[2].get();
            if (W->requires_grad)
                gemm_nt(node.grad.data.data(), col->data.data(), W->grad.data.data(), o, b * t,
                        c * k);
            if (Bi->requires_grad)
                for (int oo = 0; oo < o; ++oo) {
                    const double* row = node.grad.data.data() + static_cast<size_t>(oo) * b * t;
                    double s = 0.0;
                    for (int i = 0; i < b * t; ++i) s += row[i];
                    Bi->grad.data[oo] += s;
                }
            if (X->requires_grad) {
                Tensor dcol({c * k, b * t});
                gemm_tn(W->value.data.data(), node.grad.data.data(), dcol.data.data(), c * k, o,
                        b * t);
                for (int ck = 0; ck < c; ++ck)
                    for (int kk = 0; kk < k; ++kk) {
                        const double* srow =
                            dcol.data.data() + (static_cast<size_t>(ck) * k + kk) * (b * t);
                        int shift = kk - pad;
                        for (int bb = 0; bb < b; ++bb) {
                            double* dst =
                                X->grad.data.data() + (static_cast<size_t>(ck) * b + bb) * t;
                            const double* srw = srow + static_cast<size_t>(bb) * t;
                            for (int tt = 0; tt < t; ++tt) {
                                int ti = tt + shift;
                                if (ti >= 0 && ti < t) dst[ti] += srw[tt];
                            }
                        }
                    }
            }
        };
        return track(out);
    }

    /// Max pooling along the time axis of x[C,B,T]; no padding.
    VarPtr maxpool_time(const VarPtr& x, int k, int stride) {
        if (x->value.shape.size() != 3) throw std::invalid_argument("pool input must be [C,B,T]");
        if (k < 1 || stride < 1) throw std::invalid_argument("pool needs k, stride >= 1");
        int c = x->value.dim(0), b = x->value.dim(1), t = x->value.dim(2);
        if (k > t) throw std::invalid_argument("pool window longer than sequence");
        int t2 = (t - k) / stride + 1;
        auto out = fresh({c, b, t2}, {x});
        auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(c) * b * t2);
        for (int cc = 0; cc < c; ++cc)
            for (int bb = 0; bb < b; ++bb) {
                const double* src = x->value.data.data() + (static_cast<size_t>(cc) * b + bb) * t;
                double* dst = out->value.data.data() + (static_cast<size_t>(cc) * b + bb) * t2;
                int* am = argmax->data() + (static_cast<size_t>(cc) * b + bb) * t2;
                for (int j = 0; j < t2; ++j) {
                    int base = j * stride;
                    double best = src[base];
                    int bi = base;
                    for (int p = 1; p < k; ++p)
                        if (src[base + p] > best) {
                            best = src[base + p];
                            bi = base + p;
                        }
                    dst[j] = best;
                    am[j] = bi;
                }
            }
        out->backward_fn = [c, b, t, t2, argmax](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (int cc = 0; cc < c; ++cc)
                for (int bb = 0; bb < b; ++bb) {
                    double* dst = X->grad.data.data() + (static_cast<size_t>(cc) * b + bb) * t;
                    const double* g = node.grad.data.data() + (static_cast<size_t>(cc) * b + bb) * t2;
                    const int* am = argmax->data() + (static_cast<size_t>(cc) * b + bb) * t2;
                    for (int j = 0; j < t2; ++j) dst[am[j]] += g[j];
                }
        };
        return track(out);
    }

    /// x[C,B,T] -> column matrix [C,B] at time t.
    VarPtr time_slice(const VarPtr& x, int t) {
        if (x->value.shape.size() != 3) throw std::invalid_argument("slice input must be [C,B,T]");
        int c = x->value.dim(0), b = x->value.dim(1), tt = x->value.dim(2);
        if (t < 0 || t >= tt) throw std::invalid_argument("time index out of range");
        auto out = fresh({c, b}, {x});
        for (int cc = 0; cc < c; ++cc)
            for (int bb = 0; bb < b; ++bb)
                out->value.at(cc, bb) = x->value.data[(static_cast<size_t>(cc) * b + bb) * tt + t];
        out->backward_fn = [c, b, tt, t](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (int cc = 0; cc < c; ++cc)
                for (int bb = 0; bb < b; ++bb)
                    X->grad.data[(static_cast<size_t>(cc) * b + bb) * tt + t] +=
                        node.grad.at(cc, bb);
        };
        return track(out);
    }

    VarPtr concat_rows(const VarPtr& a, const VarPtr& b) {
        check2(a, "concat lhs");
        check2(b, "concat rhs");
        if (a->value.dim(1) != b->value.dim(1))
            throw std::invalid_argument("concat column mismatch");
        int r1 = a->value.dim(0), r2 = b->value.dim(0), c = a->value.dim(1);
        auto out = fresh({r1 + r2, c}, {a, b});
        std::copy(a->value.data.begin(), a->value.data.end(), out->value.data.begin());
        std::copy(b->value.data.begin(), b->value.data.end(),
                  out->value.data.begin() + a->value.size());
        out->backward_fn = [r1, r2, c](Node& node) {
            Node* A = node.parents[0].get();
            Node* B = node.parents[1].get();
            size_t na = static_cast<size_t>(r1) * c;
            if (A->requires_grad)
                for (size_t i = 0; i < na; ++i) A->grad.data[i] += node.grad.data[i];
            if (B->requires_grad)
                for (size_t i = 0; i < static_cast<size_t>(r2) * c; ++i)
                    B->grad.data[i] += node.grad.data[na + i];
        };
        return track(out);
    }

    VarPtr slice_rows(const VarPtr& x, int r0, int r1) {
        check2(x, "slice input");
        int r = x->value.dim(0), c = x->value.dim(1);
        if (r0 < 0 || r1 > r || r0 >= r1) throw std::invalid_argument("bad row slice");
        auto out = fresh({r1 - r0, c}, {x});
        std::copy(x->value.data.begin() + static_cast<size_t>(r0) * c,
                  x->value.data.begin() + static_cast<size_t>(r1) * c, out->value.data.begin());
        out->backward_fn = [r0, c](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            size_t off = static_cast<size_t>(r0) * c;
            for (size_t i = 0; i < node.grad.size(); ++i) X->grad.data[off + i] += node.grad.data[i];
        };
        return track(out);
    }

    /// Elementwise mean of same-shaped vars.
    VarPtr mean_vars(const std::vector<VarPtr>& xs) {
        if (xs.empty()) throw std::invalid_argument("mean of nothing");
        for (const auto& x : xs) same_shape(x, xs.front(), "mean_vars");
        auto out = fresh(xs.front()->value.shape, xs);
        double inv = 1.0 / static_cast<double>(xs.size());
        for (const auto& x : xs)
            for (size_t i = 0; i < out->value.size(); ++i)
                out->value.data[i] += inv * x->value.data[i];
        out->backward_fn = [inv](Node& node) {
            for (auto& p : node.parents) {
                if (!p->requires_grad) continue;
                for (size_t i = 0; i < node.grad.size(); ++i)
                    p->grad.data[i] += inv * node.grad.data[i];
            }
        };
        return track(out);
    }

    /// Column-wise dot product of a[R,C] and b[R,C], scaled: out[0,c] =
    /// scale * sum_r a[r,c] b[r,c].
    VarPtr rows_dot(const VarPtr& a, const VarPtr& b, double s) {
        same_shape(a, b, "rows_dot");
        int r = a->value.dim(0), c = a->value.dim(1);
        auto out = fresh({1, c}, {a, b});
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                out->value.data[j] += s * a->value.at(i, j) * b->value.at(i, j);
        out->backward_fn = [r, c, s](Node& node) {
            Node* A = node.parents[0].get();
            Node* B = node.parents[1].get();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) {
                    double g = s * node.grad.data[j];
                    if (A->requires_grad) A->grad.at(i, j) += g * B->value.at(i, j);
                    if (B->requires_grad) B->grad.at(i, j) += g * A->value.at(i, j);
                }
        };
        return track(out);
    }

    /// Stack T vars of shape [1,C] into [T,C].
    VarPtr vstack(const std::vector<VarPtr>& rows) {
        if (rows.empty()) throw std::invalid_argument("vstack of nothing");
        int c = rows.front()->value.dim(1);
        for (const auto& r : rows)
            if (r->value.shape != std::vector<int>{1, c})
                throw std::invalid_argument("vstack rows must be [1,C]");
        auto out = fresh({static_cast<int>(rows.size()), c}, rows);
        for (size_t t = 0; t < rows.size(); ++t)
            std::copy(rows[t]->value.data.begin(), rows[t]->value.data.end(),
                      out->value.data.begin() + t * static_cast<size_t>(c));
        out->backward_fn = [c](Node& node) {
            for (size_t t = 0; t < node.parents.size(); ++t) {
                Node* p = node.parents[t].get();
                if (!p->requires_grad) continue;
                for (int j = 0; j < c; ++j)
                    p->grad.data[j] += node.grad.data[t * static_cast<size_t>(c) + j];
            }
        };
        return track(out);
    }

    /// Softmax over rows, independently per column.
    VarPtr softmax_cols(const VarPtr& x) {
        check2(x, "softmax input");
        int r = x->value.dim(0), c = x->value.dim(1);
        auto out = fresh({r, c}, {x});
        for (int j = 0; j < c; ++j) {
            double mx = x->value.at(0, j);
            for (int i = 1; i < r; ++i) mx = std::max(mx, x->value.at(i, j));
            double z = 0.0;
            for (int i = 0; i < r; ++i) z += std::exp(x->value.at(i, j) - mx);
            for (int i = 0; i < r; ++i) out->value.at(i, j) = std::exp(x->value.at(i, j) - mx) / z;
        }
        out->backward_fn = [r, c](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (int j = 0; j < c; ++j) {
                double dot = 0.0;
                for (int i = 0; i < r; ++i) dot += node.grad.at(i, j) * node.value.at(i, j);
                for (int i = 0; i < r; ++i)
                    X->grad.at(i, j) += node.value.at(i, j) * (node.grad.at(i, j) - dot);
            }
        };
        return track(out);
    }

    VarPtr row(const VarPtr& x, int t) {
        check2(x, "row input");
        return slice_rows(x, t, t + 1);
    }

    /// Per-column L2 normalization of x[R,C]; zero columns stay zero.
    VarPtr l2_normalize_cols(const VarPtr& x, double eps = 1e-12) {
        check2(x, "normalize input");
        int r = x->value.dim(0), c = x->value.dim(1);
        auto norms = std::make_shared<std::vector<double>>(c, 0.0);
        auto out = fresh({r, c}, {x});
        for (int j = 0; j < c; ++j) {
            double s = 0.0;
            for (int i = 0; i < r; ++i) s += x->value.at(i, j) * x->value.at(i, j);
            double n = std::sqrt(s);
            (*norms)[j] = n < eps ? eps : n;
            for (int i = 0; i < r; ++i) out->value.at(i, j) = x->value.at(i, j) / (*norms)[j];
        }
        out->backward_fn = [r, c, norms](Node& node) {
            Node* X = node.parents[0].get();
            if (!X->requires_grad) return;
            for (int j = 0; j < c; ++j) {
                double dot = 0.0;
                for (int i = 0; i < r; ++i) dot += node.grad.at(i, j) * node.value.at(i, j);
                for (int i = 0; i < r; ++i)
                    X->grad.at(i, j) +=
                        (node.grad.at(i, j) - node.value.at(i, j) * dot) / (*norms)[j];
            }
        };
        return track(out);
    }

    /// Weighted binary cross-entropy against constant targets, summed over
    /// bins with per-bin weights, averaged over the batch. Probabilities are
    /// clamped to [eps, 1-eps] inside the op.
    VarPtr weighted_bce(const VarPtr& probs, const Tensor& targets,
                        const std::vector<double>& weights, double eps = 1e-7) {
        check2(probs, "bce probs");
        int kbins = probs->value.dim(0), b = probs->value.dim(1);
        if (targets.shape != probs->value.shape)
            throw std::invalid_argument("bce target shape mismatch");
        if (static_cast<int>(weights.size()) != kbins)
            throw std::invalid_argument("bce weight count mismatch");
        auto out = fresh({1, 1}, {probs});
        double loss = 0.0;
        for (int i = 0; i < kbins; ++i)
            for (int j = 0; j < b; ++j) {
                double p = std::clamp(probs->value.at(i, j), eps, 1.0 - eps);
                double y = targets.at(i, j);
                loss -= weights[i] * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
            }
        out->value.data[0] = loss / b;
        Tensor tcopy = targets;
        std::vector<double> wcopy = weights;
        out->backward_fn = [kbins, b, eps, tcopy = std::move(tcopy),
                            wcopy = std::move(wcopy)](Node& node) {
            Node* P = node.parents[0].get();
            if (!P->requires_grad) return;
            double g = node.grad.data[0] / b;
            for (int i = 0; i < kbins; ++i)
                for (int j = 0; j < b; ++j) {
                    double raw = P->value.at(i, j);
                    if (raw < eps || raw > 1.0 - eps) continue;  // clamp is flat
                    double y = tcopy.at(i, j);
                    P->grad.at(i, j) -= g * wcopy[i] * (y / raw - (1.0 - y) / (1.0 - raw));
                }
        };
        return track(out);
    }

    /// Mean negative log softmax over the batch: logits[C,B], labels[B].
    VarPtr softmax_ce(const VarPtr& logits, const std::vector<int>& labels) {
        check2(logits, "ce logits");
        int c = logits->value.dim(0), b = logits->value.dim(1);
        if (static_cast<int>(labels.size()) != b)
            throw std::invalid_argument("ce label count mismatch");
        for (int l : labels)
            if (l < 0 || l >= c) throw std::invalid_argument("class label out of range");
        auto out = fresh({1, 1}, {logits});
        auto soft = std::make_shared<Tensor>(std::vector<int>{c, b});
        double loss = 0.0;
        for (int j = 0; j < b; ++j) {
            double mx = logits->value.at(0, j);
            for (int i = 1; i < c; ++i) mx = std::max(mx, logits->value.at(i, j));
            double z = 0.0;
            for (int i = 0; i < c; ++i) z += std::exp(logits->value.at(i, j) - mx);
            for (int i = 0; i < c; ++i) soft->at(i, j) = std::exp(logits->value.at(i, j) - mx) / z;
            loss -= std::log(std::max(soft->at(labels[j], j), 1e-300));
        }
        out->value.data[0] = loss / b;
        std::vector<int> lcopy = labels;
        out->backward_fn = [c, b, soft, lcopy = std::move(lcopy)](Node& node) {
            Node* L = node.parents[0].get();
            if (!L->requires_grad) return;
            double g = node.grad.data[0] / b;
            for (int j = 0; j < b; ++j)
                for (int i = 0; i < c; ++i)
                    L->grad.at(i, j) += g * (soft->at(i, j) - (i == lcopy[j] ? 1.0 : 0.0));
        };
        return track(out);
    }

    /// Reverse sweep from a scalar (or any) node: seeds with ones.
    void backward(const VarPtr& loss) {
        if (!loss->requires_grad)
            throw std::invalid_argument("backward from a non-differentiable node");
        if (loss->value.size() != 1)
            throw std::invalid_argument("backward expects a scalar loss");
        std::fill(loss->grad.data.begin(), loss->grad.data.end(), 1.0);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node& n = **it;
            if (n.requires_grad && n.backward_fn) n.backward_fn(n);
        }
    }

    size_t node_count() const { return nodes_.size(); }

private:
    std::vector<VarPtr> nodes_;

    VarPtr track(VarPtr n) {
#ifdef AZIL_DEBUG_NAN
        if (!n->value.all_finite()) throw std::runtime_error("non-finite tensor value");
#endif
        nodes_.push_back(n);
        return n;
    }

    VarPtr fresh(std::vector<int> shape, std::vector<VarPtr> parents) {
        bool rg = false;
        for (const auto& p : parents) rg = rg || p->requires_grad;
        auto n = std::make_shared<Node>(Tensor(std::move(shape)), rg);
        n->parents = std::move(parents);
        return n;
    }

    static void check2(const VarPtr& x, const char* what) {
        if (x->value.shape.size() != 2)
            throw std::invalid_argument(std::string(what) + " must be a matrix");
    }

    static void same_shape(const VarPtr& a, const VarPtr& b, const char* what) {
        if (a->value.shape != b->value.shape)
            throw std::invalid_argument(std::string(what) + " shape mismatch");
    }
};

}  // namespace azil
