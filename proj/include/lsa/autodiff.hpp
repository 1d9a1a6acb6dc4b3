#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "lsa/mat.hpp"

// Minimal reverse-mode autodiff over dense matrices. One Tape per forward
// pass; ops record a backward closure that routes adjoints to their inputs.
// Parameter tensors live outside the tape and receive gradient contributions
// through ParamRef, so one gradient buffer can accumulate across many tapes.

namespace lsa::ad {

struct ParamRef {
    const Mat* value = nullptr;
    Mat* grad = nullptr;  // may be null for forward-only passes
};

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool ok() const { return tape != nullptr && id >= 0; }
};

class Tape {
public:
    Var input(Mat v) { return make(std::move(v), nullptr); }

    // Leaf aliasing an external tensor; backward adds into its grad buffer.
    Var param(ParamRef p) {
        int id = int(nodes_.size());
        nodes_.push_back(Node{});
        Node& n = nodes_.back();
        n.ext = p.value;
        n.back = [p](Tape& t, int self) {
            if (p.grad) p.grad->add_inplace(t.nodes_[self].grad);
        };
        return Var{this, id};
    }

    // Row gather from an external table; backward scatter-adds rows.
    Var gather_rows(ParamRef table, std::vector<int> idx) {
        const Mat& tab = *table.value;
        Mat out(int(idx.size()), tab.cols());
        for (int r = 0; r < out.rows(); ++r) {
            assert(idx[r] >= 0 && idx[r] < tab.rows());
            std::copy(tab.row_ptr(idx[r]), tab.row_ptr(idx[r]) + tab.cols(), out.row_ptr(r));
        }
        return make(std::move(out), [table, idx = std::move(idx)](Tape& t, int self) {
            if (!table.grad) return;
            const Mat& g = t.nodes_[self].grad;
            for (int r = 0; r < g.rows(); ++r) {
                double* dst = table.grad->row_ptr(idx[r]);
                const double* src = g.row_ptr(r);
                for (int c = 0; c < g.cols(); ++c) dst[c] += src[c];
            }
        });
    }

    Var matmul(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(A.cols() == B.rows());
        Mat C(A.rows(), B.cols());
        for (int i = 0; i < A.rows(); ++i)
            for (int k = 0; k < A.cols(); ++k) {
                double aik = A(i, k);
                if (aik == 0.0) continue;
                const double* brow = B.row_ptr(k);
                double* crow = C.row_ptr(i);
                for (int j = 0; j < B.cols(); ++j) crow[j] += aik * brow[j];
            }
        return make(std::move(C), [a, b](Tape& t, int self) {
            const Mat& dC = t.nodes_[self].grad;
            const Mat& A = t.value(a);
            const Mat& B = t.value(b);
            Mat& dA = t.grad(a);
            Mat& dB = t.grad(b);
            // dA += dC * B^T
            for (int i = 0; i < A.rows(); ++i)
                for (int k = 0; k < A.cols(); ++k) {
                    double s = 0.0;
                    const double* dcrow = dC.row_ptr(i);
                    const double* brow = B.row_ptr(k);
                    for (int j = 0; j < B.cols(); ++j) s += dcrow[j] * brow[j];
                    dA(i, k) += s;
                }
            // dB += A^T * dC
            for (int k = 0; k < B.rows(); ++k)
                for (int i = 0; i < A.rows(); ++i) {
                    double aik = A(i, k);
                    if (aik == 0.0) continue;
                    const double* dcrow = dC.row_ptr(i);
                    double* dbrow = dB.row_ptr(k);
                    for (int j = 0; j < B.cols(); ++j) dbrow[j] += aik * dcrow[j];
                }
        });
    }

    // A (m x k) * B^T (n x k) -> m x n. Linear layers use this with B as the
    // weight matrix stored (out x in).
    Var matmul_nt(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(A.cols() == B.cols());
        Mat C(A.rows(), B.rows());
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < B.rows(); ++j) {
                double s = 0.0;
                const double* arow = A.row_ptr(i);
                const double* brow = B.row_ptr(j);
                for (int k = 0; k < A.cols(); ++k) s += arow[k] * brow[k];
                C(i, j) = s;
            }
        return make(std::move(C), [a, b](Tape& t, int self) {
            const Mat& dC = t.nodes_[self].grad;
            const Mat& A = t.value(a);
            const Mat& B = t.value(b);
            Mat& dA = t.grad(a);
            Mat& dB = t.grad(b);
            // dA += dC * B ; dB += dC^T * A
            for (int i = 0; i < A.rows(); ++i)
                for (int j = 0; j < B.rows(); ++j) {
                    double d = dC(i, j);
                    if (d == 0.0) continue;
                    const double* brow = B.row_ptr(j);
                    double* darow = dA.row_ptr(i);
                    for (int k = 0; k < A.cols(); ++k) darow[k] += d * brow[k];
                    const double* arow = A.row_ptr(i);
                    double* dbrow = dB.row_ptr(j);
                    for (int k = 0; k < A.cols(); ++k) dbrow[k] += d * arow[k];
                }
        });
    }

    Var add(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(A.same_shape(B));
        Mat C = A;
        C.add_inplace(B);
        return make(std::move(C), [a, b](Tape& t, int self) {
            t.grad(a).add_inplace(t.nodes_[self].grad);
            t.grad(b).add_inplace(t.nodes_[self].grad);
        });
    }

    Var sub(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(A.same_shape(B));
        Mat C = A;
        for (size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
        return make(std::move(C), [a, b](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            t.grad(a).add_inplace(d);
            Mat& db = t.grad(b);
            for (size_t i = 0; i < db.size(); ++i) db[i] -= d[i];
        });
    }

    // a (n x d) + b (1 x d) broadcast over rows
    Var add_rowvec(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(B.rows() == 1 && A.cols() == B.cols());
        Mat C = A;
        for (int i = 0; i < C.rows(); ++i)
            for (int j = 0; j < C.cols(); ++j) C(i, j) += B(0, j);
        return make(std::move(C), [a, b](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            t.grad(a).add_inplace(d);
            Mat& db = t.grad(b);
            for (int i = 0; i < d.rows(); ++i)
                for (int j = 0; j < d.cols(); ++j) db(0, j) += d(i, j);
        });
    }

    Var hadamard(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(A.same_shape(B));
        Mat C = A;
        for (size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
        return make(std::move(C), [a, b](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& A = t.value(a);
            const Mat& B = t.value(b);
            Mat& da = t.grad(a);
            Mat& db = t.grad(b);
            for (size_t i = 0; i < d.size(); ++i) {
                da[i] += d[i] * B[i];
                db[i] += d[i] * A[i];
            }
        });
    }

    // alpha * a + beta
    Var affine(Var a, double alpha, double beta) {
        Mat C = value(a);
        for (size_t i = 0; i < C.size(); ++i) C[i] = alpha * C[i] + beta;
        return make(std::move(C), [a, alpha](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            Mat& da = t.grad(a);
            for (size_t i = 0; i < d.size(); ++i) da[i] += alpha * d[i];
        });
    }

    Var scale(Var a, double c) { return affine(a, c, 0.0); }

    Var concat_cols(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(A.rows() == B.rows());
        Mat C(A.rows(), A.cols() + B.cols());
        for (int i = 0; i < A.rows(); ++i) {
            std::copy(A.row_ptr(i), A.row_ptr(i) + A.cols(), C.row_ptr(i));
            std::copy(B.row_ptr(i), B.row_ptr(i) + B.cols(), C.row_ptr(i) + A.cols());
        }
        int ac = A.cols();
        return make(std::move(C), [a, b, ac](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            Mat& da = t.grad(a);
            Mat& db = t.grad(b);
            for (int i = 0; i < d.rows(); ++i) {
                for (int j = 0; j < da.cols(); ++j) da(i, j) += d(i, j);
                for (int j = 0; j < db.cols(); ++j) db(i, j) += d(i, ac + j);
            }
        });
    }

    Var concat_rows(Var a, Var b) {
        const Mat& A = value(a);
        const Mat& B = value(b);
        assert(A.cols() == B.cols());
        Mat C(A.rows() + B.rows(), A.cols());
        std::copy(A.data(), A.data() + A.size(), C.data());
        std::copy(B.data(), B.data() + B.size(), C.data() + A.size());
        int ar = A.rows();
        return make(std::move(C), [a, b, ar](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            Mat& da = t.grad(a);
            Mat& db = t.grad(b);
            for (int i = 0; i < ar; ++i)
                for (int j = 0; j < d.cols(); ++j) da(i, j) += d(i, j);
            for (int i = 0; i < db.rows(); ++i)
                for (int j = 0; j < d.cols(); ++j) db(i, j) += d(ar + i, j);
        });
    }

    Var slice_cols(Var a, int c0, int c1) {
        const Mat& A = value(a);
        assert(0 <= c0 && c0 < c1 && c1 <= A.cols());
        Mat C(A.rows(), c1 - c0);
        for (int i = 0; i < A.rows(); ++i)
            std::copy(A.row_ptr(i) + c0, A.row_ptr(i) + c1, C.row_ptr(i));
        return make(std::move(C), [a, c0](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            Mat& da = t.grad(a);
            for (int i = 0; i < d.rows(); ++i)
                for (int j = 0; j < d.cols(); ++j) da(i, c0 + j) += d(i, j);
        });
    }

    Var slice_rows(Var a, int r0, int r1) {
        const Mat& A = value(a);
        assert(0 <= r0 && r0 < r1 && r1 <= A.rows());
        Mat C(r1 - r0, A.cols());
        std::copy(A.row_ptr(r0), A.row_ptr(r0) + C.size(), C.data());
        return make(std::move(C), [a, r0](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            Mat& da = t.grad(a);
            for (int i = 0; i < d.rows(); ++i)
                for (int j = 0; j < d.cols(); ++j) da(r0 + i, j) += d(i, j);
        });
    }

    Var relu(Var a) {
        Mat C = value(a);
        for (size_t i = 0; i < C.size(); ++i) C[i] = C[i] > 0.0 ? C[i] : 0.0;
        return make(std::move(C), [a](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& A = t.value(a);
            Mat& da = t.grad(a);
            for (size_t i = 0; i < d.size(); ++i)
                if (A[i] > 0.0) da[i] += d[i];
        });
    }

    Var leaky_relu(Var a, double slope) {
        Mat C = value(a);
        for (size_t i = 0; i < C.size(); ++i)
            if (C[i] < 0.0) C[i] *= slope;
        return make(std::move(C), [a, slope](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& A = t.value(a);
            Mat& da = t.grad(a);
            for (size_t i = 0; i < d.size(); ++i) da[i] += d[i] * (A[i] > 0.0 ? 1.0 : slope);
        });
    }

    Var sigmoid(Var a) {
        Mat C = value(a);
        for (size_t i = 0; i < C.size(); ++i) C[i] = 1.0 / (1.0 + std::exp(-C[i]));
        return make(std::move(C), [a](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& Y = t.nodes_[self].val;
            Mat& da = t.grad(a);
            for (size_t i = 0; i < d.size(); ++i) da[i] += d[i] * Y[i] * (1.0 - Y[i]);
        });
    }

    Var square(Var a) {
        Mat C = value(a);
        for (size_t i = 0; i < C.size(); ++i) C[i] *= C[i];
        return make(std::move(C), [a](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& A = t.value(a);
            Mat& da = t.grad(a);
            for (size_t i = 0; i < d.size(); ++i) da[i] += 2.0 * A[i] * d[i];
        });
    }

    Var sum(Var a) {
        const Mat& A = value(a);
        double s = 0.0;
        for (size_t i = 0; i < A.size(); ++i) s += A[i];
        Mat C(1, 1);
        C(0, 0) = s;
        return make(std::move(C), [a](Tape& t, int self) {
            double d = t.nodes_[self].grad(0, 0);
            Mat& da = t.grad(a);
            for (size_t i = 0; i < da.size(); ++i) da[i] += d;
        });
    }

    Var mean_rows(Var a) {
        const Mat& A = value(a);
        Mat C(1, A.cols());
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j) C(0, j) += A(i, j);
        double inv = 1.0 / A.rows();
        for (int j = 0; j < A.cols(); ++j) C(0, j) *= inv;
        return make(std::move(C), [a, inv](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            Mat& da = t.grad(a);
            for (int i = 0; i < da.rows(); ++i)
                for (int j = 0; j < da.cols(); ++j) da(i, j) += inv * d(0, j);
        });
    }

    // Zero out rows where keep[r] == 0.
    Var mask_rows(Var a, std::vector<char> keep) {
        const Mat& A = value(a);
        assert(int(keep.size()) == A.rows());
        Mat C = A;
        for (int i = 0; i < C.rows(); ++i)
            if (!keep[i]) std::fill(C.row_ptr(i), C.row_ptr(i) + C.cols(), 0.0);
        return make(std::move(C), [a, keep = std::move(keep)](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            Mat& da = t.grad(a);
            for (int i = 0; i < d.rows(); ++i) {
                if (!keep[i]) continue;
                for (int j = 0; j < d.cols(); ++j) da(i, j) += d(i, j);
            }
        });
    }

    // Row-wise softmax over columns flagged valid; invalid columns get weight
    // exactly 0. Rows with no valid column stay all-zero.
    Var softmax_rows(Var s, std::vector<char> key_valid) {
        const Mat& S = value(s);
        assert(int(key_valid.size()) == S.cols());
        Mat Y(S.rows(), S.cols());
        for (int i = 0; i < S.rows(); ++i) {
            double mx = -1e300;
            for (int j = 0; j < S.cols(); ++j)
                if (key_valid[j]) mx = std::max(mx, S(i, j));
            double z = 0.0;
            for (int j = 0; j < S.cols(); ++j)
                if (key_valid[j]) z += std::exp(S(i, j) - mx);
            if (z <= 0.0) continue;
            for (int j = 0; j < S.cols(); ++j)
                if (key_valid[j]) Y(i, j) = std::exp(S(i, j) - mx) / z;
        }
        return make(std::move(Y), [s, key_valid = std::move(key_valid)](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& Y = t.nodes_[self].val;
            Mat& ds = t.grad(s);
            for (int i = 0; i < d.rows(); ++i) {
                double dot = 0.0;
                for (int j = 0; j < d.cols(); ++j)
                    if (key_valid[j]) dot += d(i, j) * Y(i, j);
                for (int j = 0; j < d.cols(); ++j)
                    if (key_valid[j]) ds(i, j) += Y(i, j) * (d(i, j) - dot);
            }
        });
    }

    Var layer_norm_rows(Var x, Var gain, Var offset, double eps = 1e-5) {
        const Mat& X = value(x);
        const Mat& G = value(gain);
        const Mat& O = value(offset);
        assert(G.rows() == 1 && G.cols() == X.cols() && O.same_shape(G));
        Mat Y(X.rows(), X.cols());
        Mat xhat(X.rows(), X.cols());
        std::vector<double> inv_sd(X.rows());
        int n = X.cols();
        for (int i = 0; i < X.rows(); ++i) {
            double mu = 0.0;
            for (int j = 0; j < n; ++j) mu += X(i, j);
            mu /= n;
            double var = 0.0;
            for (int j = 0; j < n; ++j) {
                double c = X(i, j) - mu;
                var += c * c;
            }
            var /= n;
            double isd = 1.0 / std::sqrt(var + eps);
            inv_sd[i] = isd;
            for (int j = 0; j < n; ++j) {
                xhat(i, j) = (X(i, j) - mu) * isd;
                Y(i, j) = G(0, j) * xhat(i, j) + O(0, j);
            }
        }
        return make(std::move(Y), [x, gain, offset, xhat = std::move(xhat),
                                   inv_sd = std::move(inv_sd)](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& G = t.value(gain);
            Mat& dx = t.grad(x);
            Mat& dg = t.grad(gain);
            Mat& dofs = t.grad(offset);
            int n = d.cols();
            for (int i = 0; i < d.rows(); ++i) {
                double m1 = 0.0, m2 = 0.0;
                for (int j = 0; j < n; ++j) {
                    double gd = d(i, j) * G(0, j);
                    m1 += gd;
                    m2 += gd * xhat(i, j);
                    dg(0, j) += d(i, j) * xhat(i, j);
                    dofs(0, j) += d(i, j);
                }
                m1 /= n;
                m2 /= n;
                for (int j = 0; j < n; ++j) {
                    double gd = d(i, j) * G(0, j);
                    dx(i, j) += (gd - m1 - xhat(i, j) * m2) * inv_sd[i];
                }
            }
        });
    }

    // GATv2 pair scores: s_ij = a . leaky_relu(u_i + v_j) with u,v (S x dh),
    // a (1 x dh). Fused so attention stays O(S^2 dh) instead of O(S^2 dh^2).
    Var pair_scores(Var u, Var v, Var a, double slope) {
        const Mat& U = value(u);
        const Mat& V = value(v);
        const Mat& A = value(a);
        assert(U.cols() == V.cols() && A.rows() == 1 && A.cols() == U.cols());
        int S = U.rows(), T = V.rows(), dh = U.cols();
        Mat Y(S, T);
        for (int i = 0; i < S; ++i)
            for (int j = 0; j < T; ++j) {
                double s = 0.0;
                const double* ur = U.row_ptr(i);
                const double* vr = V.row_ptr(j);
                for (int c = 0; c < dh; ++c) {
                    double z = ur[c] + vr[c];
                    s += A(0, c) * (z > 0.0 ? z : slope * z);
                }
                Y(i, j) = s;
            }
        return make(std::move(Y), [u, v, a, slope](Tape& t, int self) {
            const Mat& d = t.nodes_[self].grad;
            const Mat& U = t.value(u);
            const Mat& V = t.value(v);
            const Mat& A = t.value(a);
            Mat& du = t.grad(u);
            Mat& dv = t.grad(v);
            Mat& da = t.grad(a);
            int S = U.rows(), T = V.rows(), dh = U.cols();
            for (int i = 0; i < S; ++i)
                for (int j = 0; j < T; ++j) {
                    double dij = d(i, j);
                    if (dij == 0.0) continue;
                    const double* ur = U.row_ptr(i);
                    const double* vr = V.row_ptr(j);
                    double* dur = du.row_ptr(i);
                    double* dvr = dv.row_ptr(j);
                    for (int c = 0; c < dh; ++c) {
                        double z = ur[c] + vr[c];
                        double act = z > 0.0 ? z : slope * z;
                        double deriv = z > 0.0 ? 1.0 : slope;
                        da(0, c) += dij * act;
                        double g = dij * A(0, c) * deriv;
                        dur[c] += g;
                        dvr[c] += g;
                    }
                }
        });
    }

    const Mat& value(Var v) const {
        const Node& n = nodes_[v.id];
        return n.ext ? *n.ext : n.val;
    }
    Mat& grad(Var v) { return nodes_[v.id].grad; }

    // Seeds d(out)/d(out) = seed and propagates adjoints to every leaf.
    void backward(Var out, double seed = 1.0) {
        assert(out.ok() && value(out).rows() == 1 && value(out).cols() == 1);
        for (auto& n : nodes_) {
            const Mat& v = n.ext ? *n.ext : n.val;
            n.grad = Mat(v.rows(), v.cols());
        }
        nodes_[out.id].grad(0, 0) = seed;
        for (int i = int(nodes_.size()) - 1; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this, i);
    }

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        const Mat* ext = nullptr;
        Mat grad;
        std::function<void(Tape&, int)> back;
    };

    Var make(Mat v, std::function<void(Tape&, int)> back) {
        int id = int(nodes_.size());
        nodes_.push_back(Node{std::move(v), nullptr, Mat{}, std::move(back)});
        return Var{this, id};
    }

    std::vector<Node> nodes_;
};

}  // namespace lsa::ad
