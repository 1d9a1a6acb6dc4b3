#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "lsa/autodiff.hpp"
#include "lsa/mat.hpp"

using lsa::Mat;
using lsa::Rng;
namespace ad = lsa::ad;

namespace {

Mat random_mat(Rng& rng, int r, int c, double scale = 1.0) {
    Mat m(r, c);
    for (size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-scale, scale);
    return m;
}

// Finite-difference check of d(sum of scalar output)/d(inputs) for a graph
// builder that maps leaf tensors to a 1x1 output.
double fd_check(std::vector<Mat> leaves,
                const std::function<ad::Var(ad::Tape&, const std::vector<ad::ParamRef>&)>& build,
                double eps = 1e-6) {
    std::vector<Mat> grads;
    for (const auto& m : leaves) grads.emplace_back(m.rows(), m.cols());
    std::vector<ad::ParamRef> refs;
    for (size_t i = 0; i < leaves.size(); ++i) refs.push_back({&leaves[i], &grads[i]});

    {
        ad::Tape tape;
        ad::Var out = build(tape, refs);
        tape.backward(out);
    }

    double worst = 0.0;
    for (size_t i = 0; i < leaves.size(); ++i) {
        for (size_t k = 0; k < leaves[i].size(); ++k) {
            double saved = leaves[i][k];
            auto eval = [&]() {
                ad::Tape tape;
                return tape.value(build(tape, refs))(0, 0);
            };
            leaves[i][k] = saved + eps;
            double lp = eval();
            leaves[i][k] = saved - eps;
            double lm = eval();
            leaves[i][k] = saved;
            double numeric = (lp - lm) / (2 * eps);
            double analytic = grads[i][k];
            double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("matmul and matmul_nt gradients match finite differences") {
    Rng rng(11);
    std::vector<Mat> leaves = {random_mat(rng, 3, 4), random_mat(rng, 4, 2)};
    double err = fd_check(leaves, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
        return t.sum(t.square(t.matmul(t.param(p[0]), t.param(p[1]))));
    });
    CHECK(err < 1e-7);

    std::vector<Mat> leaves2 = {random_mat(rng, 3, 4), random_mat(rng, 5, 4)};
    double err2 = fd_check(leaves2, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
        return t.sum(t.square(t.matmul_nt(t.param(p[0]), t.param(p[1]))));
    });
    CHECK(err2 < 1e-7);
}

TEST_CASE("elementwise op gradients match finite differences") {
    Rng rng(13);
    std::vector<Mat> leaves = {random_mat(rng, 2, 5), random_mat(rng, 2, 5)};
    double err = fd_check(leaves, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
        ad::Var a = t.param(p[0]);
        ad::Var b = t.param(p[1]);
        ad::Var h = t.hadamard(t.sigmoid(a), t.affine(b, -1.0, 1.0));
        ad::Var s = t.add(t.leaky_relu(t.sub(a, b), 0.2), h);
        return t.sum(t.square(t.scale(s, 0.7)));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("concat, slice and broadcast gradients") {
    Rng rng(17);
    std::vector<Mat> leaves = {random_mat(rng, 2, 3), random_mat(rng, 2, 2),
                               random_mat(rng, 1, 5), random_mat(rng, 3, 5)};
    double err = fd_check(leaves, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
        ad::Var joined = t.concat_cols(t.param(p[0]), t.param(p[1]));  // 2x5
        ad::Var shifted = t.add_rowvec(joined, t.param(p[2]));
        ad::Var stacked = t.concat_rows(shifted, t.slice_rows(t.param(p[3]), 1, 3));  // 4x5
        ad::Var sliced = t.slice_cols(stacked, 1, 4);
        return t.sum(t.square(sliced));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("softmax, layer norm, pair scores, gather gradients") {
    Rng rng(19);
    SECTION("masked softmax") {
        std::vector<Mat> leaves = {random_mat(rng, 3, 4)};
        std::vector<char> valid = {1, 0, 1, 1};
        double err = fd_check(leaves, [valid](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
            ad::Var y = t.softmax_rows(t.param(p[0]), valid);
            return t.sum(t.square(t.add(y, t.scale(y, 0.5))));
        });
        CHECK(err < 1e-6);
    }
    SECTION("layer norm") {
        std::vector<Mat> leaves = {random_mat(rng, 3, 6), random_mat(rng, 1, 6),
                                   random_mat(rng, 1, 6)};
        double err = fd_check(leaves, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
            return t.sum(
                t.square(t.layer_norm_rows(t.param(p[0]), t.param(p[1]), t.param(p[2]))));
        });
        CHECK(err < 1e-5);
    }
    SECTION("pair scores") {
        std::vector<Mat> leaves = {random_mat(rng, 3, 4), random_mat(rng, 3, 4),
                                   random_mat(rng, 1, 4)};
        double err = fd_check(leaves, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
            return t.sum(
                t.square(t.pair_scores(t.param(p[0]), t.param(p[1]), t.param(p[2]), 0.2)));
        });
        CHECK(err < 1e-6);
    }
    SECTION("gather rows scatter-adds, including repeated indices") {
        std::vector<Mat> leaves = {random_mat(rng, 4, 3)};
        double err = fd_check(leaves, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
            ad::Var g = t.gather_rows(p[0], {2, 0, 2});
            return t.sum(t.square(g));
        });
        CHECK(err < 1e-7);
    }
    SECTION("mask_rows and mean_rows") {
        std::vector<Mat> leaves = {random_mat(rng, 4, 3)};
        double err = fd_check(leaves, [](ad::Tape& t, const std::vector<ad::ParamRef>& p) {
            ad::Var m = t.mask_rows(t.param(p[0]), {1, 0, 1, 1});
            return t.sum(t.square(t.mean_rows(m)));
        });
        CHECK(err < 1e-7);
    }
}

TEST_CASE("softmax rows over valid keys sum to one and masked keys get zero") {
    Rng rng(23);
    Mat s = random_mat(rng, 4, 5, 3.0);
    std::vector<char> valid = {1, 1, 0, 1, 0};
    ad::Tape tape;
    ad::Var y = tape.softmax_rows(tape.input(s), valid);
    const Mat& w = tape.value(y);
    for (int i = 0; i < w.rows(); ++i) {
        double total = 0.0;
        for (int j = 0; j < w.cols(); ++j) {
            if (!valid[j]) CHECK(w(i, j) == 0.0);
            total += w(i, j);
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("backward through a reused leaf accumulates both paths") {
    Mat x = Mat::row({2.0});
    Mat gx(1, 1);
    ad::ParamRef ref{&x, &gx};
    ad::Tape tape;
    ad::Var v = tape.param(ref);
    ad::Var out = tape.add(tape.square(v), tape.scale(v, 3.0));  // x^2 + 3x
    tape.backward(out);
    CHECK(gx(0, 0) == Catch::Approx(7.0).epsilon(1e-12));  // 2x + 3 at x=2

    // backward seeded with c scales every adjoint by c
    Mat gx2(1, 1);
    ad::ParamRef ref2{&x, &gx2};
    ad::Tape tape2;
    ad::Var v2 = tape2.param(ref2);
    ad::Var out2 = tape2.add(tape2.square(v2), tape2.scale(v2, 3.0));
    tape2.backward(out2, 0.5);
    CHECK(gx2(0, 0) == Catch::Approx(3.5).epsilon(1e-12));
}
