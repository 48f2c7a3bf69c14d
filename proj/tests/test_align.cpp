#include "gfmate/align.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace gfmate;

TEST(SvdAlign, IdentityKeepsGram) {
    Matrix x = Matrix::Identity(3, 3);
    auto a = svd_align(x, 3);
    ASSERT_EQ(a.matrix.cols(), 3);
    Matrix gram = a.matrix * a.matrix.transpose();
    EXPECT_LT((gram - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(SvdAlign, RankOneCapturesAllEnergy) {
    Vector u(5), v(4);
    u << 1, -2, 0.5, 3, 1;
    v << 0.3, 1, -1, 2;
    Matrix x = u * v.transpose();
    auto a = svd_align(x, 1);
    ASSERT_EQ(a.matrix.cols(), 1);
    EXPECT_NEAR(a.matrix.norm(), x.norm(), 1e-8);
    // Column parallel to u.
    const double c = a.matrix.col(0).dot(u) / (a.matrix.col(0).norm() * u.norm());
    EXPECT_NEAR(std::abs(c), 1.0, 1e-10);
}

TEST(SvdAlign, FullRankPreservesGram) {
    Rng rng(20);
    Matrix x = oracle::random_matrix(rng, 20, 8);
    auto a = svd_align(x, 8);
    Matrix diff = a.matrix * a.matrix.transpose() - x * x.transpose();
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SvdAlign, WideMatrixUsesRowGram) {
    Rng rng(21);
    Matrix x = oracle::random_matrix(rng, 6, 15);
    auto a = svd_align(x, 10);
    ASSERT_EQ(a.matrix.cols(), 10);
    Matrix diff = a.matrix * a.matrix.transpose() - x * x.transpose();
    EXPECT_LT(diff.norm() / (x * x.transpose()).norm(), 1e-8);
    // Rank is 6, so columns 6..9 are zero.
    EXPECT_EQ(a.matrix.rightCols(4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SvdAlign, Errors) {
    EXPECT_THROW(svd_align(Matrix::Identity(3, 3), 0), DataError);
    EXPECT_THROW(svd_align(Matrix(0, 0), 2), DataError);
    Matrix bad = Matrix::Ones(2, 2);
    bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(svd_align(bad, 2), DataError);
}

TEST(SvdAlign, TruncationNeverAddsEnergy) {
    Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix x = oracle::random_matrix(rng, 15, 7);
        for (Index k = 1; k <= 9; ++k) {
            auto a = svd_align(x, k);
            if (k < 7) {
                EXPECT_LT(a.matrix.norm(), x.norm() - 1e-8);
            } else {
                EXPECT_NEAR(a.matrix.norm(), x.norm(), 1e-8);
            }
        }
    }
}

TEST(SvdAlign, BasisIsOrthonormalAndSignFixed) {
    Rng rng(23);
    Matrix x = oracle::random_matrix(rng, 30, 6);
    auto a = svd_align(x, 6);
    EXPECT_LT((a.basis.transpose() * a.basis - Matrix::Identity(6, 6)).norm(), 1e-8);
    for (Index j = 0; j < 6; ++j) {
        Index arg = 0;
        a.basis.col(j).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(a.basis(arg, j), 0.0);
    }
    EXPECT_LT((x * a.basis - a.matrix).norm(), 1e-10);
    for (Index j = 1; j < 6; ++j) EXPECT_GE(a.singular_values(j - 1), a.singular_values(j));
}

TEST(SvdAlign, DeterministicBitForBit) {
    Rng rng(24);
    Matrix x = oracle::random_matrix(rng, 40, 12);
    auto a = svd_align(x, 5);
    auto b = svd_align(x, 5);
    EXPECT_TRUE(a.matrix == b.matrix);
}

TEST(SvdAlign, SingularValuesMatchDirectSvd) {
    Rng rng(25);
    Matrix x = oracle::random_matrix(rng, 12, 5);
    auto a = svd_align(x, 5);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
    for (Index j = 0; j < 5; ++j) EXPECT_NEAR(a.singular_values(j), svd.singularValues()(j), 1e-10);
}
