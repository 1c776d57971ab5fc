#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace kpls;

namespace {

struct Problem {
    Dataset data;
    KernelMatrix K;
};

Problem rbf_problem(std::size_t n, double width, std::uint64_t seed, bool centered = true)
{
    Dataset d = oracle::random_problem(n, 2, seed);
    KernelMatrix K = gram({KernelKind::rbf, width}, d.X);
    return {d, centered ? center(K) : K};
}

} // namespace

TEST(Fit, IdentityKernelNeedsOneComponent)
{
    KernelMatrix K{DenseMatrix::identity(6), {KernelKind::linear, 1.0}, false, {}, 0.0};
    Vector y{1, -2, 0.5, 3, 0, 1};
    KplsModel M = fit(K, y, 4);
    EXPECT_EQ(M.actual_m, 1u);
    EXPECT_TRUE(M.breakdown);
    double ny = norm2(y);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(M.T[0][i], y[i] / ny, 1e-15);
        EXPECT_NEAR(M.yhat[0][i], y[i], 1e-14);
    }
}

TEST(Fit, FirstComponentIsNormalizedKy)
{
    Problem p = rbf_problem(20, 1.0, 2);
    KplsModel M = fit(p.K, p.data.y, 3);
    Vector Ky = matvec(p.K.entries, M.targets);
    double nk = norm2(Ky);
    for (std::size_t i = 0; i < 20; ++i)
        EXPECT_NEAR(M.T[0][i], Ky[i] / nk, 1e-13);
}

TEST(Fit, LinearKernelFullRankReproducesTargets)
{
    DenseMatrix X = oracle::random_points(20, 20, 5);
    Vector y = oracle::random_problem(20, 1, 5).y;
    KernelMatrix K = gram({KernelKind::linear, 1.0}, X);
    KplsModel M = fit(K, y, 20);
    ASSERT_EQ(M.actual_m, 20u);
    for (std::size_t i = 0; i < 20; ++i)
        EXPECT_NEAR(M.yhat[19][i], y[i], 1e-6);
}

TEST(Fit, LinearKernelMatchesConjugateGradient)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        DenseMatrix X = oracle::random_points(30, 6, seed);
        Vector y = oracle::random_problem(30, 1, seed + 50).y;
        KernelMatrix K = gram({KernelKind::linear, 1.0}, X);
        KplsModel M = fit(K, y, 6);
        for (std::size_t m = 1; m <= M.actual_m; ++m) {
            Eigen::VectorXd cg = oracle::cg_fitted(oracle::to_eigen(X), oracle::to_eigen(y), static_cast<int>(m));
            double rel = (oracle::to_eigen(M.yhat[m - 1]) - cg).norm() / cg.norm();
            EXPECT_LE(rel, 1e-6) << "seed " << seed << " m " << m;
        }
    }
}

TEST(Fit, StructuralInvariants)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Problem p = rbf_problem(30, 0.5 + 0.2 * static_cast<double>(seed), seed);
        KplsModel M = fit(p.K, p.data.y, 10);
        std::size_t m = M.actual_m;
        Eigen::MatrixXd T = oracle::columns(M.T, m);
        Eigen::MatrixXd Ke = oracle::to_eigen(p.K.entries);
        Eigen::VectorXd y = oracle::to_eigen(M.targets);
        EXPECT_LT(oracle::max_abs(T.transpose() * T - Eigen::MatrixXd::Identity(m, m)), 1e-8);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i > j || i + 1 < j) {
                    EXPECT_EQ(M.L(i, j), 0.0);
                }
        double prev = y.norm();
        for (std::size_t k = 1; k <= m; ++k) {
            Eigen::VectorXd yh = oracle::to_eigen(M.yhat[k - 1]);
            Eigen::VectorXd Ka = Ke * oracle::to_eigen(M.alpha[k - 1]);
            EXPECT_LE((yh - Ka).norm(), 1e-8 * yh.norm());
            Eigen::MatrixXd Tk = T.leftCols(k);
            EXPECT_LE((yh - Tk * Tk.transpose() * y).norm(), 1e-8 * yh.norm());
            double res = (y - yh).norm();
            EXPECT_LE(res, prev * (1 + 1e-12));
            prev = res;
        }
    }
}

TEST(Fit, ComponentsSpanKrylovSpace)
{
    Problem p = rbf_problem(25, 1.0, 7);
    KplsModel M = fit(p.K, p.data.y, 6);
    ASSERT_EQ(M.actual_m, 6u);
    Eigen::MatrixXd Ke = oracle::to_eigen(p.K.entries);
    Eigen::VectorXd q = oracle::to_eigen(M.targets);
    for (std::size_t m = 1; m <= 6; ++m) {
        q = Ke * q;
        Eigen::MatrixXd T = oracle::columns(M.T, m);
        EXPECT_LE((q - T * (T.transpose() * q)).norm(), 1e-6 * q.norm()) << "m " << m;
    }
}

TEST(Fit, DeflationPathMatchesReorthogonalization)
{
    Problem p = rbf_problem(30, 1.0, 9);
    KplsModel a = fit(p.K, p.data.y, 6);
    KplsModel b = fit(p.K, p.data.y, 6, FitOptions{false});
    ASSERT_EQ(a.actual_m, b.actual_m);
    for (std::size_t m = 0; m < a.actual_m; ++m)
        for (std::size_t i = 0; i < 30; ++i)
            EXPECT_NEAR(a.yhat[m][i], b.yhat[m][i], 1e-8);
}

TEST(Fit, RejectsBadArguments)
{
    Problem p = rbf_problem(10, 1.0, 1);
    EXPECT_THROW(fit(p.K, p.data.y, 0), invalid_input);
    EXPECT_THROW(fit(p.K, p.data.y, 11), invalid_input);
    EXPECT_THROW(fit(p.K, Vector(9, 1.0), 2), invalid_input);
    Vector bad = p.data.y;
    bad[3] = NAN;
    EXPECT_THROW(fit(p.K, bad, 2), numerical_failure);
}

TEST(Predict, Examples)
{
    Problem p = rbf_problem(20, 1.0, 3);
    KplsModel M = fit(p.K, p.data.y, 4);
    EXPECT_DOUBLE_EQ(predict(M, Vector(20, 0.0), 2), M.y_mean);
    for (std::size_t m = 1; m <= 4; ++m)
        for (std::size_t i = 0; i < 20; ++i) {
            Vector kx(p.K.entries.row(i).begin(), p.K.entries.row(i).end());
            EXPECT_NEAR(predict(M, kx, m), M.yhat[m - 1][i] + M.y_mean, 1e-8);
        }
    EXPECT_THROW(predict(M, Vector(20, 0.0), 5), invalid_input);
    EXPECT_THROW(predict(M, Vector(20, 0.0), 0), invalid_input);
}

TEST(Predict, FullRankInterpolation)
{
    // Few, well separated points keep the uncentered rbf matrix far from singular, so
    // the Krylov space reaches full dimension.
    DenseMatrix X(6, 1, {-3.0, -1.6, -0.5, 0.7, 1.9, 3.2});
    Vector y{0.3, -1.0, 2.0, 0.5, -0.7, 1.1};
    KernelMatrix K = gram({KernelKind::rbf, 0.8}, X);
    KplsModel M = fit(K, y, 6);
    ASSERT_EQ(M.actual_m, 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        Vector kx = kernel_column(K.spec, X, X.row(i));
        EXPECT_NEAR(predict(M, kx, 6), y[i], 1e-6);
    }
}

TEST(TridiagonalD, SingleComponent)
{
    Problem p = rbf_problem(15, 1.0, 4);
    KplsModel M = fit(p.K, p.data.y, 1);
    SymTridiagonal D = tridiagonal_D(M);
    ASSERT_EQ(D.order(), 1u);
    EXPECT_DOUBLE_EQ(D.diag[0], M.L(0, 0) * M.L(0, 0));
}

TEST(TridiagonalD, EqualsRtK2R)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Problem p = rbf_problem(30, 1.0, seed);
        KplsModel M = fit(p.K, p.data.y, 8);
        std::size_t m = M.actual_m;
        Eigen::MatrixXd R = oracle::columns(M.R, m);
        Eigen::MatrixXd Ke = oracle::to_eigen(p.K.entries);
        Eigen::MatrixXd ref = R.transpose() * Ke * Ke * R;
        Eigen::MatrixXd D = oracle::to_eigen(tridiagonal_D(M).dense());
        EXPECT_LE(oracle::max_abs(D - ref), 1e-8 * oracle::max_abs(ref)) << "seed " << seed;
        // The residual scaling convention: unit K-norm residuals, RᵀKR = I.
        EXPECT_LE(oracle::max_abs(R.transpose() * Ke * R - Eigen::MatrixXd::Identity(m, m)), 1e-8);
        double tr = 0.0, l2 = 0.0;
        for (double v : tridiagonal_D(M).diag)
            tr += v;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                l2 += M.L(i, j) * M.L(i, j);
        EXPECT_NEAR(tr, l2, 1e-12 * l2);
    }
}

TEST(TridiagonalD, RitzValuesInsideSpectrumAndBelowEigenvalues)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Problem p = rbf_problem(40, 1.0, seed);
        KplsModel M = fit(p.K, p.data.y, 8);
        Vector mu = symtri_eigenvalues(tridiagonal_D(M));
        Eigen::VectorXd lam = oracle::eigenvalues_desc(oracle::to_eigen(p.K.entries));
        double tol = 1e-6 * lam[0];
        for (std::size_t i = 0; i < mu.size(); ++i) {
            EXPECT_LE(mu[i], lam[0] + tol);
            EXPECT_GE(mu[i], lam[lam.size() - 1] - tol);
            EXPECT_GE(lam[i] - mu[i], -tol);
        }
    }
}

TEST(TridiagonalD, FullDimensionRecoversSpectrum)
{
    DenseMatrix X(6, 1, {-3.0, -1.6, -0.5, 0.7, 1.9, 3.2});
    KernelMatrix K = gram({KernelKind::rbf, 0.8}, X);
    KplsModel M = fit(K, Vector{0.3, -1.0, 2.0, 0.5, -0.7, 1.1}, 6);
    ASSERT_EQ(M.actual_m, 6u);
    Vector mu = symtri_eigenvalues(tridiagonal_D(M));
    Eigen::VectorXd lam = oracle::eigenvalues_desc(oracle::to_eigen(K.entries));
    for (std::size_t i = 0; i < 6; ++i)
        EXPECT_NEAR(mu[i], lam[i], 1e-6 * lam[i]);
}

TEST(TridiagonalD, RitzValuesGrowWithMoreComponents)
{
    Problem p = rbf_problem(40, 0.7, 11);
    KplsModel M = fit(p.K, p.data.y, 12);
    double lam1 = oracle::eigenvalues_desc(oracle::to_eigen(p.K.entries))[0];
    for (std::size_t k = 1; k < M.actual_m; ++k) {
        Vector a = symtri_eigenvalues(tridiagonal_D(M, k));
        Vector b = symtri_eigenvalues(tridiagonal_D(M, k + 1));
        for (std::size_t i = 0; i < k; ++i)
            EXPECT_GE(b[i], a[i] - 1e-8 * lam1);
    }
}
