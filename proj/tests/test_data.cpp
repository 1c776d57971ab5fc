#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace kpls;

TEST(RngType, DeterministicAndSeedSensitive)
{
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        std::uint64_t x = a.next();
        EXPECT_EQ(x, b.next());
        EXPECT_NE(x, c.next());
    }
}

TEST(RngType, ZeroSeedIsUsable)
{
    Rng r(0);
    std::uint64_t first = r.next();
    EXPECT_NE(first, 0u);
    EXPECT_NE(first, r.next());
}

TEST(RngType, MomentsOfUniformAndNormal)
{
    Rng r(7);
    const int n = 200000;
    double su = 0.0, sn = 0.0, sn2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.015);
}

TEST(Sinc, Function)
{
    EXPECT_EQ(sinc(0.0), 1.0);
    EXPECT_NEAR(sinc(3.14159265358979323846), 0.0, 1e-15);
    EXPECT_NEAR(sinc(1.0), std::sin(1.0), 1e-16);
}

TEST(SynthSinc, NoiselessAndDeterministic)
{
    Dataset d = synth_sinc(50, 0.0, 3);
    ASSERT_EQ(d.dim(), 1u);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_GE(d.X(i, 0), -3.14159265358979323846);
        EXPECT_LE(d.X(i, 0), 3.14159265358979323846);
        EXPECT_EQ(d.y[i], sinc(d.X(i, 0)));
    }
    Dataset a = synth_sinc(50, 0.1, 3), b = synth_sinc(50, 0.1, 3);
    EXPECT_EQ(a.X.data(), b.X.data());
    EXPECT_EQ(a.y, b.y);
    // Inputs come first, so the noise level does not move them.
    EXPECT_EQ(a.X.data(), d.X.data());
}

TEST(SynthPolymix, RootsAndMixtureBalance)
{
    EXPECT_EQ(polymix_function(1.0), 0.0);
    EXPECT_EQ(polymix_function(-2.0), 0.0);
    EXPECT_EQ(polymix_function(1.5), 0.0);
    EXPECT_NEAR(polymix_function(0.0), 3.0, 1e-15);
    std::size_t right = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Dataset d = synth_polymix(40, seed);
        EXPECT_EQ(d.n(), 40u);
        for (std::size_t i = 0; i < 40; ++i)
            right += d.X(i, 0) > 0.5 ? 1 : 0;
        total += 40;
    }
    EXPECT_NEAR(static_cast<double>(right) / static_cast<double>(total), 0.5, 0.05);
    Dataset quiet = synth_polymix(20, 4, 0.0);
    for (std::size_t i = 0; i < 20; ++i)
        EXPECT_EQ(quiet.y[i], polymix_function(quiet.X(i, 0)));
}

TEST(SynthKinlike, EightJointsAndBoundedReach)
{
    Dataset d = synth_kinlike(200, 1);
    EXPECT_EQ(d.dim(), 8u);
    for (std::size_t i = 0; i < 200; ++i) {
        for (std::size_t j = 0; j < 8; ++j)
            EXPECT_LE(std::abs(d.X(i, j)), 3.14159265358979323846 / 4.0);
        EXPECT_LE(std::abs(d.y[i]), 1.0 + 0.2);
    }
    EXPECT_EQ(synth_kinlike(1, 9).dim(), 8u);
}

TEST(Head, NestedPrefix)
{
    Dataset d = synth_kinlike(30, 2);
    Dataset h = head(d, 10);
    ASSERT_EQ(h.n(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(h.y[i], d.y[i]);
        for (std::size_t j = 0; j < 8; ++j)
            EXPECT_EQ(h.X(i, j), d.X(i, j));
    }
    EXPECT_THROW(head(d, 31), invalid_input);
    EXPECT_THROW(head(d, 0), invalid_input);
}

TEST(FormatReal, SeventeenDigitsRoundTrip)
{
    EXPECT_EQ(format_real(0.1), "0.10000000000000001");
    EXPECT_EQ(format_real(2.0), "2");
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
        double v = r.normal() * std::pow(10.0, r.uniform(-20, 20));
        EXPECT_EQ(std::stod(format_real(v)), v);
    }
}

TEST(Csv, HandWrittenFile)
{
    std::istringstream in("x1,x2,y\n1.5,-2,3\n0,1e-3,-4.25\n\n7,8,9\n");
    Dataset d = read_csv(in);
    ASSERT_EQ(d.n(), 3u);
    ASSERT_EQ(d.dim(), 2u);
    EXPECT_EQ(d.X(0, 0), 1.5);
    EXPECT_EQ(d.X(0, 1), -2.0);
    EXPECT_EQ(d.X(1, 1), 1e-3);
    EXPECT_EQ(d.y, (Vector{3.0, -4.25, 9.0}));
}

TEST(Csv, RoundTrip)
{
    Dataset d = synth_kinlike(25, 5);
    std::ostringstream out;
    write_csv(out, d);
    std::istringstream in(out.str());
    Dataset e = read_csv(in);
    EXPECT_EQ(e.X.data(), d.X.data());
    EXPECT_EQ(e.y, d.y);
}

TEST(Csv, NonNumericCellNamesRowAndColumn)
{
    std::istringstream in("x1,x2,y\n1,2,3\n4,abc,6\n");
    try {
        read_csv(in);
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.column(), 2u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("x2"), std::string::npos);
    }
}

TEST(Csv, MalformedInputs)
{
    auto fails = [](const std::string& text, std::size_t line) {
        std::istringstream in(text);
        try {
            read_csv(in);
        } catch (const parse_error& e) {
            return e.line() == line;
        }
        return false;
    };
    EXPECT_TRUE(fails("", 1));
    EXPECT_TRUE(fails("a,y\n1,2\n", 1));
    EXPECT_TRUE(fails("x1,z\n1,2\n", 1));
    EXPECT_TRUE(fails("x1,y\n1,2\n3\n", 3));
    EXPECT_TRUE(fails("x1,y\n1,nan\n", 2));
    EXPECT_TRUE(fails("x1,y\n", 1));
    EXPECT_THROW(load_csv("/nonexistent/file.csv"), invalid_input);
}

TEST(ModelIo, RoundTripPreservesPredictions)
{
    for (bool centered : {true, false}) {
        Dataset d = synth_sinc(40, 0.1, 11);
        KernelMatrix K = gram({KernelKind::rbf, 0.7}, d.X);
        if (centered)
            K = center(K);
        SavedModel s = make_saved_model(K, d, fit(K, d.y, 6));
        std::stringstream io;
        write_model(io, s);
        SavedModel t = read_model(io);
        EXPECT_EQ(t.model.actual_m, s.model.actual_m);
        EXPECT_EQ(t.model.centered, centered);
        EXPECT_EQ(t.model.y_mean, s.model.y_mean);
        for (std::size_t m = 0; m < s.model.actual_m; ++m)
            EXPECT_EQ(t.model.alpha[m], s.model.alpha[m]);
        Rng r(1);
        for (int q = 0; q < 10; ++q) {
            Vector x{r.uniform(-3, 3)};
            EXPECT_EQ(t.predict_at(x, 4), s.predict_at(x, 4));
        }
        // Predicting at a training point reproduces the in-sample fit.
        EXPECT_NEAR(s.predict_at(d.X.row(5), 6), s.model.yhat[5][5] + s.model.y_mean, 1e-10);
    }
}

TEST(ModelIo, RejectsCorruptInput)
{
    std::istringstream wrong("kpls-model,2\n");
    EXPECT_THROW(read_model(wrong), parse_error);
    std::istringstream empty("");
    EXPECT_THROW(read_model(empty), parse_error);

    Dataset d = synth_sinc(10, 0.1, 1);
    KernelMatrix K = center(gram({KernelKind::rbf, 1.0}, d.X));
    std::stringstream io;
    write_model(io, make_saved_model(K, d, fit(K, d.y, 2)));
    std::string text = io.str();
    std::istringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(read_model(truncated), parse_error);
}
