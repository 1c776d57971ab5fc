#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <kpls/kpls_all.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("kpls_cli_test_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    Result run(const std::string& args, const std::string& env = "") const
    {
        std::string err = path("stderr.txt");
        std::string cmd = env + " " + KPLS_CLI_PATH + " " + args + " 2>" + err;
        Result r;
        FILE* p = ::popen(cmd.c_str(), "r");
        if (!p)
            return r;
        char buf[4096];
        std::size_t got;
        while ((got = std::fread(buf, 1, sizeof buf, p)) > 0)
            r.out.append(buf, got);
        int status = ::pclose(p);
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.err = slurp(err);
        return r;
    }

    static std::string slurp(const std::string& file)
    {
        std::ifstream in(file, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static std::size_t lines(const std::string& text)
    {
        std::size_t n = 0;
        for (char c : text)
            n += c == '\n' ? 1 : 0;
        return n;
    }

    static std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

private:
    fs::path dir_;
};

} // namespace

TEST_F(Cli, MissingSubcommandIsUsageError)
{
    EXPECT_EQ(run("").code, 1);
}

TEST_F(Cli, UnknownFlagListsValidFlags)
{
    Result r = run("dof --bogus 3");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--bogus"), std::string::npos);
    for (const char* flag : {"--kernel", "--width", "--m-max", "--m-star", "--level", "--sigma", "--seed", "--input",
                             "--output", "--config"})
        EXPECT_NE(r.err.find(flag), std::string::npos) << flag;
}

TEST_F(Cli, HelpExitsCleanly)
{
    Result r = run("--help");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("select"), std::string::npos);
}

TEST_F(Cli, SynthIsDeterministicCsv)
{
    Result a = run("synth --n 25 --seed 4");
    Result b = run("synth --n 25 --seed 4");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(first_line(a.out), "x1,y");
    EXPECT_EQ(lines(a.out), 26u);
    EXPECT_EQ(a.out.find('\r'), std::string::npos);
    std::istringstream in(a.out);
    kpls::Dataset d = kpls::read_csv(in);
    kpls::Dataset ref = kpls::synth_sinc(25, 0.1, 4);
    EXPECT_EQ(d.y, ref.y);
    EXPECT_NE(run("synth --n 25 --seed 5").out, a.out);
    EXPECT_EQ(first_line(run("synth --n 3 --dataset kinlike").out), "x1,x2,x3,x4,x5,x6,x7,x8,y");
}

TEST_F(Cli, SynthWritesOutputFile)
{
    ASSERT_EQ(run("synth --n 10 --output " + path("d.csv")).code, 0);
    EXPECT_EQ(lines(slurp(path("d.csv"))), 11u);
    EXPECT_EQ(run("synth --n 10 --output /nonexistent/dir/d.csv").code, 1);
}

TEST_F(Cli, DofPrintsOneRow)
{
    ASSERT_EQ(run("synth --n 60 --seed 2 --output " + path("data.csv")).code, 0);
    Result r = run("dof --input " + path("data.csv") + " --width 1 --m 5 --m-max 20");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out), 2u);
    EXPECT_EQ(first_line(r.out), "width,m,m_max,dof_exact,dof_approx,term_trace,term_latent,term_residual");

    kpls::Dataset d = kpls::load_csv(path("data.csv"));
    kpls::KernelMatrix K = kpls::center(kpls::gram({kpls::KernelKind::rbf, 1.0}, d.X));
    kpls::KplsModel M = kpls::fit(K, d.y, 20);
    std::string row = r.out.substr(r.out.find('\n') + 1);
    std::string expect = "1,5,20," + kpls::format_real(*kpls::dof_exact(K, M, 5).dof_exact) + "," +
                         kpls::format_real(*kpls::dof_approx(K, M, 5, 20).dof_approx) + ",";
    EXPECT_EQ(row.substr(0, expect.size()), expect);
}

TEST_F(Cli, DofSweepRowCount)
{
    Result r = run("dof --sweep --n 40 --widths 0.5,1 --m-star 3 --m-max-values 3,6");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(first_line(r.out), "width,m_max,m,dof_exact,dof_approx,gmdl_exact,gmdl_approx");
    EXPECT_EQ(lines(r.out), 1u + 2 * 2 * 3);
    Result big = run("dof --sweep --n 501 --widths 1 --m-star 1 --m-max-values 1");
    EXPECT_EQ(big.code, 1);
    EXPECT_NE(big.err.find("--force"), std::string::npos);
}

TEST_F(Cli, ConfigFileAndOverrides)
{
    write("run.cfg", "# synthetic data\nn=7\nseed = 3\n\ndataset=polymix\n");
    Result a = run("synth --config " + path("run.cfg"));
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(lines(a.out), 8u);
    EXPECT_EQ(a.out, run("synth --dataset polymix --n 7 --seed 3").out);
    Result b = run("synth --config " + path("run.cfg") + " --n 4");
    EXPECT_EQ(lines(b.out), 5u);
    write("bad.cfg", "colour=blue\n");
    EXPECT_EQ(run("synth --config " + path("bad.cfg")).code, 1);
    EXPECT_EQ(run("synth --config " + path("missing.cfg")).code, 1);
}

TEST_F(Cli, SelectReportsAndPersistsModel)
{
    ASSERT_EQ(run("synth --n 50 --seed 6 --output " + path("data.csv")).code, 0);
    std::string model = path("best.txt");
    Result r = run("select --input " + path("data.csv") +
                   " --widths 0.3,1 --m-star 4 --m-max 10 --keep-unconverged --model-out " + model);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(first_line(r.out), "width,m,rss,dof,gmdl,chosen");
    EXPECT_EQ(lines(r.out), 1u + 2 * 4);
    std::size_t chosen = 0;
    std::istringstream in(r.out);
    std::string line, width, m;
    std::getline(in, line);
    while (std::getline(in, line))
        if (line.back() == '1') {
            ++chosen;
            std::istringstream cells(line);
            std::getline(cells, width, ',');
            std::getline(cells, m, ',');
        }
    EXPECT_EQ(chosen, 1u);
    kpls::SavedModel saved = kpls::load_model(model);
    EXPECT_EQ(kpls::format_real(saved.spec.width), width);
    EXPECT_EQ(std::to_string(saved.model.actual_m), m);
}

TEST_F(Cli, FitWritesLoadableModel)
{
    ASSERT_EQ(run("synth --n 30 --output " + path("data.csv")).code, 0);
    ASSERT_EQ(run("fit --input " + path("data.csv") + " --m 4 --width 0.8 --output " + path("m.txt")).code, 0);
    kpls::SavedModel s = kpls::load_model(path("m.txt"));
    EXPECT_EQ(s.model.actual_m, 4u);
    EXPECT_EQ(s.spec.width, 0.8);
    kpls::Dataset d = kpls::load_csv(path("data.csv"));
    EXPECT_NEAR(s.predict_at(d.X.row(0), 4), s.model.yhat[3][0] + s.model.y_mean, 1e-10);
}

TEST_F(Cli, CiDemoHasTwoModelBlocks)
{
    Result r = run("ci --dataset polymix");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(first_line(r.out), "model,x,prediction,stderr,lower,upper,level,sigma");
    EXPECT_EQ(lines(r.out), 1u + 2 * 261);
    EXPECT_NE(r.out.find("\nm15_w0.1,-6,"), std::string::npos);
    EXPECT_NE(r.out.find("\nm9_w1,7,"), std::string::npos);
    EXPECT_NE(r.out.find(",0.97999999999999998,1\n"), std::string::npos);
}

TEST_F(Cli, CiOnInputDataWithGrid)
{
    ASSERT_EQ(run("synth --n 30 --output " + path("data.csv")).code, 0);
    write("grid.csv", "x1\n-1\n0\n1.5\n");
    Result r = run("ci --input " + path("data.csv") + " --m 3 --sigma 0.1 --grid " + path("grid.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out), 4u);
    write("grid2.csv", "x1\n-1,2\n");
    EXPECT_EQ(run("ci --input " + path("data.csv") + " --grid " + path("grid2.csv")).code, 1);
}

TEST_F(Cli, BenchWritesRecords)
{
    Result r = run("bench --ladder 40,80 --m 3 --m-max 6");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(first_line(r.out), "n,variant,seconds,components");
    EXPECT_EQ(lines(r.out), 1u + 2 * 2);
    EXPECT_NE(r.err.find("slope"), std::string::npos);
    EXPECT_EQ(run("bench --ladder 80,40").code, 1);
}

TEST_F(Cli, ExitCodes)
{
    write("const.csv", "x1,y\n1,2\n2,2\n3,2\n4,2\n");
    EXPECT_EQ(run("select --input " + path("const.csv") + " --widths 1 --m-star 1 --m-max 2").code, 2);
    write("bad.csv", "x1,y\n1,2\n2,zz\n");
    Result r = run("dof --input " + path("bad.csv"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 3"), std::string::npos);
    EXPECT_EQ(run("fit --width -1 --n 10").code, 1);
    EXPECT_EQ(run("fit --kernel poly").code, 1);
    EXPECT_EQ(run("ci --level 1.5 --n 20").code, 1);
}

TEST_F(Cli, ThreadEnvironment)
{
    EXPECT_EQ(run("synth --n 3", "KPLS_THREADS=abc").code, 1);
    EXPECT_EQ(run("synth --n 3", "KPLS_THREADS=0").code, 1);
    std::string args = "select --n 60 --widths 0.1,0.5,1,2 --m-star 4 --m-max 8 --model-out " + path("m.txt");
    Result one = run(args, "KPLS_THREADS=1");
    Result four = run(args, "KPLS_THREADS=4");
    ASSERT_EQ(one.code, 0) << one.err;
    EXPECT_EQ(one.out, four.out);
}
