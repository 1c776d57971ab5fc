// kpls_cli: dataset synthesis, fits, degrees of freedom, model selection, confidence
// bands and the runtime benchmark. Every command writes CSV to --output or stdout.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <kpls/kpls_all.hpp>

namespace {

using namespace kpls;

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct Options {
    std::string kernel = "rbf";
    double width = 1.0;
    std::vector<double> widths{0.01, 0.1, 1.0};
    std::size_t m = 10;
    std::size_t m_max = 30;
    std::size_t m_star = 15;
    std::vector<std::size_t> m_max_values{5, 10, 15, 20, 25, 30};
    double level = 0.98;
    double sigma = 0.1;
    std::uint64_t seed = 1;
    std::size_t n = 100;
    std::string dataset = "sinc";
    std::string input;
    std::string output;
    std::string model_out = "selected_model.txt";
    std::string grid;
    std::vector<std::size_t> ladder{200, 400, 800, 1600};
    bool force = false;
    bool sweep = false;
    bool exact = false;
    bool keep_unconverged = false;
};

class Output {
public:
    explicit Output(const std::string& path)
    {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_)
                throw invalid_input("cannot open output '" + path + "'");
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    void finish()
    {
        stream().flush();
        if (!stream())
            throw invalid_input("writing output failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

void warn(const std::vector<std::string>& warnings)
{
    for (const auto& w : warnings)
        std::cerr << "warning: " << w << '\n';
}

Dataset load_data(const Options& o, const ExperimentConfig& cfg)
{
    Dataset d = o.input.empty() ? make_dataset(cfg) : load_csv(o.input);
    d.validate();
    return d;
}

ExperimentConfig make_config(const Options& o)
{
    ExperimentConfig cfg;
    cfg.seed = o.seed;
    cfg.n = o.n;
    cfg.sigma = o.sigma;
    cfg.widths = o.widths;
    cfg.m = o.m;
    cfg.m_star = o.m_star;
    cfg.m_max = o.m_max;
    cfg.m_max_values = o.m_max_values;
    cfg.ladder = o.ladder;
    cfg.level = o.level;
    cfg.dataset = o.input.empty() ? o.dataset : "csv:" + o.input;
    cfg.kernel = parse_kernel_kind(o.kernel);
    cfg.force = o.force;
    cfg.validate();
    return cfg;
}

/// Components to fit: the requested count, clipped to the sample size.
std::size_t clip_components(std::size_t requested, std::size_t n, const char* flag)
{
    if (requested <= n)
        return requested;
    std::cerr << "warning: " << flag << " " << requested << " exceeds n = " << n << ", using " << n << '\n';
    return n;
}

void write_header(std::ostream& out, std::size_t d, const char* prefix, const char* rest)
{
    out << prefix;
    if (d == 1) {
        out << "x,";
    } else {
        for (std::size_t j = 0; j < d; ++j)
            out << 'x' << (j + 1) << ',';
    }
    out << rest << '\n';
}

void write_band(std::ostream& out, const std::string& label, const ConfidenceBand& b)
{
    for (std::size_t i = 0; i < b.points.rows(); ++i) {
        out << label << ',';
        for (double v : b.points.row(i))
            out << format_real(v) << ',';
        out << format_real(b.prediction[i]) << ',' << format_real(b.stderr_[i]) << ',' << format_real(b.lower[i])
            << ',' << format_real(b.upper[i]) << ',' << format_real(b.level) << ',' << format_real(b.sigma) << '\n';
    }
}

int run_synth(const Options& o)
{
    ExperimentConfig cfg = make_config(o);
    if (!o.input.empty())
        throw invalid_input("synth generates data; --input does not apply");
    Output out(o.output);
    write_csv(out.stream(), load_data(o, cfg));
    out.finish();
    return 0;
}

int run_fit(const Options& o)
{
    ExperimentConfig cfg = make_config(o);
    Dataset d = load_data(o, cfg);
    KernelMatrix K = center(gram({cfg.kernel, o.width}, d.X));
    KplsModel model = fit(K, d.y, clip_components(o.m, d.n(), "--m"));
    if (model.breakdown)
        std::cerr << "warning: breakdown after " << model.actual_m << " components\n";
    Output out(o.output);
    write_model(out.stream(), make_saved_model(K, d, std::move(model)));
    out.finish();
    return 0;
}

int run_dof_sweep(const Options& o)
{
    ExperimentConfig cfg = make_config(o);
    std::vector<DofRow> rows = run_dof_experiment(cfg);
    Output out(o.output);
    out.stream() << "width,m_max,m,dof_exact,dof_approx,gmdl_exact,gmdl_approx\n";
    for (const auto& r : rows)
        out.stream() << format_real(r.width) << ',' << r.m_max << ',' << r.m << ',' << format_real(r.dof_exact) << ','
                     << format_real(r.dof_approx) << ',' << cell(r.gmdl_exact) << ',' << cell(r.gmdl_approx) << '\n';
    out.finish();
    return 0;
}

int run_dof(const Options& o)
{
    if (o.sweep)
        return run_dof_sweep(o);
    ExperimentConfig cfg = make_config(o);
    Dataset d = load_data(o, cfg);
    std::size_t n = d.n();
    std::size_t m = clip_components(o.m, n, "--m");
    std::size_t mmax = clip_components(std::max(o.m_max, m), n, "--m-max");
    KernelMatrix K = center(gram({cfg.kernel, o.width}, d.X));
    KplsModel model = fit(K, d.y, mmax);
    if (model.actual_m < m)
        throw near_breakdown("breakdown after " + std::to_string(model.actual_m) + " components; cannot report m = " +
                             std::to_string(m));
    DofReport approx = dof_approx(K, model, m, mmax);
    warn(approx.warnings);
    std::optional<double> exact;
    if (n <= kExactOracleLimit || o.force)
        exact = dof_exact(K, model, m).dof_exact;
    else
        std::cerr << "warning: exact DoF skipped for n = " << n << " > " << kExactOracleLimit
                  << " (pass --force to compute it)\n";
    Output out(o.output);
    out.stream() << "width,m,m_max,dof_exact,dof_approx,term_trace,term_latent,term_residual\n";
    out.stream() << format_real(o.width) << ',' << m << ',' << approx.m_max_used << ',' << cell(exact) << ','
                 << cell(approx.dof_approx) << ',' << format_real(approx.term_trace) << ','
                 << format_real(approx.term_latent) << ',' << format_real(approx.term_residual) << '\n';
    out.finish();
    return 0;
}

int run_select(const Options& o)
{
    ExperimentConfig cfg = make_config(o);
    Dataset d = load_data(o, cfg);
    std::size_t mmax = clip_components(o.m_max, d.n(), "--m-max");
    SelectionGrid grid{o.widths, std::min(o.m_star, mmax), mmax, cfg.kernel};
    if (o.keep_unconverged)
        grid.convergence_tol.reset();
    SelectionReport rep = select(d, grid, !o.exact);
    warn(rep.notes);
    if (rep.tied > 0)
        std::cerr << "note: " << rep.tied << " configuration(s) tie with the chosen one\n";

    const SelectionEntry& best = rep.best();
    KernelMatrix K = center(gram({cfg.kernel, best.width}, d.X));
    KplsModel model = fit(K, d.y, best.m);
    if (!o.model_out.empty())
        save_model(o.model_out, make_saved_model(K, d, std::move(model)));

    Output out(o.output);
    out.stream() << "width,m,rss,dof,gmdl,chosen\n";
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
        const auto& e = rep.entries[i];
        out.stream() << format_real(e.width) << ',' << e.m << ',' << format_real(e.rss) << ',' << format_real(e.dof)
                     << ',' << format_real(e.gmdl) << ',' << (i == rep.chosen ? 1 : 0) << '\n';
    }
    out.finish();
    return 0;
}

/// Band grid for --input data: the --grid file, else a 261-point line one unit beyond
/// the data range for 1-D inputs, else the training inputs.
DenseMatrix band_grid(const Options& o, const Dataset& d)
{
    if (!o.grid.empty()) {
        std::ifstream in(o.grid);
        if (!in)
            throw invalid_input("cannot open grid '" + o.grid + "'");
        std::string line;
        std::vector<double> values;
        std::size_t rows = 0, lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (lineno == 1 || detail::trim(line).empty())
                continue;
            auto cells = detail::split_commas(line);
            if (cells.size() != d.dim())
                throw parse_error("grid: line " + std::to_string(lineno) + " needs " + std::to_string(d.dim()) +
                                      " fields",
                                  lineno);
            for (std::size_t j = 0; j < cells.size(); ++j) {
                double v;
                if (!detail::parse_double(cells[j], v))
                    throw parse_error("grid: line " + std::to_string(lineno) + ", column " + std::to_string(j + 1) +
                                          ": not a number",
                                      lineno, j + 1);
                values.push_back(v);
            }
            ++rows;
        }
        if (rows == 0)
            throw parse_error("grid: no points", lineno);
        return DenseMatrix(rows, d.dim(), std::move(values));
    }
    if (d.dim() == 1) {
        double lo = d.X(0, 0), hi = d.X(0, 0);
        for (std::size_t i = 1; i < d.n(); ++i) {
            lo = std::min(lo, d.X(i, 0));
            hi = std::max(hi, d.X(i, 0));
        }
        return line_grid(lo - 1.0, hi + 1.0, 261);
    }
    return d.X;
}

int run_ci(const Options& o, bool sigma_given, bool n_given)
{
    const char* rest = "prediction,stderr,lower,upper,level,sigma";
    if (o.input.empty() && o.dataset == "polymix") {
        std::optional<double> sigma = sigma_given ? std::optional<double>(o.sigma) : 1.0;
        CiDemo demo = run_ci_demo(o.seed, o.level, sigma, n_given ? o.n : 40);
        Output out(o.output);
        write_header(out.stream(), 1, "model,", rest);
        for (const auto& bm : demo.models)
            write_band(out.stream(), bm.label, bm.band);
        out.finish();
        return 0;
    }
    ExperimentConfig cfg = make_config(o);
    Dataset d = load_data(o, cfg);
    KernelMatrix K = center(gram({cfg.kernel, o.width}, d.X));
    KplsModel model = fit(K, d.y, clip_components(o.m, d.n(), "--m"));
    std::size_t m = model.actual_m;
    if (m < o.m)
        std::cerr << "warning: breakdown after " << m << " components\n";
    BandOptions opts;
    if (sigma_given)
        opts.sigma = o.sigma;
    ConfidenceBand band = confidence_band(model, K, d, band_grid(o, d), m, o.level, opts);
    if (band.sigma_estimated)
        std::cerr << "note: sigma estimated as " << format_real(band.sigma) << '\n';
    Output out(o.output);
    write_header(out.stream(), d.dim(), "model,", rest);
    std::ostringstream label;
    label << 'm' << m << "_w" << o.width;
    write_band(out.stream(), label.str(), band);
    out.finish();
    return 0;
}

int run_bench(const Options& o, bool dataset_given, bool width_given)
{
    Options b = o;
    if (!dataset_given && o.input.empty())
        b.dataset = "kinlike";
    ExperimentConfig cfg = make_config(b);
    if (width_given)
        cfg.widths = {o.width};
    else
        cfg.widths = {1.0};
    RuntimeBenchmark res = run_runtime_benchmark(cfg);
    Output out(o.output);
    out.stream() << "n,variant,seconds,components\n";
    for (const auto& r : res.records)
        out.stream() << r.n << ',' << r.variant << ',' << format_real(r.seconds) << ',' << r.components << '\n';
    out.finish();
    std::cerr << "log-log slope exact " << format_real(res.slope_exact) << ", approx " << format_real(res.slope_approx)
              << '\n';
    return 0;
}

/// KPLS_THREADS must be a positive integer when set.
void check_thread_env()
{
    const char* env = std::getenv("KPLS_THREADS");
    if (!env)
        return;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v <= 0)
        throw invalid_input(std::string("KPLS_THREADS must be a positive integer, got '") + env + "'");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Kernel PLS with quadratic-time degrees of freedom and confidence bands", "kpls_cli"};
    app.set_config("--config", "", "key=value file; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    Options o;
    app.add_option("--kernel", o.kernel, "rbf | linear")->check(CLI::IsMember({"rbf", "linear"}))->capture_default_str();
    auto* width = app.add_option("--width", o.width, "rbf kernel width")->capture_default_str();
    app.add_option("--widths", o.widths, "comma-separated width grid")->delimiter(',')->capture_default_str();
    app.add_option("--m", o.m, "number of components")->capture_default_str();
    app.add_option("--m-max", o.m_max, "components used for the approximation")->capture_default_str();
    app.add_option("--m-star", o.m_star, "largest component count searched")->capture_default_str();
    app.add_option("--m-max-values", o.m_max_values, "m_max sweep for dof --sweep")->delimiter(',')->capture_default_str();
    app.add_option("--level", o.level, "two-sided confidence level")->capture_default_str();
    auto* sigma = app.add_option("--sigma", o.sigma, "noise SD (synthesis, and fixed band sigma)")->capture_default_str();
    app.add_option("--seed", o.seed, "random seed")->capture_default_str();
    auto* n = app.add_option("--n", o.n, "sample size for synthetic data")->capture_default_str();
    auto* dataset = app.add_option("--dataset", o.dataset, "sinc | polymix | kinlike")->capture_default_str();
    app.add_option("--input", o.input, "CSV with header x1..xd,y");
    app.add_option("--output", o.output, "output path (stdout when absent)");
    app.add_option("--model-out", o.model_out, "where select stores the chosen model")->capture_default_str();
    app.add_option("--grid", o.grid, "CSV of query points for ci --input (header row, d columns)");
    app.add_option("--ladder", o.ladder, "comma-separated sample sizes for bench")->delimiter(',')->capture_default_str();
    app.add_flag("--force", o.force, "allow the cubic exact DoF above n = 500");
    app.add_flag("--sweep", o.sweep, "dof: run the widths x m_max x m sweep");
    app.add_flag("--exact", o.exact, "select: use exact instead of approximate DoF");
    app.add_flag("--keep-unconverged", o.keep_unconverged,
                 "select: keep configurations whose approximate DoF has not converged at m_max");

    auto sub = [&](const char* name, const char* what) {
        auto* s = app.add_subcommand(name, what);
        s->fallthrough();
        return s;
    };
    auto* synth_cmd = sub("synth", "write a synthetic dataset");
    auto* fit_cmd = sub("fit", "fit a model and write it");
    auto* dof_cmd = sub("dof", "exact and approximate degrees of freedom");
    auto* select_cmd = sub("select", "gMDL grid search over widths and components");
    auto* ci_cmd = sub("ci", "pointwise confidence bands");
    auto* bench_cmd = sub("bench", "runtime of the exact and approximate DoF pipelines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.get_formatter()->make_help(&app, "", CLI::AppFormatMode::Normal);
        return kExitUsage;
    }

    try {
        check_thread_env();
        if (synth_cmd->parsed())
            return run_synth(o);
        if (fit_cmd->parsed())
            return run_fit(o);
        if (dof_cmd->parsed())
            return run_dof(o);
        if (select_cmd->parsed())
            return run_select(o);
        if (ci_cmd->parsed())
            return run_ci(o, sigma->count() > 0, n->count() > 0);
        if (bench_cmd->parsed())
            return run_bench(o, dataset->count() > 0, width->count() > 0);
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const invalid_input& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const invalid_state& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}
