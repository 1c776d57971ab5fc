#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "kernels.hpp"
#include "kpls.hpp"

namespace kpls {

/// A fitted model together with what is needed to predict at new inputs.
struct SavedModel {
    KernelSpec spec;
    DenseMatrix X;           ///< training inputs
    Vector row_means;        ///< centering statistics of the training kernel
    double grand_mean = 0.0;
    KplsModel model;

    /// Prediction at a raw input point with m components.
    double predict_at(std::span<const double> x, std::size_t m) const
    {
        Vector k = kernel_column(spec, X, x);
        if (model.centered) {
            double mk = 0.0;
            for (double v : k)
                mk += v;
            mk /= static_cast<double>(k.size());
            for (std::size_t i = 0; i < k.size(); ++i)
                k[i] = k[i] - row_means[i] - mk + grand_mean;
        }
        return predict(model, k, m);
    }
};

inline SavedModel make_saved_model(const KernelMatrix& K, const Dataset& data, KplsModel model)
{
    return {K.spec, data.X, K.centered ? K.row_means : Vector{}, K.grand_mean, std::move(model)};
}

constexpr int kModelFormatVersion = 1;

namespace detail {

inline void write_block(std::ostream& out, const std::string& name, const std::vector<Vector>& columns,
                        std::size_t rows)
{
    out << '[' << name << "]\n";
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            out << (j ? "," : "") << format_real(columns[j][i]);
        out << '\n';
    }
}

inline void write_vector(std::ostream& out, const std::string& name, const Vector& v)
{
    out << '[' << name << "]\n";
    for (std::size_t i = 0; i < v.size(); ++i)
        out << (i ? "," : "") << format_real(v[i]);
    out << '\n';
}

} // namespace detail

/// Text format: a version line, a [scalars] block of key,value pairs, then one CSV block
/// per array. Matrix blocks hold one row per line; vector blocks are a single line.
inline void write_model(std::ostream& out, const SavedModel& s)
{
    const KplsModel& M = s.model;
    std::size_t m = M.actual_m;
    out << "kpls-model," << kModelFormatVersion << '\n';
    out << "[scalars]\n";
    out << "n," << M.n << '\n';
    out << "dim," << s.X.cols() << '\n';
    out << "m_max," << M.m_max << '\n';
    out << "actual_m," << m << '\n';
    out << "breakdown," << (M.breakdown ? 1 : 0) << '\n';
    out << "centered," << (M.centered ? 1 : 0) << '\n';
    out << "y_mean," << format_real(M.y_mean) << '\n';
    out << "kernel," << to_string(s.spec.kind) << '\n';
    out << "width," << format_real(s.spec.width) << '\n';
    out << "grand_mean," << format_real(s.grand_mean) << '\n';
    detail::write_vector(out, "targets", M.targets);
    detail::write_vector(out, "knorms", M.knorms);
    detail::write_vector(out, "resnorms", M.resnorms);
    detail::write_vector(out, "row_means", M.centered ? s.row_means : Vector{});
    std::vector<Vector> xcols;
    for (std::size_t j = 0; j < s.X.cols(); ++j)
        xcols.push_back(s.X.column(j));
    detail::write_block(out, "X", xcols, M.n);
    detail::write_block(out, "T", M.T, M.n);
    detail::write_block(out, "R", M.R, M.n);
    std::vector<Vector> lcols(m, Vector(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            lcols[j][i] = M.L(i, j);
    detail::write_block(out, "L", lcols, m);
    detail::write_block(out, "yhat", M.yhat, M.n);
    detail::write_block(out, "alpha", M.alpha, M.n);
    out << "[end]\n";
}

inline void save_model(const std::string& path, const SavedModel& s)
{
    std::ofstream out(path);
    if (!out)
        throw invalid_input("cannot write '" + path + "'");
    write_model(out, s);
    if (!out)
        throw invalid_input("write to '" + path + "' failed");
}

inline SavedModel read_model(std::istream& in)
{
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> bool {
        if (!std::getline(in, line))
            return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        return true;
    };
    if (!next() || line.rfind("kpls-model,", 0) != 0)
        throw parse_error("model: missing 'kpls-model,<version>' header", 1);
    if (line != "kpls-model," + std::to_string(kModelFormatVersion))
        throw parse_error("model: unsupported format version in '" + line + "'", 1);

    std::map<std::string, std::string> scalars;
    std::map<std::string, std::vector<std::vector<double>>> blocks;
    std::string section;
    bool ended = false;
    while (next()) {
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw parse_error("model: malformed section header", lineno);
            section = line.substr(1, line.size() - 2);
            if (section == "end") {
                ended = true;
                break;
            }
            if (section != "scalars")
                blocks[section];
            continue;
        }
        if (section.empty())
            throw parse_error("model: data outside any section", lineno);
        auto cells = detail::split_commas(line);
        if (section == "scalars") {
            if (cells.size() != 2)
                throw parse_error("model: scalar lines need key,value", lineno);
            scalars[std::string(cells[0])] = std::string(cells[1]);
            continue;
        }
        std::vector<double> row;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            double v;
            if (!detail::parse_double(cells[j], v))
                throw parse_error("model: non-numeric value in [" + section + "]", lineno, j + 1);
            row.push_back(v);
        }
        blocks[section].push_back(std::move(row));
    }
    if (!ended)
        throw parse_error("model: missing [end] marker", lineno);

    auto scalar = [&](const std::string& key) -> const std::string& {
        auto it = scalars.find(key);
        if (it == scalars.end())
            throw parse_error("model: missing scalar '" + key + "'", 0);
        return it->second;
    };
    auto count = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(scalar(key))); };
    auto real = [&](const std::string& key) {
        double v;
        if (!detail::parse_double(scalar(key), v))
            throw parse_error("model: scalar '" + key + "' is not numeric", 0);
        return v;
    };
    auto vec = [&](const std::string& name, std::size_t len) {
        auto it = blocks.find(name);
        if (it == blocks.end())
            throw parse_error("model: missing block [" + name + "]", 0);
        Vector v = it->second.empty() ? Vector{} : it->second.front();
        if (v.size() != len || it->second.size() > 1)
            throw parse_error("model: block [" + name + "] has the wrong length", 0);
        return v;
    };
    auto columns = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        auto it = blocks.find(name);
        if (it == blocks.end() || it->second.size() != rows)
            throw parse_error("model: block [" + name + "] has the wrong number of rows", 0);
        std::vector<Vector> out(cols, Vector(rows));
        for (std::size_t i = 0; i < rows; ++i) {
            if (it->second[i].size() != cols)
                throw parse_error("model: block [" + name + "] has the wrong number of columns", 0);
            for (std::size_t j = 0; j < cols; ++j)
                out[j][i] = it->second[i][j];
        }
        return out;
    };

    SavedModel s;
    KplsModel& M = s.model;
    M.n = count("n");
    std::size_t d = count("dim");
    M.m_max = count("m_max");
    M.actual_m = count("actual_m");
    M.breakdown = count("breakdown") != 0;
    M.centered = count("centered") != 0;
    M.y_mean = real("y_mean");
    s.spec = {parse_kernel_kind(scalar("kernel")), real("width")};
    s.grand_mean = real("grand_mean");
    if (M.n == 0 || d == 0 || M.actual_m == 0 || M.actual_m > M.m_max)
        throw parse_error("model: inconsistent dimensions", 0);
    std::size_t m = M.actual_m;
    M.targets = vec("targets", M.n);
    M.knorms = vec("knorms", m);
    M.resnorms = vec("resnorms", m + 1);
    s.row_means = vec("row_means", M.centered ? M.n : 0);
    auto xcols = columns("X", M.n, d);
    s.X = DenseMatrix(M.n, d);
    for (std::size_t i = 0; i < M.n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            s.X(i, j) = xcols[j][i];
    M.T = columns("T", M.n, m);
    M.R = columns("R", M.n, m);
    auto lcols = columns("L", m, m);
    M.L = UpperTriangular(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j)
            M.L.at(i, j) = lcols[j][i];
    M.yhat = columns("yhat", M.n, m);
    M.alpha = columns("alpha", M.n, m);
    return s;
}

inline SavedModel load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw invalid_input("cannot open '" + path + "'");
    return read_model(in);
}

} // namespace kpls
