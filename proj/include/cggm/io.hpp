#pragma once
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <cggm/errors.hpp>
#include <cggm/metrics.hpp>
#include <cggm/model_selection.hpp>
#include <cggm/sim_bench.hpp>
#include <cggm/types.hpp>

namespace cggm::io {

class ParseError : public InputError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& msg)
        : InputError(path + ":" + std::to_string(line) + ": " + msg), line(line) {}
    std::size_t line;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabeledMatrix {
    Matrix data;
    /// Column names from the header row; empty when there was no header.
    std::vector<std::string> names;
};

/// %.12g, the precision used for every numeric output.
inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char delim)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

} // namespace detail

/// Delimited numeric matrix, one sample per row. Blank lines are skipped.
inline LabeledMatrix read_matrix(const std::string& path, char delimiter = '\t', bool has_header = false)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path);
    LabeledMatrix out;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool header_done = !has_header;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        auto cells = detail::split(line, delimiter);
        if (!header_done) {
            for (auto& c : cells)
                out.names.push_back(detail::trim(c));
            header_done = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& raw : cells) {
            const std::string c = detail::trim(raw);
            if (c.empty())
                throw ParseError(path, lineno, "empty cell");
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(c.c_str(), &end);
            if (end != c.c_str() + c.size())
                throw ParseError(path, lineno, "non-numeric cell '" + c + "'");
            if (!std::isfinite(v))
                throw ParseError(path, lineno, "non-finite value '" + c + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(path, lineno,
                             "ragged row: expected " + std::to_string(rows.front().size()) + " columns, found " +
                                 std::to_string(row.size()));
        if (rows.empty() && !out.names.empty() && out.names.size() != row.size())
            throw ParseError(path, lineno, "header and body column counts differ");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw ParseError(path, lineno, "no data rows");
    out.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            out.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return out;
}

inline std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    return out;
}

inline void ensure_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create directory " + dir.string());
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m, char delimiter = '\t',
                         const std::vector<std::string>& header = {})
{
    auto out = open_out(path);
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j)
            out << (j ? std::string(1, delimiter) : "") << header[j];
        out << '\n';
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out << (j ? std::string(1, delimiter) : "") << fmt(m(i, j));
        out << '\n';
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

inline std::vector<std::string> default_names(const std::string& prefix, Eigen::Index count)
{
    std::vector<std::string> v;
    for (Eigen::Index i = 0; i < count; ++i)
        v.push_back(prefix + std::to_string(i + 1));
    return v;
}

/// -theta_ij / sqrt(theta_ii theta_jj)
inline double partial_correlation(const Matrix& theta, Eigen::Index i, Eigen::Index j)
{
    return -theta(i, j) / std::sqrt(theta(i, i) * theta(j, j));
}

inline nlohmann::json to_json(const CggmFit& fit)
{
    nlohmann::json j;
    j["lambda"] = fit.penalty.lambda;
    j["rho"] = fit.penalty.rho;
    j["adaptive"] = fit.penalty.adaptive;
    if (fit.penalty.adaptive)
        j["exponent"] = fit.penalty.exponent;
    j["objective_trace"] = fit.objective_trace;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["p"] = fit.theta.rows();
    j["q"] = fit.gamma.cols();
    j["warnings"] = fit.warnings;
    return j;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

/// theta.tsv, gamma.tsv, edges.tsv, assoc.tsv and fit.json in outdir.
inline void write_fit(const CggmFit& fit, const std::filesystem::path& outdir, std::vector<std::string> gene_names = {},
                      std::vector<std::string> marker_names = {}, double tol = kNonzeroTol)
{
    ensure_dir(outdir);
    const auto p = fit.theta.rows();
    const auto q = fit.gamma.cols();
    if (gene_names.size() != static_cast<std::size_t>(p))
        gene_names = default_names("g", p);
    if (marker_names.size() != static_cast<std::size_t>(q))
        marker_names = default_names("m", q);

    write_matrix(outdir / "theta.tsv", fit.theta);
    write_matrix(outdir / "gamma.tsv", fit.gamma);

    auto edges = open_out(outdir / "edges.tsv");
    edges << "gene_i\tgene_j\ttheta_ij\tpartial_correlation\n";
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j)
            if (std::abs(fit.theta(i, j)) > tol)
                edges << gene_names[static_cast<std::size_t>(i)] << '\t' << gene_names[static_cast<std::size_t>(j)]
                      << '\t' << fmt(fit.theta(i, j)) << '\t' << fmt(partial_correlation(fit.theta, i, j)) << '\n';

    auto assoc = open_out(outdir / "assoc.tsv");
    assoc << "gene\tmarker\tgamma\n";
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index k = 0; k < q; ++k)
            if (std::abs(fit.gamma(i, k)) > tol)
                assoc << gene_names[static_cast<std::size_t>(i)] << '\t' << marker_names[static_cast<std::size_t>(k)]
                      << '\t' << fmt(fit.gamma(i, k)) << '\n';

    write_json(outdir / "fit.json", to_json(fit));
}

inline void write_bic_table(const std::filesystem::path& path, const std::vector<BicRecord>& table)
{
    auto out = open_out(path);
    out << "lambda\trho\tbic\ts_n\tk_n\tconverged\n";
    for (const auto& r : table)
        out << fmt(r.lambda) << '\t' << fmt(r.rho) << '\t' << fmt(r.bic) << '\t' << r.s_n << '\t' << r.k_n << '\t'
            << (r.converged ? 1 : 0) << '\n';
}

inline void write_mlasso(const MlassoResult& res, const std::filesystem::path& outdir,
                         std::vector<std::string> gene_names = {}, std::vector<std::string> marker_names = {},
                         double tol = kNonzeroTol)
{
    ensure_dir(outdir);
    const auto p = res.gene_coef.rows();
    const auto q = res.marker_coef.cols();
    if (gene_names.size() != static_cast<std::size_t>(p))
        gene_names = default_names("g", p);
    if (marker_names.size() != static_cast<std::size_t>(q))
        marker_names = default_names("m", q);
    auto edges = open_out(outdir / "edges.tsv");
    edges << "gene_i\tgene_j\tcoef_i_in_j\tcoef_j_in_i\n";
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j)
            if (res.adjacency(i, j))
                edges << gene_names[static_cast<std::size_t>(i)] << '\t' << gene_names[static_cast<std::size_t>(j)]
                      << '\t' << fmt(res.gene_coef(i, j)) << '\t' << fmt(res.gene_coef(j, i)) << '\n';
    auto assoc = open_out(outdir / "assoc.tsv");
    assoc << "gene\tmarker\tcoef\n";
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = 0; k < q; ++k)
            if (std::abs(res.marker_coef(j, k)) > tol)
                assoc << gene_names[static_cast<std::size_t>(j)] << '\t' << marker_names[static_cast<std::size_t>(k)]
                      << '\t' << fmt(res.marker_coef(j, k)) << '\n';
}

inline nlohmann::json to_json(const GraphReport& r)
{
    nlohmann::json j;
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v))
            return v;
        return nullptr;
    };
    j["loss"] = num(r.loss);
    j["norm_elem_inf"] = num(r.norm_elem_inf);
    j["norm_mat_inf"] = num(r.norm_mat_inf);
    j["norm_spectral"] = num(r.norm_spectral);
    j["norm_frobenius"] = num(r.norm_frobenius);
    j["dist"] = r.dist;
    j["spe"] = num(r.spe);
    j["sen"] = num(r.sen);
    j["mcc"] = num(r.mcc);
    j["degenerate"] = r.degenerate;
    return j;
}

/// One row per (replication, method), then a mean row and a standard-error
/// row per method. Missing values are written as NA.
inline void write_bench_table(std::ostream& out, const BenchTable& t)
{
    auto v = [](double x) { return std::isfinite(x) ? fmt(x) : std::string("NA"); };
    out << "replication\tmethod\tseed\tstatus\tlambda\trho\tloss\tnorm_elem_inf\tnorm_mat_inf\tnorm_spectral"
           "\tnorm_frobenius\tdist\tspe\tsen\tmcc\n";
    for (const auto& r : t.rows) {
        const auto& g = r.report;
        out << r.replication << '\t' << to_string(r.method) << '\t' << r.seed << '\t' << (r.ok ? "ok" : "error")
            << '\t' << v(r.lambda) << '\t' << v(r.rho) << '\t' << v(g.loss) << '\t' << v(g.norm_elem_inf) << '\t'
            << v(g.norm_mat_inf) << '\t' << v(g.norm_spectral) << '\t' << v(g.norm_frobenius) << '\t'
            << (r.ok ? std::to_string(g.dist) : std::string("NA")) << '\t' << v(g.spe) << '\t' << v(g.sen) << '\t'
            << v(g.mcc) << '\n';
    }
    for (const auto& s : t.summary) {
        for (int k = 0; k < 2; ++k) {
            const GraphReport& g = k == 0 ? s.mean : s.se;
            out << (k == 0 ? "mean" : "se") << '\t' << to_string(s.method) << "\tNA\tn=" << s.count << "\tNA\tNA\t"
                << v(g.loss) << '\t' << v(g.norm_elem_inf) << '\t' << v(g.norm_mat_inf) << '\t'
                << v(g.norm_spectral) << '\t' << v(g.norm_frobenius) << '\t' << v(k == 0 ? s.dist_mean : s.dist_se)
                << '\t' << v(g.spe) << '\t' << v(g.sen)
                << '\t' << v(g.mcc) << '\n';
        }
    }
}

} // namespace cggm::io
