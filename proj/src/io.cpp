#include "hpcn/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "hpcn/error.hpp"

namespace hpcn {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& text, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigParseError(line, "not a number: '" + text + "'");
    }
}

}  // namespace

void write_chain_csv(std::ostream& os, const Chain& chain, std::size_t thin) {
    if (thin == 0) throw ParameterError("thin must be positive");
    const auto& x = chain.grid().points();
    os << std::setprecision(17) << "iteration,phi";
    for (Eigen::Index k = 0; k < x.size(); ++k) os << ',' << x[k];
    os << '\n';
    for (std::size_t i = 0; i < chain.size(); i += thin) {
        os << chain.iterations()[i] << ',' << chain.log_potentials()[i];
        const auto u = chain.state(i);
        for (Eigen::Index k = 0; k < u.size(); ++k) os << ',' << u[k];
        os << '\n';
    }
}

Chain read_chain_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigParseError(1, "empty chain file");
    const auto header = split_csv(line);
    if (header.size() < 4 || header[0] != "iteration" || header[1] != "phi") {
        throw ConfigParseError(1, "expected header 'iteration,phi,<grid coordinates>'");
    }
    const std::size_t n = header.size() - 2;
    const double length = parse_double(header.back(), 1);
    auto grid = Grid::uniform(n, length);
    Chain chain(grid);
    Eigen::VectorXd u(static_cast<Eigen::Index>(n));
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != n + 2) throw ConfigParseError(lineno, "wrong number of columns");
        const double iteration = parse_double(cells[0], lineno);
        const double phi = parse_double(cells[1], lineno);
        for (std::size_t k = 0; k < n; ++k) {
            u[static_cast<Eigen::Index>(k)] = parse_double(cells[k + 2], lineno);
        }
        chain.push(static_cast<std::size_t>(iteration), u, phi);
    }
    return chain;
}

void write_point_diagnostics_csv(std::ostream& os, const PointDiagnostics& diag,
                                 std::size_t acf_lag) {
    os << std::setprecision(17) << "x,acf_lag" << acf_lag << ",ess_per_100,mean,variance\n";
    for (std::size_t k = 0; k < diag.x.size(); ++k) {
        os << diag.x[k] << ',' << diag.acf_at_lag[k] << ',' << diag.ess_per_100[k] << ','
           << diag.mean[k] << ',' << diag.variance[k] << '\n';
    }
}

void write_acf_table_csv(std::ostream& os, const Chain& chain, std::span<const double> locations,
                         std::size_t max_lag, std::size_t first) {
    const std::size_t length = chain.size() > first ? chain.size() - first : 0;
    if (length == 0) throw ParameterError("no states for the ACF table");
    const std::size_t lag = std::min(max_lag, length - 1);
    std::vector<std::vector<double>> columns;
    os << std::setprecision(17) << "lag";
    for (double t : locations) {
        const std::size_t idx = chain.grid().nearest_index(t);
        os << ",t=" << chain.grid().points()[static_cast<Eigen::Index>(idx)];
        try {
            columns.push_back(autocorrelation(chain.point_series(idx, first), lag));
        } catch (const UndefinedStatistic&) {
            columns.emplace_back(lag + 1, std::numeric_limits<double>::quiet_NaN());
        }
    }
    os << '\n';
    for (std::size_t k = 0; k <= lag; ++k) {
        os << k;
        for (const auto& c : columns) os << ',' << c[k];
        os << '\n';
    }
}

void write_field_csv(std::ostream& os, const Field& field) {
    os << std::setprecision(17) << "x,value\n";
    const auto& x = field.grid().points();
    for (Eigen::Index k = 0; k < x.size(); ++k) os << x[k] << ',' << field.values()[k] << '\n';
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path.string() + "' for writing");
    return os;
}

}  // namespace hpcn
