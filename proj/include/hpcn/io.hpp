#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hpcn/diagnostics.hpp"
#include "hpcn/samplers.hpp"

namespace hpcn {

/// Chain rows: iteration, phi, then grid values. The header repeats the
/// grid coordinates so the file is self-describing. Every `thin`-th stored
/// state is written.
void write_chain_csv(std::ostream& os, const Chain& chain, std::size_t thin = 1);

/// Inverse of write_chain_csv (acceptance counters are not stored and stay
/// zero). Throws ConfigParseError with the offending line.
Chain read_chain_csv(std::istream& is);

/// x, acf_lag<lag>, ess_per_100, mean, variance.
void write_point_diagnostics_csv(std::ostream& os, const PointDiagnostics& diag,
                                 std::size_t acf_lag);

/// lag, then one column per requested location.
void write_acf_table_csv(std::ostream& os, const Chain& chain, std::span<const double> locations,
                         std::size_t max_lag, std::size_t first = 0);

void write_field_csv(std::ostream& os, const Field& field);

/// Opens path for writing or throws Error naming the path.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace hpcn
