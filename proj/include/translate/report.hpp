#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "translate/alignment.hpp"
#include "translate/functionals.hpp"

namespace translate {

// %.{precision}g; non-finite values print as nan / inf / -inf.
std::string format_number(double v, int precision = 4);

// Joins cells with the delimiter, quoting any cell that contains it.
std::string delimited_row(const std::vector<std::string>& cells, char delimiter);

// Space-padded columns for terminal output.
std::string aligned_table(const std::vector<std::vector<std::string>>& rows);

// Per-cohort {label, N_s, Q_s, gamma_s}, both composite ESS forms and ESS as
// a percentage of N.
nlohmann::json to_json(const EssReport& r);
nlohmann::json to_json(const FunctionalEstimate& e, const Dataset& ds);

// 64-bit FNV-1a, printed as 16 hex digits.
std::string config_hash(const std::string& text);

}  // namespace translate
