#pragma once

#include <string>

namespace emtsim {

/// Shortest decimal form that round-trips through from_chars exactly.
/// Used everywhere a double is written to a file so that golden files and
/// CSV round-trips are byte-stable.
std::string format_number(double value);

/// Six-significant-digit form for human-facing tables and notes. Loses
/// precision by design; never use for data files.
std::string format_display(double value);

}  // namespace emtsim
