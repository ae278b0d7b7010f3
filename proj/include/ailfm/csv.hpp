#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace ailfm::csv {

/// Minimal RFC-4180 reader: quoted fields, embedded commas and doubled quotes.
std::vector<std::vector<std::string>> read(std::istream& in);
std::vector<std::vector<std::string>> read_file(const std::string& path);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-trippable decimal form.
std::string num(double v);

}  // namespace ailfm::csv
