// Copyright 2026 The dsgsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Locale-independent number formatting and a minimal CSV reader.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dsg {

/// Shortest round-trip decimal representation, '.' as decimal point.
std::string format_number(double v);
double parse_number(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws std::invalid_argument if absent.
  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::string_view name) const;
};

CsvTable read_csv(std::istream& is);

/// Joins fields with ',' and terminates the line with '\n'.
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

}  // namespace dsg
