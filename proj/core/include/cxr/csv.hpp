// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace cxr {

/// Minimal RFC-4180-style CSV support: comma separated, double-quote
/// escaping, one record per line. Enough for the manifest / report / log
/// files this project emits; not a general CSV library.

/// Split one CSV line into fields. Throws ParseError on unbalanced quotes.
std::vector<std::string> csv_split(const std::string& line, long line_no = -1);

/// Join fields into one CSV line, quoting only when needed.
std::string csv_join(const std::vector<std::string>& fields);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; throws ParseError if absent.
    std::size_t column(const std::string& name) const;
};

/// Read a whole CSV file (first line is the header). Skips blank lines.
CsvTable csv_read_file(const std::string& path);

}  // namespace cxr
