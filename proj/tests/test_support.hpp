// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

namespace cxrtest {

/// Fresh scratch directory under the test working directory. Wiped on
/// construction so reruns start clean; left in place afterwards for
/// post-mortem inspection.
inline std::string temp_dir(const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::current_path() / "test_tmp" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void touch(const std::string& path) { std::ofstream out(path); }

}  // namespace cxrtest
