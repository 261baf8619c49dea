// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

namespace cxr {

/// SHA-256 of a byte range, lowercase hex.
std::string sha256_hex(const void* data, std::size_t len);

/// SHA-256 of a whole file, lowercase hex. Throws IoError if unreadable.
std::string sha256_file_hex(const std::string& path);

/// Incremental SHA-256 for hashing parameter tensors without concatenating.
class Sha256Stream {
public:
    Sha256Stream();
    ~Sha256Stream();
    Sha256Stream(const Sha256Stream&) = delete;
    Sha256Stream& operator=(const Sha256Stream&) = delete;
    void update(const void* data, std::size_t len);
    std::string hex();  // finalizes; further updates are invalid

private:
    void* ctx_;
};

}  // namespace cxr
