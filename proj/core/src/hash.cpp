// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <vector>

#include "cxr/error.hpp"

namespace cxr {

namespace {

std::string to_hex(const unsigned char* digest, unsigned len) {
    static const char* kHex = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = kHex[digest[i] >> 4];
        out[2 * i + 1] = kHex[digest[i] & 0xf];
    }
    return out;
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned digest_len = 0;
    if (EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: EVP_Digest failed");
    return to_hex(digest, digest_len);
}

std::string sha256_file_hex(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open file for hashing: " + path);
    Sha256Stream s;
    std::array<unsigned char, 1 << 16> buf;
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), f)) > 0) s.update(buf.data(), n);
    const bool err = std::ferror(f) != 0;
    std::fclose(f);
    if (err) throw IoError("read error while hashing: " + path);
    return s.hex();
}

Sha256Stream::Sha256Stream() {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: init failed");
    ctx_ = ctx;
}

Sha256Stream::~Sha256Stream() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256Stream::update(const void* data, std::size_t len) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len) != 1)
        throw std::runtime_error("sha256: update failed");
}

std::string Sha256Stream::hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned digest_len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest, &digest_len) != 1)
        throw std::runtime_error("sha256: final failed");
    return to_hex(digest, digest_len);
}

}  // namespace cxr
