#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace dde {

enum class DigestAlgorithm { md5, sha256 };

DigestAlgorithm parse_digest_algorithm(std::string_view name);  // "md5" | "sha256"
std::string_view digest_name(DigestAlgorithm a) noexcept;

// Incremental hash; hex_digest() finalises.
class Hasher {
public:
    explicit Hasher(DigestAlgorithm algorithm = DigestAlgorithm::sha256);
    ~Hasher();
    Hasher(Hasher&&) noexcept;
    Hasher& operator=(Hasher&&) noexcept;

    void update(const void* data, std::size_t size);
    void update(std::string_view text) { update(text.data(), text.size()); }
    std::string hex_digest();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view data);
std::string file_hex_digest(const std::filesystem::path& path, DigestAlgorithm algorithm = DigestAlgorithm::sha256);

}  // namespace dde
