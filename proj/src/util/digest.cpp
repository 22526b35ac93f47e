#include "dde/digest.hpp"

#include <fstream>

#include <openssl/evp.h>

#include "dde/error.hpp"

namespace dde {

DigestAlgorithm parse_digest_algorithm(std::string_view name) {
    if (name == "md5") return DigestAlgorithm::md5;
    if (name == "sha256") return DigestAlgorithm::sha256;
    throw ArgumentError("unsupported digest algorithm '" + std::string(name) + "'");
}

std::string_view digest_name(DigestAlgorithm a) noexcept { return a == DigestAlgorithm::md5 ? "md5" : "sha256"; }

struct Hasher::Impl {
    EVP_MD_CTX* ctx = nullptr;
    ~Impl() { EVP_MD_CTX_free(ctx); }
};

Hasher::Hasher(DigestAlgorithm algorithm) : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    const EVP_MD* md = algorithm == DigestAlgorithm::md5 ? EVP_md5() : EVP_sha256();
    if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, md, nullptr) != 1) {
        throw IoError("cannot initialise message digest");
    }
}

Hasher::~Hasher() = default;
Hasher::Hasher(Hasher&&) noexcept = default;
Hasher& Hasher::operator=(Hasher&&) noexcept = default;

void Hasher::update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(impl_->ctx, data, size) != 1) throw IoError("message digest update failed");
}

std::string Hasher::hex_digest() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(impl_->ctx, out, &len) != 1) throw IoError("message digest finalisation failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        s += kHex[out[i] >> 4];
        s += kHex[out[i] & 0xf];
    }
    return s;
}

std::string sha256_hex(std::string_view data) {
    Hasher h;
    h.update(data);
    return h.hex_digest();
}

std::string file_hex_digest(const std::filesystem::path& path, DigestAlgorithm algorithm) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    Hasher h(algorithm);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex_digest();
}

}  // namespace dde
