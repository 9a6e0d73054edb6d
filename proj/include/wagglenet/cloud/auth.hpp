#pragma once

// Bearer tokens: subject and expiry claims signed with HMAC-SHA256 under a
// server-held secret. Wire form is hex(subject).issued_at.expires_at.mac,
// all printable, safe inside an Authorization header.

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wagglenet::cloud {

struct AuthToken {
    std::string subject;
    std::int64_t issued_at = 0;
    std::int64_t expires_at = 0;
};

namespace detail {

inline std::string to_hex(const unsigned char* data, std::size_t n) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0F]);
    }
    return out;
}

inline std::optional<std::string> from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    const auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
    };
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = nibble(hex[i]);
        const int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

inline std::string hmac_sha256_hex(const std::string& key, const std::string& message) {
    unsigned char mac[EVP_MAX_MD_SIZE];
    unsigned int mac_len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
         reinterpret_cast<const unsigned char*>(message.data()), message.size(), mac,
         &mac_len);
    return to_hex(mac, mac_len);
}

}  // namespace detail

class TokenAuthority {
  public:
    explicit TokenAuthority(std::string secret, std::int64_t validity_s = 24 * 3600)
        : secret_(std::move(secret)), validity_s_(validity_s) {}

    std::int64_t validity_s() const { return validity_s_; }

    std::string issue(const std::string& subject, std::int64_t now_utc) const {
        const std::string claims = detail::to_hex(
                                       reinterpret_cast<const unsigned char*>(subject.data()),
                                       subject.size()) +
                                   "." + std::to_string(now_utc) + "." +
                                   std::to_string(now_utc + validity_s_);
        return claims + "." + detail::hmac_sha256_hex(secret_, claims);
    }

    /// Signature first, then expiry; nullopt on any defect.
    std::optional<AuthToken> verify(const std::string& token, std::int64_t now_utc) const {
        const std::size_t d1 = token.find('.');
        if (d1 == std::string::npos) return std::nullopt;
        const std::size_t d2 = token.find('.', d1 + 1);
        if (d2 == std::string::npos) return std::nullopt;
        const std::size_t d3 = token.find('.', d2 + 1);
        if (d3 == std::string::npos) return std::nullopt;
        if (token.find('.', d3 + 1) != std::string::npos) return std::nullopt;

        const std::string claims = token.substr(0, d3);
        const std::string mac = token.substr(d3 + 1);
        const std::string expected = detail::hmac_sha256_hex(secret_, claims);
        if (mac.size() != expected.size() ||
            CRYPTO_memcmp(mac.data(), expected.data(), mac.size()) != 0)
            return std::nullopt;

        const auto subject = detail::from_hex(token.substr(0, d1));
        if (!subject) return std::nullopt;
        AuthToken parsed;
        parsed.subject = *subject;
        try {
            parsed.issued_at = std::stoll(token.substr(d1 + 1, d2 - d1 - 1));
            parsed.expires_at = std::stoll(token.substr(d2 + 1, d3 - d2 - 1));
        } catch (const std::exception&) {
            return std::nullopt;
        }
        if (now_utc >= parsed.expires_at) return std::nullopt;
        return parsed;
    }

  private:
    std::string secret_;
    std::int64_t validity_s_;
};

}  // namespace wagglenet::cloud
