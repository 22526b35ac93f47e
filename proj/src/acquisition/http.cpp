#include "httplib.h"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "dde/acquisition.hpp"
#include "dde/error.hpp"

namespace dde {

namespace {

struct UrlParts {
    std::string scheme_host_port;  // "https://host:port"
    std::string path_and_query;
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ArgumentError("URL has no scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

class DefaultClient final : public HttpClient {
public:
    explicit DefaultClient(int timeout_seconds) : timeout_(timeout_seconds) {}

    void get(const std::string& url, const HttpHeaders& headers, const ChunkSink& sink) override {
        if (url.rfind("file://", 0) == 0) return get_file(url, sink);
        if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0) {
            throw ArgumentError("unsupported URL scheme: '" + url + "'");
        }
        const UrlParts parts = split_url(url);
        httplib::Client cli(parts.scheme_host_port);
        cli.set_connection_timeout(timeout_, 0);
        cli.set_read_timeout(timeout_, 0);
        cli.set_follow_location(true);

        httplib::Headers h(headers.begin(), headers.end());
        int status = 0;
        auto res = cli.Get(
            parts.path_and_query, h,
            [&](const httplib::Response& r) {
                status = r.status;
                return r.status >= 200 && r.status < 300;
            },
            [&](const char* data, std::size_t n) {
                sink(data, n);
                return true;
            });
        if (status != 0 && (status < 200 || status >= 300)) {
            throw TransportError(fmt::format("GET {} returned HTTP {}", url, status), retryable_status(status));
        }
        if (!res) {
            throw TransportError(fmt::format("GET {} failed: {}", url, httplib::to_string(res.error())), true);
        }
    }

private:
    static void get_file(const std::string& url, const ChunkSink& sink) {
        std::string path = url.substr(7);
        if (auto q = path.find('?'); q != std::string::npos) path.resize(q);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw TransportError("cannot open '" + path + "'", false);
        char buf[1 << 16];
        while (in) {
            in.read(buf, sizeof buf);
            if (in.gcount() > 0) sink(buf, static_cast<std::size_t>(in.gcount()));
        }
        if (in.bad()) throw TransportError("read error on '" + path + "'", false);
    }

    int timeout_;
};

}  // namespace

std::string HttpClient::get_text(const std::string& url, const HttpHeaders& headers) {
    std::string body;
    get(url, headers, [&](const char* d, std::size_t n) { body.append(d, n); });
    return body;
}

std::unique_ptr<HttpClient> make_http_client(int timeout_seconds) {
    return std::make_unique<DefaultClient>(timeout_seconds);
}

HttpHeaders catalog_auth_headers() {
    const char* user = std::getenv("DDE_CATALOG_USER");
    const char* pass = std::getenv("DDE_CATALOG_PASS");
    if (!user || !pass || !*user) return {};
    auto h = httplib::make_basic_authentication_header(user, pass);
    return {{h.first, h.second}};
}

std::optional<std::string> catalog_endpoint_from_env() {
    const char* e = std::getenv("DDE_CATALOG_ENDPOINT");
    if (!e || !*e) return std::nullopt;
    return std::string(e);
}

std::string url_encode(std::string_view text) {
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += fmt::format("%{:02X}", c);
        }
    }
    return out;
}

}  // namespace dde
