#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "dde/acquisition.hpp"
#include "dde/digest.hpp"
#include "dde/error.hpp"
#include "dde/parallel.hpp"

namespace dde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class Fn>
auto with_retry(const RetryPolicy& policy, const std::string& what, Fn&& fn) {
    int delay = policy.initial_delay_ms;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError& e) {
            if (!e.retryable() || attempt >= policy.attempts) throw;
            spdlog::warn("{} failed (attempt {}/{}): {}", what, attempt, policy.attempts, e.what());
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            delay *= 2;
        }
    }
}

// OpenSearch entries carry typed fields as {"name": ..., "content": ...}
// objects grouped under "str", "date", "double", ...; a group holding a
// single field may be an object rather than an array.
std::optional<json> named_field(const json& entry, const char* group, const char* name) {
    if (!entry.contains(group)) return std::nullopt;
    const json& g = entry[group];
    auto match = [&](const json& f) { return f.is_object() && f.value("name", "") == name && f.contains("content"); };
    if (g.is_array()) {
        for (const auto& f : g) {
            if (match(f)) return f["content"];
        }
    } else if (match(g)) {
        return g["content"];
    }
    return std::nullopt;
}

std::string as_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

double as_double(const json& v) {
    if (v.is_number()) return v.get<double>();
    try {
        return std::stod(v.get<std::string>());
    } catch (const std::exception&) {
        throw ParseError("expected a number, got " + v.dump());
    }
}

std::string download_link(const json& entry) {
    if (!entry.contains("link")) return {};
    const json& links = entry["link"];
    auto href = [](const json& l) { return l.is_object() ? l.value("href", "") : std::string(); };
    if (links.is_array()) {
        for (const auto& l : links) {
            if (!l.contains("rel")) return href(l);
        }
        return links.empty() ? std::string() : href(links.front());
    }
    return href(links);
}

SceneRecord parse_entry(const json& entry) {
    SceneRecord s;
    if (entry.contains("title")) {
        s.scene_id = entry["title"].get<std::string>();
    } else if (entry.contains("id")) {
        s.scene_id = as_string(entry["id"]);
    } else {
        throw ParseError("catalog entry without title or id");
    }
    auto date = named_field(entry, "date", "beginposition");
    if (!date) date = named_field(entry, "date", "datatakesensingstart");
    if (!date) throw ParseError("catalog entry '" + s.scene_id + "' has no sensing date");
    s.sensing_date = parse_date(as_string(*date));
    if (auto fp = named_field(entry, "str", "footprint")) s.footprint = parse_wkt_footprint(as_string(*fp));
    if (auto cc = named_field(entry, "double", "cloudcoverpercentage")) s.cloud_cover_pct = as_double(*cc);
    if (auto ck = named_field(entry, "str", "checksum")) s.checksum = as_string(*ck);
    s.download_uri = download_link(entry);
    return s;
}

struct Page {
    std::vector<SceneRecord> records;
    std::size_t raw_entries = 0;
    std::optional<std::size_t> total;
};

Page parse_page(const std::string& body) {
    Page page;
    try {
        const json j = json::parse(body);
        const json& feed = j.contains("feed") ? j.at("feed") : j;
        if (feed.contains("opensearch:totalResults")) {
            page.total = static_cast<std::size_t>(as_double(feed["opensearch:totalResults"]));
        }
        if (!feed.contains("entry")) return page;
        const json& entries = feed["entry"];
        if (entries.is_array()) {
            for (const auto& e : entries) page.records.push_back(parse_entry(e));
        } else if (entries.is_object()) {
            page.records.push_back(parse_entry(entries));
        } else {
            throw ParseError("catalog 'entry' is neither an object nor an array");
        }
        page.raw_entries = page.records.size();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed catalog response: ") + e.what());
    }
    return page;
}

std::string page_url(const RoiSpec& roi, const CatalogQuery& q, std::size_t start) {
    std::string query = fmt::format("footprint:\"Intersects({})\" AND beginposition:[{}T00:00:00.000Z TO {}T23:59:59.999Z]",
                                    roi_wkt(roi), format_date(roi.date_start), format_date(roi.date_end));
    if (!q.product_type.empty()) query += " AND producttype:" + q.product_type;
    const char sep = q.endpoint.find('?') == std::string::npos ? '?' : '&';
    return fmt::format("{}{}q={}&rows={}&start={}&format=json", q.endpoint, sep, url_encode(query), q.page_size,
                       start);
}

}  // namespace

std::vector<SceneRecord> query_catalog(const RoiSpec& roi, const CatalogQuery& query, HttpClient& client) {
    roi.validate();
    if (query.endpoint.empty()) throw ValidationError("catalog endpoint is not configured");
    if (query.page_size == 0) throw ArgumentError("catalog page size must be positive");
    const HttpHeaders auth = catalog_auth_headers();
    const Extent box = roi.bounds();

    std::vector<SceneRecord> out;
    for (std::size_t start = 0;;) {
        const std::string url = page_url(roi, query, start);
        const Page page = with_retry(query.retry, "catalog query", [&] { return parse_page(client.get_text(url, auth)); });
        for (const auto& r : page.records) {
            if (!roi.contains(r.sensing_date)) continue;
            if (!r.footprint.empty() && !footprint_intersects(r.footprint, box)) continue;
            out.push_back(r);
        }
        start += page.raw_entries;
        if (page.raw_entries == 0 || page.raw_entries < query.page_size) break;
        if (page.total && start >= *page.total) break;
    }
    spdlog::info("catalog returned {} matching scenes", out.size());
    return out;
}

std::string file_digest(const fs::path& path, std::string_view algorithm) {
    return fmt::format("{}:{}", algorithm, file_hex_digest(path, parse_digest_algorithm(algorithm)));
}

namespace {

std::string archive_extension(const std::string& uri) {
    std::string last = uri;
    if (auto q = last.find('?'); q != std::string::npos) last.resize(q);
    if (auto s = last.rfind('/'); s != std::string::npos) last = last.substr(s + 1);
    const std::string ext = fs::path(last).extension().string();
    const bool plain = !ext.empty() && ext.size() <= 8 &&
                       std::all_of(ext.begin() + 1, ext.end(), [](unsigned char c) { return std::isalnum(c); });
    return plain ? ext : ".zip";
}

}  // namespace

fs::path fetch_scene(SceneRecord& record, const fs::path& dest_dir, HttpClient& client, const RetryPolicy& retry) {
    if (record.download_uri.empty()) throw ValidationError("scene '" + record.scene_id + "' has no download URI");
    if (!fs::is_directory(dest_dir)) throw IoError("destination '" + dest_dir.string() + "' is not a directory");

    std::optional<DigestAlgorithm> algo;
    std::string expected;
    if (record.checksum) {
        const auto colon = record.checksum->find(':');
        if (colon == std::string::npos) throw ValidationError("checksum '" + *record.checksum + "' lacks an algorithm prefix");
        algo = parse_digest_algorithm(record.checksum->substr(0, colon));
        expected = record.checksum->substr(colon + 1);
        std::transform(expected.begin(), expected.end(), expected.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }

    const fs::path target = dest_dir / (record.scene_id + archive_extension(record.download_uri));
    const fs::path partial = fs::path(target).concat(".part");
    const HttpHeaders auth = catalog_auth_headers();
    std::string actual;
    with_retry(retry, "download of " + record.scene_id, [&] {
        std::ofstream out(partial, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + partial.string() + "'");
        std::optional<Hasher> hasher;
        if (algo) hasher.emplace(*algo);
        try {
            client.get(record.download_uri, auth, [&](const char* d, std::size_t n) {
                out.write(d, static_cast<std::streamsize>(n));
                if (hasher) hasher->update(d, n);
            });
        } catch (...) {
            out.close();
            std::error_code ec;
            fs::remove(partial, ec);
            throw;
        }
        out.close();
        if (!out) throw IoError("failed writing '" + partial.string() + "'");
        if (hasher) actual = hasher->hex_digest();
        return 0;
    });
    if (algo && actual != expected) {
        std::error_code ec;
        fs::remove(partial, ec);
        throw IntegrityError(fmt::format("checksum mismatch for {}: expected {}, got {}", record.scene_id, expected,
                                         actual));
    }
    fs::rename(partial, target);
    record.local_path = target;
    return target;
}

void fetch_all(std::vector<SceneRecord>& records, const fs::path& dest_dir, HttpClient& client, unsigned workers,
               const RetryPolicy& retry) {
    parallel_for(records.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fetch_scene(records[i], dest_dir, client, retry);
    });
}

}  // namespace dde
