#include "httplib.h"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "doctest.h"

#include "dde/acquisition.hpp"
#include "dde/digest.hpp"
#include "dde/error.hpp"
#include "test_support.hpp"

using namespace dde;
using dde::testing::TempDir;
using dde::testing::ymd;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = DDE_FIXTURE_DIR;

RoiSpec january_roi() { return RoiSpec{{41.3, 2.6}, {41.7, 3.2}, ymd(2022, 1, 1), ymd(2022, 1, 31)}; }

std::string file_url(const fs::path& p) { return "file://" + fs::absolute(p).string(); }

CatalogQuery fixture_query(const std::string& name) {
    CatalogQuery q;
    q.endpoint = file_url(kFixtures / "catalog" / name);
    q.retry.initial_delay_ms = 0;
    return q;
}

// Serves pages from an in-memory list of entries, recording requested URLs.
class PagedCatalog : public HttpClient {
public:
    explicit PagedCatalog(std::size_t total) : total_(total) {}

    void get(const std::string& url, const HttpHeaders&, const ChunkSink& sink) override {
        urls.push_back(url);
        if (fail_next > 0) {
            --fail_next;
            throw TransportError("HTTP 503", true);
        }
        const auto start = std::stoul(url.substr(url.find("&start=") + 7));
        const auto rows = std::stoul(url.substr(url.find("&rows=") + 6));
        std::string body = R"({"feed": {"opensearch:totalResults": ")" + std::to_string(total_) + R"(", "entry": [)";
        for (std::size_t i = start; i < std::min(total_, start + rows); ++i) {
            if (i > start) body += ",";
            body += R"({"title": "S_)" + std::to_string(i) +
                    R"(", "link": [{"href": "http://x/y.zip"}], "date": [{"name": "beginposition", "content": "2022-01-)" +
                    (i % 28 + 1 < 10 ? "0" : "") + std::to_string(i % 28 + 1) + R"(T10:00:00Z"}]})";
        }
        body += "]}}";
        sink(body.data(), body.size());
    }

    std::vector<std::string> urls;
    int fail_next = 0;

private:
    std::size_t total_;
};

class StubServer {
public:
    StubServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string payload_kib() {
    std::string s(1024, '\0');
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<char>((i * 131 + 7) & 0xff);
    return s;
}

void write_scene(const fs::path& folder, Date date, bool with_date = true) {
    fs::create_directories(folder);
    auto r = dde::testing::constant_raster(4, 4, 0.1f, date, 3.0, 41.5, 0.001, "EPSG:4326");
    if (!with_date) r.acquisition_date.reset();
    write_raster(r, folder / "scene.tif");
}

}  // namespace

TEST_CASE("roi validation") {
    CHECK_NOTHROW(january_roi().validate());
    auto r = january_roi();
    r.corner_a.lat = 91;
    CHECK_THROWS_AS(r.validate(), ValidationError);
    r = january_roi();
    r.corner_b.lon = -181;
    CHECK_THROWS_AS(r.validate(), ValidationError);
    r = january_roi();
    r.corner_b.lat = r.corner_a.lat;
    CHECK_THROWS_AS(r.validate(), ValidationError);
    r = january_roi();
    std::swap(r.date_start, r.date_end);
    CHECK_THROWS_AS(r.validate(), ValidationError);

    const auto b = january_roi().bounds();
    CHECK(b.min_x == 2.6);
    CHECK(b.max_y == 41.7);
    CHECK(january_roi().centroid().lat == doctest::Approx(41.5));
    CHECK(roi_wkt(january_roi()) == "POLYGON((2.6 41.3,3.2 41.3,3.2 41.7,2.6 41.7,2.6 41.3))");
}

TEST_CASE("wkt footprints") {
    auto p = parse_wkt_footprint("POLYGON ((1 2, 3 2, 3 4, 1 2), (1.5 2.5, 2 2.5, 2 3, 1.5 2.5))");
    REQUIRE(p.size() == 1);  // hole dropped
    CHECK(p[0][1].lon == 3.0);
    CHECK(p[0][1].lat == 2.0);
    auto m = parse_wkt_footprint("MULTIPOLYGON (((0 0, 1 0, 1 1, 0 0)), ((5 5, 6 5, 6 6, 5 5), (5.1 5.1, 5.2 5.1, 5.2 5.2, 5.1 5.1)))");
    CHECK(m.size() == 2);
    CHECK(m[1][0].lon == 5.0);
    CHECK_THROWS_AS(parse_wkt_footprint("POINT (1 2)"), ParseError);
    CHECK_THROWS_AS(parse_wkt_footprint("POLYGON ((1 2, 3"), ParseError);

    const Extent box{0, 0, 10, 10};
    CHECK(footprint_intersects(parse_wkt_footprint("POLYGON ((2 2, 3 2, 3 3, 2 2))"), box));          // inside
    CHECK(footprint_intersects(parse_wkt_footprint("POLYGON ((-5 -5, 15 -5, 15 15, -5 15, -5 -5))"), box));  // covers
    CHECK(footprint_intersects(parse_wkt_footprint("POLYGON ((-5 5, 5 -20, 15 5, -5 5))"), box));     // edges cross
    CHECK_FALSE(footprint_intersects(parse_wkt_footprint("POLYGON ((11 11, 12 11, 12 12, 11 11))"), box));
    CHECK_FALSE(footprint_intersects(parse_wkt_footprint("POLYGON ((11 -5, 20 -5, 20 20, 11 20, 11 -5))"), box));
}

TEST_CASE("catalog query against fixtures") {
    auto client = make_http_client();
    auto recs = query_catalog(january_roi(), fixture_query("three_entries.json"), *client);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].scene_id == "S2A_MSIL2A_20220105T103421_N0301_R108_T31TDH");
    CHECK(recs[0].sensing_date == ymd(2022, 1, 5));
    CHECK(*recs[0].cloud_cover_pct == 12.5);
    CHECK(recs[0].download_uri == "https://catalog.example/odata/v1/Products('4b1c4a0e')/$value");
    CHECK(recs[1].checksum == "md5:0123456789abcdef0123456789abcdef");
    CHECK(recs[1].footprint[0].size() == 5);

    CHECK(query_catalog(january_roi(), fixture_query("empty.json"), *client).empty());
    CHECK_THROWS_AS(query_catalog(january_roi(), fixture_query("truncated.json"), *client), ParseError);
    auto single = query_catalog(january_roi(), fixture_query("single_object.json"), *client);
    REQUIRE(single.size() == 1);
    CHECK(single[0].download_uri == "https://catalog.example/single.zip");

    auto outside = january_roi();
    outside.corner_a = {10.0, 10.0};
    outside.corner_b = {11.0, 11.0};
    CHECK(query_catalog(outside, fixture_query("three_entries.json"), *client).empty());

    CHECK_THROWS_AS(query_catalog(january_roi(), fixture_query("no_such_file.json"), *client), TransportError);
    CHECK_THROWS_AS(query_catalog(january_roi(), CatalogQuery{}, *client), ValidationError);
}

TEST_CASE("catalog pagination and retry") {
    PagedCatalog cat(5);
    CatalogQuery q;
    q.endpoint = "https://catalog.example/search";
    q.page_size = 2;
    q.retry.initial_delay_ms = 0;
    auto recs = query_catalog(january_roi(), q, cat);
    CHECK(recs.size() == 5);
    REQUIRE(cat.urls.size() == 3);
    CHECK(cat.urls[0].rfind("https://catalog.example/search?q=", 0) == 0);
    CHECK(cat.urls[0].find("&rows=2&start=0&format=json") != std::string::npos);
    CHECK(cat.urls[2].find("&start=4") != std::string::npos);
    CHECK(cat.urls[0].find(url_encode("Intersects(POLYGON((2.6 41.3,")) != std::string::npos);
    CHECK(cat.urls[0].find(url_encode("beginposition:[2022-01-01T00:00:00.000Z TO 2022-01-31T23:59:59.999Z]")) !=
          std::string::npos);
    CHECK(cat.urls[0].find(url_encode("producttype:S2MSI2A")) != std::string::npos);

    PagedCatalog flaky(3);
    flaky.fail_next = 2;
    CHECK(query_catalog(january_roi(), q, flaky).size() == 3);

    PagedCatalog down(3);
    down.fail_next = 5;
    try {
        query_catalog(january_roi(), q, down);
        FAIL("expected transport error");
    } catch (const TransportError& e) {
        CHECK(e.retryable());
    }
}

TEST_CASE("query never returns dates outside the interval") {
    PagedCatalog cat(60);
    CatalogQuery q;
    q.endpoint = "https://catalog.example/search";
    q.page_size = 7;
    auto roi = january_roi();
    roi.date_start = ymd(2022, 1, 10);
    roi.date_end = ymd(2022, 1, 12);
    for (const auto& r : query_catalog(roi, q, cat)) CHECK(roi.contains(r.sensing_date));
}

TEST_CASE("credentials from environment") {
    ::unsetenv("DDE_CATALOG_USER");
    ::unsetenv("DDE_CATALOG_PASS");
    CHECK(catalog_auth_headers().empty());
    ::setenv("DDE_CATALOG_USER", "alice", 1);
    ::setenv("DDE_CATALOG_PASS", "s3cret", 1);
    auto h = catalog_auth_headers();
    REQUIRE(h.size() == 1);
    CHECK(h.begin()->first == "Authorization");
    CHECK(h.begin()->second == "Basic YWxpY2U6czNjcmV0");
    ::unsetenv("DDE_CATALOG_USER");
    ::unsetenv("DDE_CATALOG_PASS");

    ::setenv("DDE_CATALOG_ENDPOINT", "https://hub.example/search", 1);
    CHECK(catalog_endpoint_from_env() == "https://hub.example/search");
    ::unsetenv("DDE_CATALOG_ENDPOINT");
    CHECK_FALSE(catalog_endpoint_from_env().has_value());
    CHECK(url_encode("a b/\"") == "a%20b%2F%22");
}

TEST_CASE("digests") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    TempDir dir;
    std::ofstream(dir / "f.txt", std::ios::binary) << "abc";
    CHECK(file_digest(dir / "f.txt", "md5") == "md5:900150983cd24fb0d6963f7d28e17f72");
    CHECK_THROWS_AS(file_digest(dir / "f.txt", "crc32"), ArgumentError);
}

TEST_CASE("scene download from stub server") {
    StubServer stub;
    const std::string payload = payload_kib();
    std::atomic<int> flaky_hits{0};
    stub.server().Get("/scene.zip", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(payload, "application/zip");
    });
    stub.server().Get("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (flaky_hits++ == 0) {
            res.status = 503;
            return;
        }
        res.set_content(payload, "application/octet-stream");
    });
    stub.server().Get("/gone", [](const httplib::Request&, httplib::Response& res) { res.status = 404; });

    TempDir dir;
    auto client = make_http_client(5);
    const RetryPolicy fast{3, 0};

    SceneRecord rec;
    rec.scene_id = "S2A_TEST";
    rec.sensing_date = ymd(2022, 1, 5);
    rec.download_uri = stub.url("/scene.zip");
    rec.checksum = "sha256:" + sha256_hex(payload);
    const auto path = fetch_scene(rec, dir.path(), *client, fast);
    CHECK(path == dir / "S2A_TEST.zip");
    CHECK(rec.local_path == path);
    CHECK(fs::file_size(path) == 1024);
    CHECK(file_digest(path, "sha256") == *rec.checksum);

    SceneRecord bad = rec;
    bad.scene_id = "S2A_BAD";
    bad.checksum = "md5:00000000000000000000000000000000";
    CHECK_THROWS_AS(fetch_scene(bad, dir.path(), *client, fast), IntegrityError);
    CHECK_FALSE(fs::exists(dir / "S2A_BAD.zip"));
    CHECK_FALSE(fs::exists(dir / "S2A_BAD.zip.part"));

    CHECK_THROWS_AS(fetch_scene(rec, dir / "missing", *client, fast), IoError);

    SceneRecord flaky = rec;
    flaky.scene_id = "S2A_FLAKY";
    flaky.download_uri = stub.url("/flaky");
    CHECK(fs::file_size(fetch_scene(flaky, dir.path(), *client, fast)) == 1024);
    CHECK(flaky_hits == 2);

    SceneRecord gone = rec;
    gone.download_uri = stub.url("/gone");
    try {
        fetch_scene(gone, dir.path(), *client, fast);
        FAIL("expected transport error");
    } catch (const TransportError& e) {
        CHECK_FALSE(e.retryable());
    }

    std::vector<SceneRecord> many(6, rec);
    for (std::size_t i = 0; i < many.size(); ++i) many[i].scene_id = "S_" + std::to_string(i);
    fetch_all(many, dir.path(), *client, 3, fast);
    for (const auto& r : many) CHECK(fs::file_size(*r.local_path) == 1024);
}

TEST_CASE("manifest from local scene directory") {
    TempDir dir;
    const RoiSpec roi = january_roi();
    CHECK_THROWS_AS(build_manifest(roi, dir / "absent"), IoError);

    fs::create_directories(dir / "empty");
    auto none = build_manifest(roi, dir / "empty");
    CHECK(none.scenes.empty());
    CHECK(none.warnings == 0);

    write_scene(dir / "scenes" / "B_later", ymd(2022, 1, 20));
    write_scene(dir / "scenes" / "A_earlier", ymd(2022, 1, 3));
    auto two = build_manifest(roi, dir / "scenes");
    REQUIRE(two.scenes.size() == 2);
    CHECK(two.scenes[0].scene_id == "A_earlier");
    CHECK(two.scenes[1].sensing_date == ymd(2022, 1, 20));
    CHECK(two.scenes[0].local_path == dir / "scenes" / "A_earlier" / "scene.tif");
    CHECK(two.scenes[0].footprint.size() == 1);
    CHECK(two.warnings == 0);

    fs::create_directories(dir / "scenes" / "junk");
    std::ofstream(dir / "scenes" / "junk" / "readme.txt") << "not a scene";
    write_scene(dir / "scenes" / "S2_2022-01-09_nodate", ymd(2000, 1, 1), false);
    auto mixed = build_manifest(roi, dir / "scenes");
    CHECK(mixed.scenes.size() == 3);
    CHECK(mixed.warnings == 1);
    CHECK(mixed.scenes[1].sensing_date == ymd(2022, 1, 9));  // from the folder name

    mixed.save(dir / "manifest.json");
    auto back = Manifest::load(dir / "manifest.json");
    REQUIRE(back.scenes.size() == 3);
    CHECK(back.scenes[2].scene_id == "B_later");
    CHECK(back.scenes[2].local_path == mixed.scenes[2].local_path);
    CHECK(back.roi.date_end == roi.date_end);
    CHECK(back.warnings == 1);
    CHECK(back.scenes[0].footprint[0][2].lat == doctest::Approx(mixed.scenes[0].footprint[0][2].lat));

    Manifest dup = back;
    dup.scenes.push_back(dup.scenes.front());
    CHECK_THROWS_AS(dup.normalise(), ValidationError);
}
