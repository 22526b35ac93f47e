#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dde/date.hpp"
#include "dde/geo.hpp"

namespace dde {

// Rectangle given by two opposite corners plus an inclusive date interval.
struct RoiSpec {
    LatLon corner_a;
    LatLon corner_b;
    Date date_start;
    Date date_end;

    // Throws ValidationError on out-of-range coordinates, an empty rectangle or reversed dates.
    void validate() const;
    Extent bounds() const;  // x = lon, y = lat
    LatLon centroid() const;
    bool contains(Date d) const noexcept { return date_start <= d && d <= date_end; }
};

using Footprint = std::vector<std::vector<LatLon>>;  // one ring per polygon part

// "POLYGON ((lon lat, ...))" or "MULTIPOLYGON (((lon lat, ...)), ...)"; outer rings only.
Footprint parse_wkt_footprint(std::string_view wkt);
std::string roi_wkt(const RoiSpec& roi);
bool footprint_intersects(const Footprint& fp, const Extent& lon_lat_box);

struct SceneRecord {
    std::string scene_id;
    Date sensing_date;
    Footprint footprint;
    std::optional<double> cloud_cover_pct;
    std::string download_uri;
    std::optional<std::filesystem::path> local_path;
    std::optional<std::string> checksum;  // "md5:<hex>" or "sha256:<hex>"
};

struct Manifest {
    RoiSpec roi;
    std::vector<SceneRecord> scenes;  // sorted by sensing date, unique ids
    std::string created_at;
    std::size_t warnings = 0;

    // Sorts by (date, id) and rejects duplicate scene ids.
    void normalise();
    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);
};

// --- transport -----------------------------------------------------------

using HttpHeaders = std::multimap<std::string, std::string>;
using ChunkSink = std::function<void(const char* data, std::size_t size)>;

class HttpClient {
public:
    virtual ~HttpClient() = default;
    // Streams the body of a successful GET into `sink`. Throws TransportError
    // for connection failures and non-2xx responses.
    virtual void get(const std::string& url, const HttpHeaders& headers, const ChunkSink& sink) = 0;

    std::string get_text(const std::string& url, const HttpHeaders& headers = {});
};

// http://, https:// and file:// URLs. Safe to share between threads.
std::unique_ptr<HttpClient> make_http_client(int timeout_seconds = 60);

struct RetryPolicy {
    int attempts = 3;
    int initial_delay_ms = 500;
};

// Basic-auth header from DDE_CATALOG_USER / DDE_CATALOG_PASS, if both are set.
HttpHeaders catalog_auth_headers();
std::optional<std::string> catalog_endpoint_from_env();

std::string url_encode(std::string_view text);

// --- operations ------------------------------------------------------------

struct CatalogQuery {
    std::string endpoint;
    std::string product_type = "S2MSI2A";
    std::size_t page_size = 100;
    RetryPolicy retry;
};

// Paginates an OpenSearch-style JSON catalog until exhausted. Entries outside
// the date interval or not touching the ROI rectangle are dropped.
std::vector<SceneRecord> query_catalog(const RoiSpec& roi, const CatalogQuery& query, HttpClient& client);

// Downloads to dest_dir/<scene_id><ext>, verifying the checksum when present.
// Sets record.local_path.
std::filesystem::path fetch_scene(SceneRecord& record, const std::filesystem::path& dest_dir, HttpClient& client,
                                  const RetryPolicy& retry = {});
void fetch_all(std::vector<SceneRecord>& records, const std::filesystem::path& dest_dir, HttpClient& client,
               unsigned workers, const RetryPolicy& retry = {});

// "md5:<hex>" / "sha256:<hex>" of a file.
std::string file_digest(const std::filesystem::path& path, std::string_view algorithm);

// Local layout: scene_dir/<scene_id>/scene.(tif|tiff|json). Anything else in
// scene_dir counts as one warning.
Manifest build_manifest(const RoiSpec& roi, const std::filesystem::path& scene_dir);
std::optional<std::filesystem::path> find_scene_raster(const std::filesystem::path& folder);

std::string utc_timestamp();

}  // namespace dde
