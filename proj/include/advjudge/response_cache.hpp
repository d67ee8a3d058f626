#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "advjudge/judge.hpp"

namespace advjudge {

/// Content hash of the fields that determine a model response.
std::string cache_request_hash(std::string_view backend_id, std::string_view model_name,
                               std::string_view prompt, RequestKind kind, int max_score);

struct CacheRecord {
  std::string request_hash;
  std::string backend_id;
  RequestKind kind = RequestKind::comparative;
  std::string raw_response;
  std::string created_at;  // RFC 3339, UTC
};

/// Append-only response store. One JSON record per line on disk, fully
/// mirrored in memory. Readers share a lock; inserts and file appends are
/// serialised. When a file holds several records for one hash (two
/// processes raced), the lexicographically smallest response wins so the
/// result does not depend on record order.
class ResponseCache {
 public:
  /// Opens (creating if needed) a cache file and loads its records.
  static std::shared_ptr<ResponseCache> open(const std::filesystem::path& path);
  static std::shared_ptr<ResponseCache> in_memory();

  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  /// Hit: stored response, `call` not invoked. Miss: invokes `call` once,
  /// persists, returns. Concurrent misses on one key may both call, but
  /// every caller gets the response that was stored first.
  std::string get_or_call(const std::string& request_hash, std::string_view backend_id, RequestKind kind,
                          const std::function<std::string()>& call);

  std::optional<std::string> lookup(const std::string& request_hash) const;

  std::size_t size() const;
  std::size_t hits() const;
  std::size_t misses() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  ResponseCache() = default;
  void load();
  void append(const CacheRecord& record);

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
  std::mutex file_mutex_;
  std::ofstream out_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

std::string cache_record_to_json(const CacheRecord& record);
CacheRecord cache_record_from_json(std::string_view line);

/// Current UTC time as RFC 3339 (second precision).
std::string utc_timestamp();

}  // namespace advjudge
