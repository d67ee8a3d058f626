#include "advjudge/response_cache.hpp"

#include <ctime>

#include <json.hpp>

#include "advjudge/error.hpp"
#include "advjudge/hashing.hpp"
#include "advjudge/text.hpp"

namespace advjudge {

using nlohmann::json;

std::string cache_request_hash(std::string_view backend_id, std::string_view model_name,
                               std::string_view prompt, RequestKind kind, int max_score) {
  const std::string k = std::to_string(max_score);
  return sha256_fields({backend_id, model_name, prompt, to_string(kind), k});
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string cache_record_to_json(const CacheRecord& record) {
  json obj = {{"request_hash", record.request_hash},
              {"backend_id", record.backend_id},
              {"kind", to_string(record.kind)},
              {"raw_response", record.raw_response},
              {"created_at", record.created_at}};
  return obj.dump();
}

CacheRecord cache_record_from_json(std::string_view line) {
  const json obj = json::parse(line);
  CacheRecord r;
  r.request_hash = obj.at("request_hash").get<std::string>();
  r.backend_id = obj.at("backend_id").get<std::string>();
  r.kind = parse_request_kind(obj.at("kind").get<std::string>());
  r.raw_response = obj.at("raw_response").get<std::string>();
  r.created_at = obj.value("created_at", "");
  return r;
}

std::shared_ptr<ResponseCache> ResponseCache::open(const std::filesystem::path& path) {
  std::shared_ptr<ResponseCache> cache(new ResponseCache());
  cache->path_ = path;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  cache->load();
  cache->out_.open(path, std::ios::binary | std::ios::app);
  if (!cache->out_) throw Error("cannot open cache file for append: " + path.string());
  return cache;
}

std::shared_ptr<ResponseCache> ResponseCache::in_memory() {
  return std::shared_ptr<ResponseCache>(new ResponseCache());
}

void ResponseCache::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    CacheRecord rec;
    try {
      rec = cache_record_from_json(line);
    } catch (const std::exception& e) {
      throw DataError(path_.string() + ":" + std::to_string(line_no) + ": corrupt cache record: " + e.what());
    }
    auto [it, inserted] = entries_.try_emplace(rec.request_hash, rec.raw_response);
    if (!inserted && rec.raw_response < it->second) it->second = rec.raw_response;
  }
}

void ResponseCache::append(const CacheRecord& record) {
  if (path_.empty()) return;
  std::lock_guard lock(file_mutex_);
  out_ << cache_record_to_json(record) << '\n';
  out_.flush();
  if (!out_) throw Error("write to cache file failed: " + path_.string());
}

std::optional<std::string> ResponseCache::lookup(const std::string& request_hash) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(request_hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string ResponseCache::get_or_call(const std::string& request_hash, std::string_view backend_id,
                                       RequestKind kind, const std::function<std::string()>& call) {
  if (auto hit = lookup(request_hash)) {
    ++hits_;
    return *std::move(hit);
  }
  ++misses_;
  std::string response = call();
  {
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(request_hash, response);
    if (!inserted) return it->second;
  }
  append(CacheRecord{request_hash, std::string(backend_id), kind, response, utc_timestamp()});
  return response;
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t ResponseCache::hits() const { return hits_.load(); }
std::size_t ResponseCache::misses() const { return misses_.load(); }

}  // namespace advjudge
