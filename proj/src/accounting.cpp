#include "backbone_cdn/accounting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include <omp.h>

#include <json.hpp>

namespace backbone_cdn {

namespace {

struct Partial {
  std::uint64_t data_read = 0;
  std::uint64_t hits = 0;
  std::uint64_t origin = 0;
  std::unordered_map<std::string_view, std::uint64_t> files;  // path -> size

  void add(const AccessRecord& r) {
    data_read += r.bytes_read;
    hits += r.bytes_from_cache;
    origin += r.bytes_from_origin;
    auto [it, inserted] = files.try_emplace(r.file.path(), r.file_size);
    if (!inserted) it->second = std::max(it->second, r.file_size);
  }

  void merge(const Partial& other) {
    data_read += other.data_read;
    hits += other.hits;
    origin += other.origin;
    for (const auto& [path, size] : other.files) {
      auto [it, inserted] = files.try_emplace(path, size);
      if (!inserted) it->second = std::max(it->second, size);
    }
  }
};

using PartialMap = std::map<std::string_view, Partial>;

std::vector<NamespaceReport> finish(const PartialMap& parts) {
  std::vector<NamespaceReport> out;
  out.reserve(parts.size());
  for (const auto& [ns, p] : parts) {
    NamespaceReport r;
    r.ns = std::string(ns);
    for (const auto& [_, size] : p.files) r.working_set_bytes += size;
    r.data_read_bytes = p.data_read;
    r.hits_bytes = p.hits;
    r.misses_bytes = p.origin;
    r.origin_bytes = p.origin;
    out.push_back(std::move(r));
  }
  return out;
}

std::string ratio_json(const Ratio& r) {
  if (!r.defined()) return "null";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.6g", r.value());
  return buf;
}

}  // namespace

double Ratio::value() const {
  if (den == 0) throw UndefinedRatio("ratio with zero denominator");
  return static_cast<double>(num) / static_cast<double>(den);
}

void AccessRecord::validate() const {
  if (bytes_from_cache + bytes_from_origin != bytes_read) {
    throw InvalidRecord("bytes_from_cache + bytes_from_origin (" + std::to_string(bytes_from_cache) + " + " +
                        std::to_string(bytes_from_origin) + ") != bytes_read (" + std::to_string(bytes_read) + ")");
  }
  if (bytes_read > file_size) {
    throw InvalidRecord("bytes_read (" + std::to_string(bytes_read) + ") exceeds file_size (" +
                        std::to_string(file_size) + ")");
  }
  if (failed() && bytes_read != 0) throw InvalidRecord("bytes_read must be 0 for a failed access");
  if (client.empty()) throw InvalidRecord("client is empty");
  if (file.path().empty()) throw InvalidRecord("path is empty");
}

std::vector<NamespaceReport> aggregate_serial(std::span<const AccessRecord> records, TimeWindow window) {
  PartialMap parts;
  for (const auto& r : records) {
    if (r.failed() || !window.contains(r.t_ms)) continue;
    parts[r.file.ns()].add(r);
  }
  return finish(parts);
}

std::vector<NamespaceReport> aggregate(std::span<const AccessRecord> records, TimeWindow window) {
  const auto n = static_cast<std::int64_t>(records.size());
  const int threads = n < 4096 ? 1 : omp_get_max_threads();
  std::vector<PartialMap> local(static_cast<std::size_t>(threads));

#pragma omp parallel num_threads(threads)
  {
    PartialMap& mine = local[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const AccessRecord& r = records[static_cast<std::size_t>(i)];
      if (r.failed() || !window.contains(r.t_ms)) continue;
      mine[r.file.ns()].add(r);
    }
  }

  // Integer sums and max-merged sizes make the result independent of thread count.
  PartialMap merged = std::move(local.front());
  for (std::size_t t = 1; t < local.size(); ++t) {
    for (const auto& [ns, p] : local[t]) merged[ns].merge(p);
  }
  return finish(merged);
}

void AccessLog::record(AccessRecord r) {
  r.validate();
  std::lock_guard lock(mu_);
  records_.push_back(std::move(r));
}

std::vector<AccessRecord> AccessLog::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t AccessLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::optional<NamespaceReport> AccessLog::one(std::string_view ns, TimeWindow window) const {
  std::lock_guard lock(mu_);
  std::vector<AccessRecord> matching;
  for (const auto& r : records_) {
    if (r.file.ns() == ns) matching.push_back(r);
  }
  auto reports = aggregate(matching, window);
  if (reports.empty()) return std::nullopt;
  return reports.front();
}

std::uint64_t AccessLog::working_set(std::string_view ns, TimeWindow window) const {
  auto r = one(ns, window);
  return r ? r->working_set_bytes : 0;
}

std::uint64_t AccessLog::data_read(std::string_view ns, TimeWindow window) const {
  auto r = one(ns, window);
  return r ? r->data_read_bytes : 0;
}

double AccessLog::reuse_factor(std::string_view ns, TimeWindow window) const {
  auto r = one(ns, window);
  if (!r || r->working_set_bytes == 0) {
    throw UndefinedRatio("namespace '" + std::string(ns) + "' has an empty working set");
  }
  return r->reuse_factor().value();
}

std::vector<NamespaceReport> AccessLog::report(TimeWindow window) const {
  std::lock_guard lock(mu_);
  return aggregate(records_, window);
}

std::string render_ratio(double value) {
  char buf[64];
  if (value >= 10.0) {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(value)));
  } else {
    std::snprintf(buf, sizeof buf, "%.1f", value);
  }
  return buf;
}

std::string render_report_json(const std::vector<NamespaceReport>& reports) {
  std::string out = "[";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out += i == 0 ? "\n" : ",\n";
    out += "  {\"namespace\": " + nlohmann::json(r.ns).dump() +
           ", \"working_set_bytes\": " + std::to_string(r.working_set_bytes) +
           ", \"data_read_bytes\": " + std::to_string(r.data_read_bytes) +
           ", \"reuse_factor\": " + ratio_json(r.reuse_factor()) +
           ", \"hits_bytes\": " + std::to_string(r.hits_bytes) +
           ", \"misses_bytes\": " + std::to_string(r.misses_bytes) +
           ", \"hit_ratio\": " + ratio_json(r.hit_ratio()) +
           ", \"origin_bytes\": " + std::to_string(r.origin_bytes) + "}";
  }
  out += reports.empty() ? "]\n" : "\n]\n";
  return out;
}

std::string render_report_table(const std::vector<NamespaceReport>& reports) {
  std::string out = "Namespace\tWorking Set (TB)\tData Read (TB)\tData Reuse Factor\tHit Ratio\n";
  char buf[256];
  for (const auto& r : reports) {
    const auto reuse = r.reuse_factor();
    const auto hit = r.hit_ratio();
    std::snprintf(buf, sizeof buf, "%s\t%.6g\t%.6g\t%s\t%s\n", r.ns.c_str(),
                  static_cast<double>(r.working_set_bytes) / 1e12, static_cast<double>(r.data_read_bytes) / 1e12,
                  reuse.defined() ? render_ratio(reuse.value()).c_str() : "-",
                  hit.defined() ? render_ratio(hit.value()).c_str() : "-");
    out += buf;
  }
  return out;
}

std::string format_access_record(const AccessRecord& r) {
  return std::to_string(r.t_ms) + "\t" + r.client.str() + "\t" + (r.cache ? r.cache->str() : "-") + "\t" +
         r.file.path() + "\t" + std::to_string(r.file_size) + "\t" + std::to_string(r.bytes_read) + "\t" +
         std::to_string(r.bytes_from_cache) + "\t" + std::to_string(r.bytes_from_origin) + "\n";
}

std::string format_access_log(std::span<const AccessRecord> records) {
  std::string out;
  for (const auto& r : records) out += format_access_record(r);
  return out;
}

std::vector<AccessRecord> parse_access_log(std::string_view text) {
  std::vector<AccessRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    if (!terminated) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const std::string where = "access log line " + std::to_string(line_no);
    if (line.empty()) continue;
    if (!terminated) throw ParseError(where + ": truncated (no line terminator)");

    std::vector<std::string_view> f;
    std::size_t p = 0;
    while (true) {
      const std::size_t t = line.find('\t', p);
      f.push_back(line.substr(p, t == std::string_view::npos ? std::string_view::npos : t - p));
      if (t == std::string_view::npos) break;
      p = t + 1;
    }
    if (f.size() != 8) throw ParseError(where + ": expected 8 fields, got " + std::to_string(f.size()));

    auto u64 = [&](std::string_view s, const char* name) {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(where + ": bad " + name + " '" + std::string(s) + "'");
      }
      return v;
    };
    AccessRecord r;
    {
      std::int64_t t = 0;
      auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), t);
      if (f[0].empty() || ec != std::errc{} || ptr != f[0].data() + f[0].size()) {
        throw ParseError(where + ": bad t_ms '" + std::string(f[0]) + "'");
      }
      r.t_ms = t;
    }
    if (!NodeId::is_valid(f[1])) throw ParseError(where + ": bad client '" + std::string(f[1]) + "'");
    r.client = NodeId(std::string(f[1]));
    if (f[2] != "-") {
      if (!NodeId::is_valid(f[2])) throw ParseError(where + ": bad cache '" + std::string(f[2]) + "'");
      r.cache = NodeId(std::string(f[2]));
    }
    if (!FileId::is_valid(f[3])) throw ParseError(where + ": bad path '" + std::string(f[3]) + "'");
    r.file = FileId(std::string(f[3]));
    r.file_size = u64(f[4], "file_size");
    r.bytes_read = u64(f[5], "bytes_read");
    r.bytes_from_cache = u64(f[6], "bytes_from_cache");
    r.bytes_from_origin = u64(f[7], "bytes_from_origin");
    try {
      r.validate();
    } catch (const InvalidRecord& e) {
      throw ParseError(where + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace backbone_cdn
