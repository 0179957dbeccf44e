#include "backbone_cdn/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace backbone_cdn {

using nlohmann::json;

std::uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  // Reject the low sliver that would bias the modulo.
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

std::uint64_t SplitMix64::between(std::uint64_t lo, std::uint64_t hi) {
  if (lo == 0 && hi == UINT64_MAX) return next();
  return lo + below(hi - lo + 1);
}

double SplitMix64::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

void WorkloadSpec::validate() const {
  if (ns.empty() || ns.find('/') != std::string::npos || !FileId::is_valid("/" + ns + "/x")) {
    throw InvalidSpec("namespace: invalid '" + ns + "'");
  }
  if (file_count < 1) throw InvalidSpec("file_count: must be >= 1");
  if (duration_ms < 1) throw InvalidSpec("duration_ms: must be >= 1");
  if (origins.empty()) throw InvalidSpec("origins: must not be empty");
  if (const auto* u = std::get_if<UniformSizes>(&sizes); u && u->min > u->max) {
    throw InvalidSpec("size_distribution: min > max");
  }
  if (const auto* z = std::get_if<ZipfSizes>(&sizes)) {
    if (z->min < 1 || z->min > z->max) throw InvalidSpec("size_distribution: need 1 <= min <= max");
    if (!(z->s > 0.0)) throw InvalidSpec("size_distribution.s: must be > 0");
  }
  if (const auto* z = std::get_if<ZipfPopularity>(&popularity); z && !(z->s > 0.0)) {
    throw InvalidSpec("popularity.s: must be > 0");
  }
  if (const auto* r = std::get_if<RandomRange>(&read_style); r && r->min_len > r->max_len) {
    throw InvalidSpec("read_style: min_len > max_len");
  }
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InvalidSpec(where + ": unknown field '" + key + "'");
    }
  }
}

std::uint64_t u64_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw InvalidSpec(where + key + ": missing");
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) throw InvalidSpec(where + key + ": expected non-negative integer");
  return v.get<std::uint64_t>();
}

double num_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw InvalidSpec(where + key + ": missing");
  const json& v = obj.at(key);
  if (!v.is_number()) throw InvalidSpec(where + key + ": expected number");
  return v.get<double>();
}

std::string kind_of(const json& obj, const std::string& where) {
  if (!obj.is_object() || !obj.contains("kind") || !obj["kind"].is_string()) {
    throw InvalidSpec(where + ": expected object with string 'kind'");
  }
  return obj["kind"].get<std::string>();
}

}  // namespace

WorkloadSpec parse_workload_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("workload spec: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("workload spec: top level must be an object");
  reject_unknown(doc,
                 {"namespace", "file_count", "size_distribution", "access_count", "popularity", "read_style",
                  "duration_ms", "seed", "origins"},
                 "spec");

  WorkloadSpec spec;
  if (!doc.contains("namespace") || !doc["namespace"].is_string()) throw InvalidSpec("namespace: expected string");
  spec.ns = doc["namespace"].get<std::string>();
  spec.file_count = u64_field(doc, "file_count", "");
  spec.access_count = u64_field(doc, "access_count", "");
  spec.duration_ms = static_cast<std::int64_t>(u64_field(doc, "duration_ms", ""));
  spec.seed = u64_field(doc, "seed", "");

  if (!doc.contains("size_distribution")) throw InvalidSpec("size_distribution: missing");
  {
    const json& d = doc["size_distribution"];
    const std::string w = "size_distribution.";
    const std::string kind = kind_of(d, "size_distribution");
    if (kind == "uniform") {
      reject_unknown(d, {"kind", "min", "max"}, "size_distribution");
      spec.sizes = UniformSizes{u64_field(d, "min", w), u64_field(d, "max", w)};
    } else if (kind == "fixed") {
      reject_unknown(d, {"kind", "size"}, "size_distribution");
      spec.sizes = FixedSize{u64_field(d, "size", w)};
    } else if (kind == "zipf_sizes") {
      reject_unknown(d, {"kind", "min", "max", "s"}, "size_distribution");
      spec.sizes = ZipfSizes{u64_field(d, "min", w), u64_field(d, "max", w), num_field(d, "s", w)};
    } else {
      throw InvalidSpec("size_distribution.kind: unknown '" + kind + "'");
    }
  }
  if (doc.contains("popularity")) {
    const json& p = doc["popularity"];
    const std::string kind = kind_of(p, "popularity");
    if (kind == "uniform") {
      reject_unknown(p, {"kind"}, "popularity");
      spec.popularity = UniformPopularity{};
    } else if (kind == "zipf") {
      reject_unknown(p, {"kind", "s"}, "popularity");
      spec.popularity = ZipfPopularity{num_field(p, "s", "popularity.")};
    } else {
      throw InvalidSpec("popularity.kind: unknown '" + kind + "'");
    }
  }
  if (doc.contains("read_style")) {
    const json& r = doc["read_style"];
    const std::string kind = kind_of(r, "read_style");
    if (kind == "full_file") {
      reject_unknown(r, {"kind"}, "read_style");
      spec.read_style = FullFile{};
    } else if (kind == "random_range") {
      reject_unknown(r, {"kind", "min_len", "max_len"}, "read_style");
      spec.read_style = RandomRange{u64_field(r, "min_len", "read_style."), u64_field(r, "max_len", "read_style.")};
    } else {
      throw InvalidSpec("read_style.kind: unknown '" + kind + "'");
    }
  }
  if (doc.contains("origins")) {
    const json& o = doc["origins"];
    if (!o.is_array()) throw InvalidSpec("origins: expected array");
    spec.origins.clear();
    for (const auto& v : o) {
      if (!v.is_string() || !NodeId::is_valid(v.get<std::string>())) throw InvalidSpec("origins: invalid node id");
      spec.origins.emplace_back(v.get<std::string>());
    }
  }
  spec.validate();
  return spec;
}

const CatalogEntry* Trace::find(const FileId& file) const {
  for (const auto& e : catalog) {
    if (e.meta.id == file) return &e;
  }
  return nullptr;
}

void Trace::validate() const {
  std::map<FileId, std::uint64_t> sizes;
  for (const auto& e : catalog) {
    if (!sizes.emplace(e.meta.id, e.meta.size).second) {
      throw ValidationError("trace catalog: duplicate path '" + e.meta.id.path() + "'");
    }
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    const std::string where = "trace event " + std::to_string(i);
    if (i > 0 && ev.t_ms < events[i - 1].t_ms) throw ValidationError(where + ": events not sorted by t_ms");
    auto it = sizes.find(ev.file);
    if (it == sizes.end()) throw ValidationError(where + ": '" + ev.file.path() + "' not in catalog");
    if (ev.offset > it->second || ev.length > it->second - ev.offset) {
      throw ValidationError(where + ": range outside file");
    }
  }
}

Trace generate(const WorkloadSpec& spec, const std::vector<NodeId>& clients) {
  spec.validate();
  if (clients.empty()) throw InvalidSpec("clients: must not be empty");

  SplitMix64 rng(spec.seed);
  Trace trace;
  trace.catalog.reserve(spec.file_count);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(spec.file_count - 1).size()));
  for (std::uint64_t i = 0; i < spec.file_count; ++i) {
    std::uint64_t size = 0;
    if (const auto* u = std::get_if<UniformSizes>(&spec.sizes)) {
      size = rng.between(u->min, u->max);
    } else if (const auto* f = std::get_if<FixedSize>(&spec.sizes)) {
      size = f->size;
    } else {
      const auto& z = std::get<ZipfSizes>(spec.sizes);
      // Inverse CDF of a power law with exponent s truncated to [min, max].
      const double u = rng.unit();
      const double lo = std::pow(static_cast<double>(z.min), -z.s);
      const double hi = std::pow(static_cast<double>(z.max), -z.s);
      const double x = std::pow(lo - u * (lo - hi), -1.0 / z.s);
      size = std::clamp(static_cast<std::uint64_t>(std::floor(x)), z.min, z.max);
    }
    const std::uint64_t seed = rng.next();
    char name[64];
    std::snprintf(name, sizeof name, "file-%0*llu", width, static_cast<unsigned long long>(i));
    trace.catalog.push_back(CatalogEntry{FileMeta::make(FileId("/" + spec.ns + "/" + name), size, seed),
                                         spec.origins[i % spec.origins.size()]});
  }

  std::vector<double> cdf;
  if (const auto* z = std::get_if<ZipfPopularity>(&spec.popularity)) {
    cdf.reserve(spec.file_count);
    double total = 0.0;
    for (std::uint64_t k = 1; k <= spec.file_count; ++k) {
      total += std::pow(static_cast<double>(k), -z->s);
      cdf.push_back(total);
    }
    for (double& c : cdf) c /= total;
  }

  trace.events.reserve(spec.access_count);
  for (std::uint64_t a = 0; a < spec.access_count; ++a) {
    std::uint64_t idx = 0;
    if (cdf.empty()) {
      idx = rng.below(spec.file_count);
    } else {
      const double u = rng.unit();
      idx = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      idx = std::min<std::uint64_t>(idx, spec.file_count - 1);
    }
    TraceEvent ev;
    ev.client = clients[rng.below(clients.size())];
    ev.t_ms = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(spec.duration_ms)));
    const FileMeta& meta = trace.catalog[idx].meta;
    ev.file = meta.id;
    if (const auto* r = std::get_if<RandomRange>(&spec.read_style)) {
      const std::uint64_t hi = std::min(r->max_len, meta.size);
      const std::uint64_t lo = std::min(r->min_len, hi);
      ev.length = rng.between(lo, hi);
      ev.offset = rng.between(0, meta.size - ev.length);
    } else {
      ev.offset = 0;
      ev.length = meta.size;
    }
    trace.events.push_back(std::move(ev));
  }
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.t_ms < b.t_ms; });
  return trace;
}

std::string format_trace(const Trace& trace) {
  std::string out = "#catalog\n";
  for (const auto& e : trace.catalog) {
    out += e.meta.id.path() + "\t" + std::to_string(e.meta.size) + "\t" + std::to_string(e.meta.gen_seed) + "\t" +
           e.origin.str() + "\n";
  }
  out += "#events\n";
  for (const auto& ev : trace.events) {
    out += std::to_string(ev.t_ms) + "\t" + ev.client.str() + "\t" + ev.file.path() + "\t" +
           std::to_string(ev.offset) + "\t" + std::to_string(ev.length) + "\n";
  }
  return out;
}

Trace parse_trace(std::string_view text) {
  enum class Section { none, catalog, events } section = Section::none;
  Trace trace;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    if (!terminated) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const std::string where = "trace line " + std::to_string(line_no);
    if (line.empty()) continue;
    if (!terminated) throw ParseError(where + ": truncated (no line terminator)");
    if (line == "#catalog") {
      if (section != Section::none) throw ParseError(where + ": unexpected #catalog");
      section = Section::catalog;
      continue;
    }
    if (line == "#events") {
      if (section != Section::catalog) throw ParseError(where + ": #events before #catalog");
      section = Section::events;
      continue;
    }
    if (section == Section::none) throw ParseError(where + ": expected #catalog header");

    std::vector<std::string_view> f;
    std::size_t p = 0;
    while (true) {
      const std::size_t t = line.find('\t', p);
      f.push_back(line.substr(p, t == std::string_view::npos ? std::string_view::npos : t - p));
      if (t == std::string_view::npos) break;
      p = t + 1;
    }
    auto u64 = [&](std::string_view s, const char* name) {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(where + ": bad " + name + " '" + std::string(s) + "'");
      }
      return v;
    };
    auto path = [&](std::string_view s) {
      if (!FileId::is_valid(s)) throw ParseError(where + ": bad path '" + std::string(s) + "'");
      return FileId(std::string(s));
    };
    auto node = [&](std::string_view s) {
      if (!NodeId::is_valid(s)) throw ParseError(where + ": bad node id '" + std::string(s) + "'");
      return NodeId(std::string(s));
    };

    if (section == Section::catalog) {
      if (f.size() != 4) throw ParseError(where + ": catalog rows have 4 fields");
      trace.catalog.push_back(CatalogEntry{FileMeta::make(path(f[0]), u64(f[1], "size"), u64(f[2], "seed")), node(f[3])});
    } else {
      if (f.size() != 5) throw ParseError(where + ": event rows have 5 fields");
      TraceEvent ev;
      std::int64_t t = 0;
      auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), t);
      if (f[0].empty() || ec != std::errc{} || ptr != f[0].data() + f[0].size()) {
        throw ParseError(where + ": bad t_ms '" + std::string(f[0]) + "'");
      }
      ev.t_ms = t;
      ev.client = node(f[1]);
      ev.file = path(f[2]);
      ev.offset = u64(f[3], "offset");
      ev.length = u64(f[4], "length");
      trace.events.push_back(std::move(ev));
    }
  }
  if (section != Section::events) throw ParseError("trace: missing #events section");
  try {
    trace.validate();
  } catch (const ValidationError& e) {
    throw ParseError(std::string("trace: ") + e.what());
  }
  return trace;
}

}  // namespace backbone_cdn
