// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "backbone_cdn/client.hpp"
#include "backbone_cdn/deployment.hpp"
#include "backbone_cdn/federation.hpp"
#include "backbone_cdn/log.hpp"
#include "backbone_cdn/replay.hpp"
#include "backbone_cdn/services.hpp"
#include "backbone_cdn/simnet.hpp"
#include "backbone_cdn/socket_transport.hpp"
#include "backbone_cdn/wire.hpp"
#include "fixtures.hpp"
#include "process.hpp"

namespace bc = backbone_cdn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

bc::NodeId id(const std::string& s) { return bc::NodeId(s); }

bc::CacheConfig ample_cache(std::uint64_t capacity = 1ULL << 32) {
  bc::CacheConfig c;
  c.capacity = capacity;
  c.block_size = 1024;
  c.high_watermark = 1.0;
  c.low_watermark = 0.9;
  return c;
}

bc::DeploymentConfig one_cache(const bc::CacheConfig& c) {
  return fixtures::star_deployment({{"k1", 0, 1}}, {{"c1", 0, 0}}, c);
}

bc::Trace full_reads(std::uint64_t files, std::uint64_t reads_each, std::uint64_t size) {
  bc::Trace t;
  for (std::uint64_t f = 0; f < files; ++f) {
    const bc::FileId file("/ns/f" + std::to_string(f));
    t.catalog.push_back({bc::FileMeta::make(file, size + 37 * f, 9 + f), id("origin")});
  }
  std::int64_t now = 0;
  for (std::uint64_t r = 0; r < reads_each; ++r) {
    for (std::uint64_t f = 0; f < files; ++f) {
      t.events.push_back({now++, id("c1"), t.catalog[f].meta.id, 0, t.catalog[f].meta.size});
    }
  }
  return t;
}

// Builds a log of full reads plus one partial read totalling `read` bytes
// over a single file of `working_set` bytes.
struct RatioLog : bc::AccessLog {
  RatioLog(const std::string& ns, std::uint64_t working_set, std::uint64_t read) {
    const std::string path = "/" + ns + "/data";
    std::int64_t t = 0;
    for (std::uint64_t left = read; left > 0;) {
      const std::uint64_t n = std::min(left, working_set);
      record(fixtures::record(t++, path, working_set, n, n));
      left -= n;
    }
  }
};

Outcome reuse_factors() {
  Outcome o;
  bc::WorkloadSpec spec;
  spec.ns = "nova";
  spec.file_count = 86;
  spec.sizes = bc::FixedSize{1000};
  spec.access_count = 20000;
  spec.duration_ms = 600000;
  spec.seed = 2019;
  const auto trace = bc::generate(spec, {id("c1")});
  const auto res = bc::replay(trace, one_cache(ample_cache()), bc::SimConfig{});
  if (res.report.size() != 1) {
    o.fail("expected one namespace");
    return o;
  }
  const auto& r = res.report[0];
  if (r.working_set_bytes != 86000 || r.data_read_bytes != 20000000) {
    o.fail("nova totals " + std::to_string(r.working_set_bytes) + "/" + std::to_string(r.data_read_bytes));
    return o;
  }
  const double nova = r.reuse_factor().value();
  if (std::abs(nova - 232.6) > 0.05 || bc::render_ratio(nova) != "233") o.fail("nova " + std::to_string(nova));

  const auto dune = RatioLog("dune", 14000, 1184000000ULL).reuse_factor("dune");
  if (std::abs(dune - 84571.4) > 1.0 || bc::render_ratio(dune) != "84571") o.fail("dune " + std::to_string(dune));
  const auto igwn = RatioLog("igwn", 18172, 596000).reuse_factor("igwn");
  if (std::abs(igwn - 32.8) > 0.05 || bc::render_ratio(igwn) != "33") o.fail("igwn " + std::to_string(igwn));
  if (o.ok) o.detail = "nova " + bc::render_ratio(nova) + ", dune " + bc::render_ratio(dune) + ", igwn " +
                       bc::render_ratio(igwn);
  return o;
}

Outcome travels_once() {
  Outcome o;
  std::mt19937_64 rng(1);
  for (int round = 0; round < 20 && o.ok; ++round) {
    bc::WorkloadSpec spec;
    spec.ns = "ns";
    spec.file_count = 1 + rng() % 50;
    spec.sizes = bc::UniformSizes{1, 1 + rng() % 100000};
    spec.access_count = 1 + rng() % 2000;
    spec.popularity = rng() % 2 ? bc::Popularity{bc::ZipfPopularity{0.5 + (rng() % 100) / 100.0}}
                                : bc::Popularity{bc::UniformPopularity{}};
    spec.duration_ms = 100000;
    spec.seed = rng();
    const auto trace = bc::generate(spec, {id("c1")});

    std::map<bc::FileId, std::uint64_t> touched;
    for (const auto& e : trace.events) touched[e.file] = trace.find(e.file)->meta.size;
    std::uint64_t working_set = 0, rounded = 0;
    for (const auto& [_, s] : touched) {
      working_set += s;
      rounded += (s + 1023) / 1024 * 1024;
    }

    bc::ReplayOptions opts;
    std::uint64_t used = 0;
    opts.actions.emplace_back(static_cast<double>(spec.duration_ms) + 1, [&used](bc::ServiceSet& s) {
      used = s.caches.at(id("k1"))->engine().stats().used;
    });
    const auto res = bc::replay(trace, one_cache(ample_cache(rounded)), bc::SimConfig{}, opts);
    std::uint64_t origin = 0;
    for (const auto& r : res.report) origin += r.origin_bytes;
    if (origin != working_set) {
      o.fail("round " + std::to_string(round) + ": origin " + std::to_string(origin) + " != " +
             std::to_string(working_set));
    } else if (used != rounded) {
      o.fail("round " + std::to_string(round) + ": cached " + std::to_string(used) + " != " + std::to_string(rounded));
    }
  }
  if (o.ok) o.detail = "20 traces";
  return o;
}

Outcome hit_ratio() {
  Outcome o;
  for (auto [m, n] : {std::pair<std::uint64_t, std::uint64_t>{3, 2}, {10, 5}, {1, 100}}) {
    const auto res = bc::replay(full_reads(m, n, 2500), one_cache(ample_cache()), bc::SimConfig{});
    const auto& r = res.report.at(0);
    if (r.hits_bytes * n != r.data_read_bytes * (n - 1)) {
      o.fail("(" + std::to_string(m) + "," + std::to_string(n) + "): " + std::to_string(r.hits_bytes) + "/" +
             std::to_string(r.data_read_bytes));
    }
  }
  return o;
}

Outcome federation_oracle() {
  Outcome o;
  std::mt19937_64 rng(500);
  int queries = 0;
  for (int round = 0; round < 500 && o.ok; ++round) {
    const auto t = fixtures::random_tree(rng, 50, 8);
    bc::Federation fed;
    for (const auto& r : t.redirectors) {
      const auto& p = t.parent.at(r);
      fed.add_redirector(id(r), p ? std::optional(id(*p)) : std::nullopt);
    }
    for (const auto& s : t.servers) fed.add_data_server(id(s), id(*t.parent.at(s)));
    for (const auto& [s, files] : t.holdings) {
      for (const auto& f : files) fed.register_file(id(s), bc::FileId(f));
    }
    for (int q = 0; q < 20; ++q, ++queries) {
      const auto& entry = t.redirectors[rng() % t.redirectors.size()];
      const std::string f = "/ns/f" + std::to_string(rng() % 8);
      const auto want = fixtures::oracle_locate(t, entry, f);
      const auto got = fed.locate(id(entry), bc::FileId(f));
      if (got.found() != want.has_value() || (want && got.server->str() != *want)) {
        o.fail("tree " + std::to_string(round) + " entry " + entry + " " + f);
        break;
      }
    }
  }
  if (o.ok) o.detail = std::to_string(queries) + " queries";
  return o;
}

// Client read over the simulated network plus the version the cache served.
struct Served {
  std::string data;
  std::uint64_t version = 0;
};

class FreshnessRig {
 public:
  explicit FreshnessRig(const bc::CacheConfig& cache) : deployment_(one_cache(cache)) {
    deployment_.catalog.push_back({bc::FileMeta::make(file_, 6000, 1), id("origin")});
    services_ = bc::ServiceSet::build(deployment_);
    for (const auto& n : deployment_.nodes) net_.add_node(n.id, services_.find(n.id));
    services_.caches.at(id("k1"))->set_observer([this](const bc::ServeEvent& e) { version_ = e.version; });
    client_ = bc::client_config_for(deployment_, id("c1"), 5000, std::nullopt);
  }

  Served read(double at) {
    auto r = bc::read_with_failover(id("c1"), client_, file_, 0, 6000, net_, at);
    return {r.data, version_};
  }
  void mutate(std::uint64_t seed) { services_.origins.at(id("origin"))->set_seed(file_, seed); }
  void purge(double at) { net_.request(id("c1"), id("k1"), bc::wire::encode(bc::wire::Request{bc::wire::Verb::purge, file_, 0, 0}), at); }

 private:
  bc::FileId file_{"/ns/doc"};
  bc::DeploymentConfig deployment_;
  bc::ServiceSet services_;
  bc::SimNetwork net_{bc::SimConfig{}};
  bc::ClientConfig client_;
  std::uint64_t version_ = 0;
};

Outcome freshness() {
  Outcome o;
  const std::string old_bytes = fixtures::ref_content(1, 0, 6000);
  const std::string new_bytes = fixtures::ref_content(2, 0, 6000);
  const std::uint64_t old_v = fixtures::ref_fnv(1, 6000), new_v = fixtures::ref_fnv(2, 6000);
  auto expect = [&](const Served& s, const std::string& bytes, std::uint64_t v, const char* step) {
    if (s.data != bytes || s.version != v) o.fail(step);
  };

  FreshnessRig imm(ample_cache());
  expect(imm.read(0), old_bytes, old_v, "immutable: first read");
  imm.mutate(2);
  expect(imm.read(10), old_bytes, old_v, "immutable: read after mutation");
  imm.purge(20);
  expect(imm.read(30), new_bytes, new_v, "immutable: read after purge");

  auto ttl_cfg = ample_cache();
  ttl_cfg.mode = bc::FreshnessMode::ttl;
  ttl_cfg.ttl_ms = 300000;
  FreshnessRig ttl(ttl_cfg);
  expect(ttl.read(1000), old_bytes, old_v, "ttl: first read");
  ttl.mutate(2);
  expect(ttl.read(1000 + 299999), old_bytes, old_v, "ttl: read before expiry");
  expect(ttl.read(1000 + 300000), new_bytes, new_v, "ttl: read at expiry");
  return o;
}

Outcome failover() {
  Outcome o;
  const auto d = fixtures::star_deployment({{"near", 0, 1}, {"second", 0, 3}, {"far", 0, 9}}, {{"c1", 0, 0}},
                                           ample_cache());
  const auto trace = full_reads(5, 40, 3000);  // one event per ms, t in [0, 200)
  bc::SimConfig down;
  down.default_latency_ms = 0.1;
  down.faults.push_back({id("near"), 50, 150, bc::FaultWindow::Kind::down, 1.0});
  const auto res = bc::replay(trace, d, down);
  int in_window = 0;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto t = trace.events[i].t_ms;
    if (t < 50 || t >= 150) continue;
    ++in_window;
    const auto& out = res.outcomes[i];
    if (!out.served_by || *out.served_by != id("second") || out.attempts.empty() ||
        !(out.attempts[0] == bc::Attempt{id("near"), bc::AttemptResult::unavailable})) {
      o.fail("down: event at " + std::to_string(t));
      break;
    }
  }

  bc::SimConfig slow;
  slow.default_latency_ms = 10;
  slow.faults.push_back({id("near"), 0, 1e9, bc::FaultWindow::Kind::slow, 1000.0});
  const auto slow_res = bc::replay(full_reads(1, 3, 1000), d, slow);
  for (const auto& out : slow_res.outcomes) {
    if (out.attempts.empty() || !(out.attempts[0] == bc::Attempt{id("near"), bc::AttemptResult::slow}) ||
        !out.served_by || *out.served_by != id("second")) {
      o.fail("slow: attempts not (near, slow)");
      break;
    }
  }
  if (o.ok) o.detail = std::to_string(in_window) + " in-window reads";
  return o;
}

Outcome eviction() {
  Outcome o;
  std::mt19937_64 rng(200);
  for (int round = 0; round < 200 && o.ok; ++round) {
    const std::uint64_t block = 64;
    const std::uint64_t capacity = block * (2 + rng() % 30);
    const double high = 0.5 + 0.5 * static_cast<double>(rng() % 101) / 100.0;
    const double low = high * (0.2 + 0.8 * static_cast<double>(rng() % 100) / 100.0);
    fixtures::MapUpstream up;
    std::vector<std::pair<std::string, std::uint64_t>> files;
    const int nfiles = 1 + static_cast<int>(rng() % 12);
    for (int f = 0; f < nfiles; ++f) {
      const std::uint64_t size = 1 + rng() % capacity;
      files.emplace_back("/ns/f" + std::to_string(f), size);
      up.put(files.back().first, size, static_cast<std::uint64_t>(f));
    }
    bc::CacheConfig cfg;
    cfg.capacity = capacity;
    cfg.block_size = block;
    cfg.high_watermark = high;
    cfg.low_watermark = low;
    bc::CacheEngine cache(cfg);
    fixtures::LruModel model(capacity, high, low, block);
    const int ops = 1 + static_cast<int>(rng() % 1000);
    for (int op = 0; op < ops; ++op) {
      const auto& [path, size] = files[rng() % files.size()];
      const std::uint64_t off = rng() % (size + 1);
      const std::uint64_t len = rng() % (size - off + 1);
      const auto got = cache.read(bc::FileId(path), off, len, op, up);
      const auto want = model.read(path, size, off, len);
      std::set<fixtures::LruModel::Key> got_set, want_set(want.begin(), want.end());
      for (const auto& v : got.evicted) got_set.insert({v.file.path(), v.block});
      if (got_set != want_set || got.evicted.size() != want.size()) {
        o.fail("round " + std::to_string(round) + " op " + std::to_string(op) + ": victim sets differ");
        break;
      }
      if (cache.stats().used > capacity || cache.stats().used != model.used()) {
        o.fail("round " + std::to_string(round) + " op " + std::to_string(op) + ": usage");
        break;
      }
    }
  }
  if (o.ok) o.detail = "200 sequences";
  return o;
}

Outcome cli_determinism() {
  Outcome o;
  const fs::path dir = fixtures::scratch("acceptance_cli");
  fixtures::spit(dir / "spec.json", R"({"namespace": "nova", "file_count": 30,
    "size_distribution": {"kind": "zipf_sizes", "min": 100, "max": 200000, "s": 1.5},
    "access_count": 1500, "popularity": {"kind": "zipf", "s": 0.9},
    "read_style": {"kind": "random_range", "min_len": 1, "max_len": 50000},
    "duration_ms": 100000, "seed": 8})");
  bc::CacheConfig c = ample_cache(1 << 21);
  c.high_watermark = 0.95;
  c.block_size = 4096;
  fixtures::spit(dir / "deploy.json", bc::serialize_deployment(fixtures::star_deployment(
                                          {{"k1", 10, 10}, {"k2", 40, 40}}, {{"c1", 0, 0}, {"c2", 45, 45}}, c)));
  fixtures::spit(dir / "sim.json", R"({"default_latency_ms": 3,
    "faults": [{"node": "k1", "from_ms": 20000, "to_ms": 30000, "kind": "down"}]})");
  const auto gen = fixtures::run({"generate", "--spec", (dir / "spec.json").string(), "--clients", "c1,c2", "--out",
                                  (dir / "trace.tsv").string()},
                                 dir);
  if (gen.code != 0) {
    o.fail("generate exited " + std::to_string(gen.code));
    return o;
  }
  for (int i = 1; i <= 2; ++i) {
    const auto r = fixtures::run({"replay", "--trace", (dir / "trace.tsv").string(), "--deployment",
                                  (dir / "deploy.json").string(), "--sim", (dir / "sim.json").string(), "--log-out",
                                  (dir / ("log" + std::to_string(i))).string(), "--report-out",
                                  (dir / ("report" + std::to_string(i))).string()},
                                 dir);
    if (r.code != 0) o.fail("replay exited " + std::to_string(r.code));
  }
  if (!o.ok) return o;
  const std::string log = fixtures::slurp(dir / "log1"), report = fixtures::slurp(dir / "report1");
  if (log != fixtures::slurp(dir / "log2")) o.fail("logs differ");
  if (report != fixtures::slurp(dir / "report2")) o.fail("reports differ");
  const auto records = bc::parse_access_log(log);
  if (bc::render_report_json(fixtures::naive_report(records, INT64_MIN, INT64_MAX)) != report) {
    o.fail("report differs from the reference aggregation");
  }
  if (o.ok) o.detail = std::to_string(records.size()) + " records";
  fs::remove_all(dir);
  return o;
}

Outcome socket_smoke() {
  Outcome o;
  auto d = one_cache(ample_cache());
  bc::Trace trace;
  for (int f = 0; f < 3; ++f) {
    trace.catalog.push_back(
        {bc::FileMeta::make(bc::FileId("/ns/s" + std::to_string(f)), 5000 + 3000 * f, 70 + f), id("origin")});
  }
  const std::uint64_t script[10][3] = {{0, 0, 5000}, {1, 0, 8000}, {0, 100, 200}, {2, 4000, 7000}, {1, 7000, 1000},
                                       {2, 0, 11000}, {0, 0, 5000}, {1, 1, 1},     {2, 10999, 1},   {0, 4999, 1}};
  for (int i = 0; i < 10; ++i) {
    const auto& c = trace.catalog[script[i][0]].meta;
    trace.events.push_back({i * 10, id("c1"), c.id, script[i][1], script[i][2]});
  }
  const auto sim = bc::replay(trace, d, bc::SimConfig{});

  const auto merged = bc::merge_catalog(d, trace);
  bc::ServiceSet services = bc::ServiceSet::build(merged);
  bc::SocketTransport transport;
  std::vector<std::unique_ptr<bc::SocketServer>> servers;
  for (const auto& n : merged.nodes) {
    bc::Service* svc = services.find(n.id);
    if (svc == nullptr) continue;
    servers.push_back(std::make_unique<bc::SocketServer>(n.id, *svc, transport, bc::Endpoint{"127.0.0.1", 0}));
    transport.set_address(n.id, {"127.0.0.1", servers.back()->port()});
    servers.back()->start();
  }
  std::optional<bc::ServeEvent> last;
  services.caches.at(id("k1"))->set_observer([&last](const bc::ServeEvent& e) { last = e; });
  const auto client = bc::client_config_for(merged, id("c1"), 5000, std::nullopt);
  std::vector<bc::AccessRecord> log;
  for (const auto& ev : trace.events) {
    try {
      const auto r = bc::read_with_failover(id("c1"), client, ev.file, ev.offset, ev.length, transport, 0);
      const auto& meta = trace.find(ev.file)->meta;
      if (r.data != fixtures::ref_content(meta.gen_seed, ev.offset, ev.length)) o.fail("payload mismatch");
      log.push_back(bc::record_from(ev, *last));
    } catch (const bc::Error& e) {
      o.fail(std::string("read failed: ") + e.what());
      break;
    }
  }
  for (auto& s : servers) s->stop();
  if (o.ok && log != sim.log) o.fail("access log differs from the simulated replay");
  if (o.ok && bc::aggregate(log) != sim.report) o.fail("report differs from the simulated replay");
  if (o.ok) o.detail = bc::render_report_json(sim.report).size() > 3 ? "10 reads" : "empty report";
  return o;
}

}  // namespace

int main() {
  bc::log::init_from_env();
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double limit_s;  // 0: no time limit
  };
  const std::vector<Criterion> criteria{
      {"reuse-factors", reuse_factors, 10},  {"travels-once", travels_once, 30},
      {"hit-ratio", hit_ratio, 0},         {"federation-oracle", federation_oracle, 10},
      {"freshness", freshness, 0},         {"failover", failover, 0},
      {"eviction-oracle", eviction, 0},    {"determinism", cli_determinism, 0},
      {"socket-smoke", socket_smoke, 0}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criteria[i].limit_s > 0 && secs > criteria[i].limit_s) o.fail("over the time limit");
    std::printf("%s %zu %s (%.2fs)%s%s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].name.c_str(), secs,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
    if (!o.ok) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
