#include "backbone_cdn/replay.hpp"

#include <map>

#include "backbone_cdn/log.hpp"

namespace backbone_cdn {

DeploymentConfig merge_catalog(const DeploymentConfig& deployment, const Trace& trace) {
  DeploymentConfig merged = deployment;
  std::map<FileId, const CatalogEntry*> known;
  for (const auto& e : deployment.catalog) known.emplace(e.meta.id, &e);
  for (const auto& e : trace.catalog) {
    auto it = known.find(e.meta.id);
    if (it == known.end()) {
      merged.catalog.push_back(e);
      continue;
    }
    if (!(*it->second == e)) {
      throw ValidationError("catalog: trace and deployment disagree on '" + e.meta.id.path() + "'");
    }
  }
  merged.validate();
  return merged;
}

ClientConfig client_config_for(const DeploymentConfig& deployment, const NodeId& client, double deadline_ms,
                               std::optional<std::size_t> max_attempts) {
  const NodeSpec* spec = deployment.find(client);
  if (spec == nullptr || spec->role != Role::client) {
    throw ValidationError("client '" + client.str() + "' is not a client node of the deployment");
  }
  if (!spec->geo) throw ValidationError("client '" + client.str() + "': missing geo");
  ClientConfig cfg;
  cfg.position = *spec->geo;
  cfg.deadline_ms = deadline_ms;
  for (const NodeSpec* c : deployment.with_role(Role::cache)) {
    if (!c->geo) throw ValidationError("cache '" + c->id.str() + "': missing geo");
    cfg.caches.push_back(CacheSite{c->id, *c->geo});
  }
  cfg.max_attempts = max_attempts.value_or(cfg.caches.size());
  return cfg;
}

AccessRecord record_from(const TraceEvent& ev, const ServeEvent& served) {
  AccessRecord r;
  r.t_ms = ev.t_ms;
  r.client = ev.client;
  r.cache = served.cache;
  r.file = ev.file;
  r.file_size = served.file_size;
  r.bytes_read = served.bytes_read;
  r.bytes_from_cache = served.bytes_from_cache;
  r.bytes_from_origin = served.bytes_from_origin;
  return r;
}

AccessRecord failed_record(const TraceEvent& ev, std::uint64_t file_size) {
  AccessRecord r;
  r.t_ms = ev.t_ms;
  r.client = ev.client;
  r.file = ev.file;
  r.file_size = file_size;
  return r;
}

ReplayResult replay(const Trace& trace, const DeploymentConfig& deployment, const SimConfig& sim,
                    const ReplayOptions& options) {
  trace.validate();
  const DeploymentConfig merged = merge_catalog(deployment, trace);
  sim.validate();

  std::map<NodeId, ClientConfig> clients;
  for (const auto& ev : trace.events) {
    if (!clients.contains(ev.client)) {
      clients.emplace(ev.client, client_config_for(merged, ev.client, options.deadline_ms, options.max_attempts));
    }
  }

  ServiceSet services = ServiceSet::build(merged);
  SimNetwork net(sim);
  for (const auto& n : merged.nodes) net.add_node(n.id, services.find(n.id));

  std::map<NodeId, ServeEvent> last_served;
  for (auto& [id, cache] : services.caches) {
    cache->set_observer([&last_served](const ServeEvent& e) { last_served.insert_or_assign(e.cache, e); });
  }

  for (const auto& [t, action] : options.actions) {
    net.schedule(t, [&services, fn = action] { fn(services); });
  }

  ReplayResult result;
  result.log.reserve(trace.events.size());
  result.outcomes.resize(trace.events.size());
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& ev = trace.events[i];
    net.schedule(static_cast<double>(ev.t_ms), [&, i] {
      const TraceEvent& e = trace.events[i];
      const std::uint64_t size = trace.find(e.file)->meta.size;
      EventOutcome& out = result.outcomes[i];
      last_served.clear();
      try {
        ReadReport rep = read_with_failover(e.client, clients.at(e.client), e.file, e.offset, e.length, net,
                                            static_cast<double>(e.t_ms));
        const ServeEvent& served = last_served.at(rep.served_by);
        out.served_by = rep.served_by;
        out.attempts = std::move(rep.attempts);
        out.version = served.version;
        result.log.push_back(record_from(e, served));
      } catch (const AllCachesFailed& err) {
        out.attempts = err.attempts();
        out.error = err.what();
        result.log.push_back(failed_record(e, size));
      } catch (const NotFound& err) {
        out.error = err.what();
        result.log.push_back(failed_record(e, size));
      } catch (const RangeError& err) {
        out.error = err.what();
        result.log.push_back(failed_record(e, size));
      }
      if (!out.error.empty()) log::info("event {} ({}) failed: {}", i, e.file.path(), out.error);
    });
  }
  net.run();

  result.report = aggregate(result.log);
  result.exchange_log = net.log_text();
  return result;
}

}  // namespace backbone_cdn
