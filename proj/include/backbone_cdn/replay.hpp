#pragma once

// Trace replay over the simulated network: every trace event becomes one
// client read with failover and exactly one access-log record.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "backbone_cdn/accounting.hpp"
#include "backbone_cdn/client.hpp"
#include "backbone_cdn/deployment.hpp"
#include "backbone_cdn/services.hpp"
#include "backbone_cdn/simnet.hpp"
#include "backbone_cdn/workload.hpp"

namespace backbone_cdn {

struct ReplayOptions {
  double deadline_ms = 5000.0;
  /// Defaults to the number of caches in the deployment.
  std::optional<std::size_t> max_attempts;
  /// Extra actions run at a simulated time, before trace events at the same instant.
  std::vector<std::pair<double, std::function<void(ServiceSet&)>>> actions;
};

struct EventOutcome {
  std::optional<NodeId> served_by;
  std::vector<Attempt> attempts;
  std::optional<std::uint64_t> version;  // version the serving cache returned
  std::string error;                     // empty on success
};

struct ReplayResult {
  std::vector<AccessRecord> log;
  std::vector<NamespaceReport> report;
  std::vector<EventOutcome> outcomes;  // one per trace event, in trace order
  std::string exchange_log;
};

/// Catalog of `deployment` extended with the trace catalog. Throws
/// ValidationError when the two disagree on a file.
DeploymentConfig merge_catalog(const DeploymentConfig& deployment, const Trace& trace);

ClientConfig client_config_for(const DeploymentConfig& deployment, const NodeId& client, double deadline_ms,
                               std::optional<std::size_t> max_attempts);

/// Access record for a successful read served by `event`.
AccessRecord record_from(const TraceEvent& ev, const ServeEvent& served);
AccessRecord failed_record(const TraceEvent& ev, std::uint64_t file_size);

ReplayResult replay(const Trace& trace, const DeploymentConfig& deployment, const SimConfig& sim,
                    const ReplayOptions& options = {});

}  // namespace backbone_cdn
