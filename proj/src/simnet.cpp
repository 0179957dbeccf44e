#include "backbone_cdn/simnet.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "backbone_cdn/wire.hpp"

namespace backbone_cdn {

using nlohmann::json;

std::string_view to_string(TransportFailure kind) {
  switch (kind) {
    case TransportFailure::unavailable: return "unavailable";
    case TransportFailure::unknown_node: return "unknown_node";
    case TransportFailure::timeout: return "timeout";
  }
  return "?";
}

namespace {

const LinkSpec* find_link(const std::vector<LinkSpec>& links, const NodeId& a, const NodeId& b) {
  const LinkSpec* reverse = nullptr;
  for (const auto& l : links) {
    if (l.from == a && l.to == b) return &l;
    if (l.from == b && l.to == a && reverse == nullptr) reverse = &l;
  }
  return reverse;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(where + ": unknown field '" + key + "'");
    }
  }
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ParseError(where + "." + key + ": expected number");
  return v.get<double>();
}

NodeId node_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string()) throw ParseError(where + "." + key + ": expected string");
  const auto s = obj.at(key).get<std::string>();
  if (!NodeId::is_valid(s)) throw ValidationError(where + "." + key + ": invalid node id '" + s + "'");
  return NodeId(s);
}

std::string fmt_ms(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

double SimConfig::latency(const NodeId& a, const NodeId& b) const {
  const LinkSpec* l = find_link(links, a, b);
  return l != nullptr && l->latency_ms ? *l->latency_ms : default_latency_ms;
}

double SimConfig::bandwidth(const NodeId& a, const NodeId& b) const {
  const LinkSpec* l = find_link(links, a, b);
  return l != nullptr && l->bandwidth_bytes_per_ms ? *l->bandwidth_bytes_per_ms : default_bandwidth_bytes_per_ms;
}

double SimConfig::slow_factor(const NodeId& node, double t) const {
  double factor = 1.0;
  for (const auto& f : faults) {
    if (f.kind == FaultWindow::Kind::slow && f.node == node && f.covers(t)) factor = std::max(factor, f.factor);
  }
  return factor;
}

const FaultWindow* SimConfig::down_during(const NodeId& node, double a, double b) const {
  const FaultWindow* first = nullptr;
  for (const auto& f : faults) {
    if (f.kind == FaultWindow::Kind::down && f.node == node && f.overlaps(a, b)) {
      if (first == nullptr || f.from_ms < first->from_ms) first = &f;
    }
  }
  return first;
}

void SimConfig::validate() const {
  if (!(default_latency_ms >= 0.0)) throw ValidationError("default_latency_ms must be >= 0");
  if (!(default_bandwidth_bytes_per_ms > 0.0)) throw ValidationError("default_bandwidth_bytes_per_ms must be > 0");
  for (const auto& l : links) {
    const std::string where = "link " + l.from.str() + "->" + l.to.str();
    if (l.latency_ms && !(*l.latency_ms >= 0.0)) throw ValidationError(where + ": latency_ms must be >= 0");
    if (l.bandwidth_bytes_per_ms && !(*l.bandwidth_bytes_per_ms > 0.0)) {
      throw ValidationError(where + ": bandwidth must be > 0");
    }
  }
  for (const auto& f : faults) {
    const std::string where = "fault on " + f.node.str();
    if (!(f.from_ms <= f.to_ms)) throw ValidationError(where + ": from_ms > to_ms");
    if (f.kind == FaultWindow::Kind::slow && !(f.factor >= 1.0)) {
      throw ValidationError(where + ": slow factor must be >= 1");
    }
  }
}

SimConfig parse_sim_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("sim config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("sim config: top level must be an object");
  reject_unknown(doc, {"default_latency_ms", "default_bandwidth_bytes_per_ms", "links", "faults", "seed"}, "sim");

  SimConfig cfg;
  if (doc.contains("default_latency_ms")) cfg.default_latency_ms = number(doc, "default_latency_ms", "sim");
  if (doc.contains("default_bandwidth_bytes_per_ms")) {
    cfg.default_bandwidth_bytes_per_ms = number(doc, "default_bandwidth_bytes_per_ms", "sim");
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ParseError("sim.seed: expected non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("links")) {
    if (!doc["links"].is_array()) throw ParseError("sim.links: expected array");
    for (std::size_t i = 0; i < doc["links"].size(); ++i) {
      const json& l = doc["links"][i];
      const std::string where = "sim.links[" + std::to_string(i) + "]";
      if (!l.is_object()) throw ParseError(where + ": expected object");
      reject_unknown(l, {"from", "to", "latency_ms", "bandwidth"}, where);
      LinkSpec link{node_field(l, "from", where), node_field(l, "to", where), std::nullopt, std::nullopt};
      if (l.contains("latency_ms")) link.latency_ms = number(l, "latency_ms", where);
      if (l.contains("bandwidth")) link.bandwidth_bytes_per_ms = number(l, "bandwidth", where);
      cfg.links.push_back(std::move(link));
    }
  }
  if (doc.contains("faults")) {
    if (!doc["faults"].is_array()) throw ParseError("sim.faults: expected array");
    for (std::size_t i = 0; i < doc["faults"].size(); ++i) {
      const json& f = doc["faults"][i];
      const std::string where = "sim.faults[" + std::to_string(i) + "]";
      if (!f.is_object()) throw ParseError(where + ": expected object");
      reject_unknown(f, {"node", "from_ms", "to_ms", "kind", "factor"}, where);
      FaultWindow w;
      w.node = node_field(f, "node", where);
      if (!f.contains("from_ms") || !f.contains("to_ms")) throw ValidationError(where + ": missing from_ms/to_ms");
      w.from_ms = number(f, "from_ms", where);
      w.to_ms = number(f, "to_ms", where);
      if (!f.contains("kind") || !f["kind"].is_string()) throw ParseError(where + ".kind: expected string");
      const auto kind = f["kind"].get<std::string>();
      if (kind == "down") {
        w.kind = FaultWindow::Kind::down;
        if (f.contains("factor")) throw ValidationError(where + ".factor: only valid for slow faults");
      } else if (kind == "slow") {
        w.kind = FaultWindow::Kind::slow;
        if (!f.contains("factor")) throw ValidationError(where + ": slow fault requires factor");
        w.factor = number(f, "factor", where);
      } else {
        throw ValidationError(where + ".kind: expected 'down' or 'slow', got '" + kind + "'");
      }
      cfg.faults.push_back(std::move(w));
    }
  }
  cfg.validate();
  return cfg;
}

SimNetwork::SimNetwork(SimConfig config) : config_(std::move(config)) { config_.validate(); }

void SimNetwork::add_node(const NodeId& id, Service* service) { nodes_[id] = service; }

Exchange SimNetwork::request(const NodeId& from, const NodeId& to, std::string_view request, double at_ms,
                             std::optional<double> timeout_ms) {
  ExchangeRecord rec;
  rec.at_ms = at_ms;
  rec.from = from;
  rec.to = to;
  rec.request_line = std::string(request.substr(0, request.find('\n')));

  auto fail = [&](TransportFailure kind, double when, std::string msg) -> TransportError {
    rec.completed_at_ms = when;
    rec.failure = kind;
    log_.push_back(rec);
    return TransportError(kind, std::move(msg), when);
  };

  if (!nodes_.contains(from)) throw fail(TransportFailure::unknown_node, at_ms, "unknown node '" + from.str() + "'");
  auto it = nodes_.find(to);
  if (it == nodes_.end() || it->second == nullptr) {
    throw fail(TransportFailure::unknown_node, at_ms, "no service at '" + to.str() + "'");
  }

  const double one_way = config_.latency(from, to) * config_.slow_factor(to, at_ms);
  const double arrival = at_ms + one_way;
  if (const FaultWindow* w = config_.down_during(to, at_ms, arrival)) {
    throw fail(TransportFailure::unavailable, std::max(at_ms, w->from_ms), "'" + to.str() + "' is down");
  }

  // Reserve the log slot so nested exchanges appear after their parent.
  const std::size_t slot = log_.size();
  log_.push_back(rec);

  CallContext ctx(to, from, arrival, *this);
  std::string response = it->second->handle(request, ctx);
  const std::uint64_t payload = wire::payload_size(response);
  const double completed =
      ctx.now_ms() + one_way + static_cast<double>(payload) / config_.bandwidth(from, to);

  ExchangeRecord& done = log_[slot];
  done.payload_bytes = payload;
  done.completed_at_ms = completed;
  if (const FaultWindow* w = config_.down_during(to, at_ms, completed)) {
    done.failure = TransportFailure::unavailable;
    done.completed_at_ms = std::max(at_ms, w->from_ms);
    throw TransportError(TransportFailure::unavailable, "'" + to.str() + "' went down mid-exchange",
                         done.completed_at_ms);
  }
  if (timeout_ms && completed - at_ms > *timeout_ms) {
    done.failure = TransportFailure::timeout;
    done.completed_at_ms = at_ms + *timeout_ms;
    throw TransportError(TransportFailure::timeout, "'" + to.str() + "' exceeded deadline", done.completed_at_ms);
  }
  return Exchange{std::move(response), completed};
}

void SimNetwork::schedule(double at_ms, std::function<void()> fn) {
  if (at_ms < now_ms_) at_ms = now_ms_;
  queue_.push(Event{at_ms, next_seq_++, std::move(fn)});
}

void SimNetwork::run_until(double t_ms) {
  while (!queue_.empty() && queue_.top().at_ms <= t_ms) {
    Event ev = queue_.top();
    queue_.pop();
    now_ms_ = ev.at_ms;
    ev.fn();
  }
}

void SimNetwork::run() {
  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    now_ms_ = ev.at_ms;
    ev.fn();
  }
}

std::string SimNetwork::log_text() const {
  std::string out;
  for (const auto& r : log_) {
    out += fmt_ms(r.at_ms) + "\t" + fmt_ms(r.completed_at_ms) + "\t" + r.from.str() + "\t" + r.to.str() + "\t" +
           r.request_line + "\t" + std::to_string(r.payload_bytes) + "\t" +
           (r.failure ? std::string(to_string(*r.failure)) : std::string("ok")) + "\n";
  }
  return out;
}

}  // namespace backbone_cdn
