#include <doctest.h>

#include <string>

#include "backbone_cdn/deployment.hpp"

namespace bc = backbone_cdn;

namespace {

const char* kMinimal = R"({
  "nodes": [
    {"id": "root", "role": "redirector"},
    {"id": "origin", "role": "origin", "parent": "root"},
    {"id": "cache1", "role": "cache", "lat": 41.8, "lon": -87.6},
    {"id": "client1", "role": "client", "lat": 40.1, "lon": -88.2}
  ],
  "caches": {"cache1": {"capacity": 1048576, "block_size": 4096, "mode": "ttl", "ttl_ms": 300000}},
  "catalog": [{"path": "/nova/a", "size": 100, "seed": 7, "origin": "origin"}]
})";

std::string message_of(const std::string& text) {
  try {
    bc::parse_deployment(text);
  } catch (const bc::Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal deployment") {
  const auto d = bc::parse_deployment(kMinimal);
  CHECK(d.nodes.size() == 4);
  CHECK(d.root().id == bc::NodeId("root"));
  CHECK(d.entry_redirector(bc::NodeId("cache1")) == bc::NodeId("root"));
  const auto& cfg = d.caches.at(bc::NodeId("cache1"));
  CHECK(cfg.block_size == 4096);
  CHECK(cfg.mode == bc::FreshnessMode::ttl);
  CHECK(cfg.high_watermark == 0.95);
  REQUIRE(d.catalog.size() == 1);
  CHECK(d.catalog[0].meta.version == bc::FileMeta::make(bc::FileId("/nova/a"), 100, 7).version);
}

TEST_CASE("serialize then parse is the identity") {
  const auto d = bc::parse_deployment(kMinimal);
  const auto again = bc::parse_deployment(bc::serialize_deployment(d));
  CHECK(again == d);
  CHECK(bc::serialize_deployment(again) == bc::serialize_deployment(d));
}

TEST_CASE("validation errors name the culprit") {
  const std::string cycle = R"({"nodes": [
    {"id": "root", "role": "redirector"},
    {"id": "A", "role": "redirector", "parent": "B"},
    {"id": "B", "role": "redirector", "parent": "A"}]})";
  CHECK_THROWS_AS(bc::parse_deployment(cycle), bc::ValidationError);
  const auto msg = message_of(cycle);
  CHECK(msg.find("cycle") != std::string::npos);
  CHECK(msg.find("A") != std::string::npos);

  const std::string bad_lat = R"({"nodes": [
    {"id": "root", "role": "redirector"},
    {"id": "c", "role": "client", "lat": 123, "lon": 0}]})";
  CHECK_THROWS_AS(bc::parse_deployment(bad_lat), bc::ValidationError);
  CHECK(message_of(bad_lat).find("'c'") != std::string::npos);

  const std::string dup = R"({"nodes": [
    {"id": "root", "role": "redirector"}, {"id": "root", "role": "redirector"}]})";
  CHECK(message_of(dup).find("duplicate") != std::string::npos);

  const std::string no_geo = R"({"nodes": [
    {"id": "root", "role": "redirector"}, {"id": "k", "role": "cache"}], "caches": {"k": {"capacity": 4096, "block_size": 1024}}})";
  CHECK(message_of(no_geo).find("'k'") != std::string::npos);

  const std::string two_roots = R"({"nodes": [
    {"id": "r1", "role": "redirector"}, {"id": "r2", "role": "redirector"}]})";
  CHECK_THROWS_AS(bc::parse_deployment(two_roots), bc::ValidationError);

  const std::string unknown = R"({"nodes": [{"id": "root", "role": "redirector", "color": "red"}]})";
  CHECK(message_of(unknown).find("color") != std::string::npos);

  const std::string small_block = R"({"nodes": [
    {"id": "root", "role": "redirector"}, {"id": "k", "role": "cache", "lat": 0, "lon": 0}],
    "caches": {"k": {"capacity": 4096, "block_size": 512}}})";
  CHECK_THROWS_AS(bc::parse_deployment(small_block), bc::ValidationError);

  CHECK_THROWS_AS(bc::parse_deployment("{nodes"), bc::ParseError);
}

TEST_CASE("roles") {
  CHECK(bc::parse_role("cache") == bc::Role::cache);
  CHECK_FALSE(bc::parse_role("proxy").has_value());
  CHECK(bc::to_string(bc::Role::origin) == "origin");
}
