// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "backbone_cdn/accounting.hpp"
#include "backbone_cdn/content.hpp"
#include "backbone_cdn/workload.hpp"

namespace bc = backbone_cdn;

namespace {

void BM_FillContent(benchmark::State& state) {
  std::string buf(static_cast<std::size_t>(state.range(0)), '\0');
  for (auto _ : state) {
    bc::fill_content(7, 0, buf);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}

void BM_FillContentSerial(benchmark::State& state) {
  std::string buf(static_cast<std::size_t>(state.range(0)), '\0');
  for (auto _ : state) {
    bc::fill_content_serial(7, 0, buf);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}

std::vector<bc::AccessRecord> make_records(std::size_t n) {
  bc::SplitMix64 rng(1);
  std::vector<bc::AccessRecord> out;
  out.reserve(n);
  const char* ns[] = {"nova", "dune", "ligo", "des"};
  for (std::size_t i = 0; i < n; ++i) {
    bc::AccessRecord r;
    r.t_ms = static_cast<std::int64_t>(i);
    r.client = bc::NodeId("c");
    r.cache = bc::NodeId("k");
    r.file = bc::FileId("/" + std::string(ns[rng.below(4)]) + "/f" + std::to_string(rng.below(1000)));
    r.file_size = 1000;
    r.bytes_read = rng.below(1001);
    r.bytes_from_cache = rng.below(r.bytes_read + 1);
    r.bytes_from_origin = r.bytes_read - r.bytes_from_cache;
    out.push_back(std::move(r));
  }
  return out;
}

void BM_Aggregate(benchmark::State& state) {
  const auto records = make_records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bc::aggregate(records));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AggregateSerial(benchmark::State& state) {
  const auto records = make_records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bc::aggregate_serial(records));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_FillContent)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_FillContentSerial)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_Aggregate)->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_AggregateSerial)->Arg(1 << 12)->Arg(1 << 18);

BENCHMARK_MAIN();
