#include "optonet/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "optonet/errors.hpp"

namespace optonet {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mixw(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Rng {
  std::uint64_t state;
  std::uint64_t next() {
    state += kGolden;
    return mixw(state);
  }
  double unit() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
};

}  // namespace

SizeDistribution SizeDistribution::from_points(
    std::vector<std::pair<std::uint64_t, double>> points) {
  if (points.empty()) throw SchemaError("size CDF needs at least one point");
  std::sort(points.begin(), points.end());
  double prev = 0.0;
  for (auto& [size, p] : points) {
    if (size < 1) throw SchemaError("flow sizes must be >= 1 byte");
    if (p < prev) throw SchemaError("size CDF must be monotone");
    prev = p;
  }
  if (std::abs(points.back().second - 1.0) > 1e-9)
    throw SchemaError("size CDF must end at probability 1");
  points.back().second = 1.0;
  SizeDistribution d;
  d.points_ = std::move(points);
  return d;
}

SizeDistribution SizeDistribution::builtin(const std::string& name) {
  if (name == "rpc-like")
    return from_points({{256, 0.10},
                        {512, 0.30},
                        {1024, 0.50},
                        {2048, 0.70},
                        {4096, 0.85},
                        {16384, 0.95},
                        {65536, 0.99},
                        {262144, 1.0}});
  if (name == "kv-like")
    return from_points({{64, 0.25},
                        {128, 0.50},
                        {256, 0.70},
                        {512, 0.85},
                        {1024, 0.92},
                        {4096, 0.97},
                        {65536, 1.0}});
  if (name == "hadoop-like")
    return from_points({{1024, 0.15},
                        {10240, 0.35},
                        {102400, 0.60},
                        {1048576, 0.85},
                        {5242880, 0.97},
                        {20971520, 1.0}});
  throw SchemaError("unknown built-in size distribution: " + name);
}

SizeDistribution SizeDistribution::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open CDF file: " + path);
  std::vector<std::pair<std::uint64_t, double>> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::uint64_t size;
    double p;
    if (!(ls >> size >> p)) throw SchemaError("bad CDF line: " + line);
    pts.emplace_back(size, p);
  }
  return from_points(std::move(pts));
}

std::uint64_t SizeDistribution::sample(double u) const {
  for (const auto& [size, p] : points_)
    if (u < p) return size;
  return points_.back().first;
}

double SizeDistribution::mean_bytes() const {
  double mean = 0.0, prev = 0.0;
  for (const auto& [size, p] : points_) {
    mean += static_cast<double>(size) * (p - prev);
    prev = p;
  }
  return mean;
}

std::vector<FlowSpec> gen_flows(const SizeDistribution& dist, double load,
                                Nanos duration_ns, const SimConfig& capacity,
                                std::uint64_t seed) {
  if (load < 0 || load > 1) throw SchemaError("load must be in (0, 1]");
  std::vector<FlowSpec> out;
  if (load == 0 || duration_ns <= 0) return out;

  const double agg_bytes_per_ns =
      static_cast<double>(capacity.link_bandwidth_bps) * capacity.node_count *
      capacity.uplinks / 8.0 / 1e9;
  const double lambda = load * agg_bytes_per_ns / dist.mean_bytes();  // per ns

  Rng rng{seed ^ 0xf10357a7};
  const std::uint64_t host_count = capacity.node_count * capacity.hosts_per_node;
  double t = 0.0;
  std::uint64_t id = 1;
  while (true) {
    double u = rng.unit();
    if (u <= 0) u = 1e-18;
    t += -std::log(u) / lambda;
    if (t >= static_cast<double>(duration_ns)) break;
    FlowSpec f;
    f.flow_id = id++;
    f.arrival_time_ns = static_cast<Nanos>(t);
    f.size_bytes = dist.sample(rng.unit());
    f.src_host = static_cast<HostId>(rng.below(host_count));
    f.dst_host = static_cast<HostId>(rng.below(host_count - 1));
    if (f.dst_host >= f.src_host) f.dst_host++;
    out.push_back(f);
  }
  return out;
}

void skew_flows(std::vector<FlowSpec>& flows, const SimConfig& cfg,
                const std::vector<std::pair<NodeId, NodeId>>& hot_pairs,
                double hot_fraction, std::uint64_t seed) {
  if (hot_pairs.empty() || hot_fraction <= 0) return;
  Rng rng{seed ^ 0x407f1a3e};
  for (FlowSpec& f : flows) {
    if (rng.unit() >= hot_fraction) continue;
    auto [sn, dn] = hot_pairs[rng.below(hot_pairs.size())];
    f.src_host = static_cast<HostId>(sn * cfg.hosts_per_node +
                                     rng.below(cfg.hosts_per_node));
    f.dst_host = static_cast<HostId>(dn * cfg.hosts_per_node +
                                     rng.below(cfg.hosts_per_node));
    if (f.src_host == f.dst_host)
      f.dst_host = static_cast<HostId>((f.dst_host + 1) %
                                       (cfg.node_count * cfg.hosts_per_node));
  }
}

std::string flows_to_csv(const std::vector<FlowSpec>& flows) {
  std::ostringstream os;
  os << "flow_id,src_host,dst_host,size_bytes,arrival_time_ns\n";
  for (const FlowSpec& f : flows)
    os << f.flow_id << ',' << f.src_host << ',' << f.dst_host << ','
       << f.size_bytes << ',' << f.arrival_time_ns << '\n';
  return os.str();
}

std::vector<FlowSpec> flows_from_csv(const std::string& text) {
  std::vector<FlowSpec> out;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("flow_id", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    FlowSpec f;
    char comma;
    std::istringstream ls(line);
    if (!(ls >> f.flow_id >> comma >> f.src_host >> comma >> f.dst_host >>
          comma >> f.size_bytes >> comma >> f.arrival_time_ns))
      throw SchemaError("bad flow CSV line: " + line);
    out.push_back(f);
  }
  return out;
}

}  // namespace optonet
