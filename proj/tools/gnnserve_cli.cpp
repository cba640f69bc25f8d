// gnnserve: dataset generation, partitioning, PE precomputation, serving,
// verification and benchmarks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gnnserve/bench.hpp"
#include "gnnserve/dataset_io.hpp"
#include "gnnserve/forward.hpp"
#include "gnnserve/hash.hpp"
#include "gnnserve/serving.hpp"
#include "gnnserve/tcp_transport.hpp"
#include "gnnserve/verify.hpp"
#include "gnnserve/workload.hpp"

namespace fs = std::filesystem;
using namespace gnnserve;

namespace {

constexpr const char* kWeightsFile = "weights.bin";
constexpr const char* kPoolDir = "holdout";

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint32_t> parse_fanouts(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (const auto& f : split_csv(s)) {
    std::size_t pos = 0;
    const auto v = std::stoul(f, &pos);
    if (pos != f.size() || v == 0) throw InvalidArgument("bad fanout '" + f + "'");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : split_csv(s)) {
    std::size_t pos = 0;
    const double v = std::stod(f, &pos);
    if (pos != f.size()) throw InvalidArgument("bad number '" + f + "'");
    out.push_back(v);
  }
  return out;
}

/// Output stream for --out, or stdout when the path is empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw InvalidArgument("cannot open output '" + path + "'");
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct ModelFlags {
  std::string kind = "sage";
  std::size_t layers = 2;
  std::uint32_t hidden = 16;
  double power = 2.0;
  int moment = 2;
  CLI::Option* kind_opt = nullptr;
  CLI::Option* layers_opt = nullptr;
  CLI::Option* hidden_opt = nullptr;

  void add(CLI::App* app) {
    kind_opt = app->add_option("--model", kind, "gcn|sage|sagemax|gat|powermean|moments")->capture_default_str();
    layers_opt = app->add_option("--layers", layers, "number of GNN layers k")->capture_default_str();
    hidden_opt = app->add_option("--hidden", hidden, "hidden and output width")->capture_default_str();
    app->add_option("--power", power, "power-mean exponent p")->capture_default_str();
    app->add_option("--moment", moment, "moments order n")->capture_default_str();
  }
  bool explicit_any() const { return kind_opt->count() + layers_opt->count() + hidden_opt->count() > 0; }
  ModelSpec build(std::uint32_t in_dim) const {
    return make_model(parse_layer_kind(kind), layers, in_dim, hidden, power, moment);
  }
};

/// Dataset, model and PEs for serving and benchmarks. Saved weights win;
/// without them the model is built from flags and seeded, and PEs are
/// computed in memory.
struct Context {
  GraphDataset dataset;
  ModelSpec model;
  Weights weights;
  PeStore pe;
};

Context load_context(const std::string& dir, const ModelFlags& mf, std::uint64_t seed) {
  Context ctx;
  ctx.dataset = load_dataset(dir);
  const auto wpath = fs::path(dir) / kWeightsFile;
  if (fs::exists(wpath)) {
    std::tie(ctx.model, ctx.weights) = load_weights(wpath);
    if (mf.explicit_any()) {
      const auto wanted = mf.build(static_cast<std::uint32_t>(ctx.dataset.feature_dim()));
      bool same = wanted.num_layers() == ctx.model.num_layers();
      for (std::size_t l = 1; same && l <= wanted.num_layers(); ++l) {
        const auto& a = wanted.layer(l);
        const auto& b = ctx.model.layer(l);
        same = a.kind == b.kind && a.out_dim == b.out_dim;
      }
      if (!same) throw InvalidArgument("model flags conflict with " + wpath.string() + "; rerun precompute");
    }
    ctx.pe = load_pe(dir);
    if (ctx.pe.num_layers() + 1 < ctx.model.num_layers()) ctx.pe = precompute_embeddings(ctx.dataset, ctx.model, ctx.weights);
  } else {
    ctx.model = mf.build(static_cast<std::uint32_t>(ctx.dataset.feature_dim()));
    ctx.weights = init_weights(ctx.model, seed);
    ctx.pe = precompute_embeddings(ctx.dataset, ctx.model, ctx.weights);
  }
  return ctx;
}

struct EngineFlags {
  std::string strategy = "full";
  std::string fanouts;
  double gamma = 0.1;
  std::string policy = "ratio";
  std::uint32_t p = 1;
  std::string transport = "sim";
  std::uint64_t cache_bytes = 0;
  double bandwidth = 12e9;
  bool f64_wire = false;

  void add(CLI::App* app, bool with_strategy = true) {
    if (with_strategy)
      app->add_option("--strategy", strategy, "full|sampled|srpe|srpe-cgp")->capture_default_str();
    app->add_option("--fanouts", fanouts, "per-layer caps for sampled, outermost hop first (e.g. 15,10)");
    app->add_option("--gamma", gamma, "recomputation budget in [0,1]")->capture_default_str();
    app->add_option("--policy", policy, "ratio|is|random|oracle")->capture_default_str();
    app->add_option("--p", p, "number of partitions")->capture_default_str();
    app->add_option("--transport", transport, "sim|tcp")->capture_default_str();
    app->add_option("--cache-bytes", cache_bytes, "feature cache capacity in bytes")->capture_default_str();
    app->add_option("--bandwidth", bandwidth, "simulated host-to-device bandwidth, bytes/s")->capture_default_str();
    app->add_flag("--f64-wire", f64_wire, "exchange partial aggregates in double precision");
  }

  ServeConfig config(const std::string& strat, const ModelSpec& model, std::uint64_t seed) const {
    ServeConfig c;
    c.strategy = parse_strategy(strat);
    c.seed = seed;
    c.gamma = gamma;
    c.policy = parse_policy(policy);
    c.num_partitions = p;
    c.transport = parse_transport(transport);
    c.cache_bytes = cache_bytes;
    c.bandwidth_bytes_per_s = bandwidth;
    c.precision = f64_wire ? WirePrecision::kF64 : WirePrecision::kF32;
    if (c.strategy == Strategy::kSampled) {
      c.fanouts = fanouts.empty() ? std::vector<std::uint32_t>(model.num_layers(), 10) : parse_fanouts(fanouts);
    }
    return c;
  }
};

std::vector<ServingRequest> synth_requests(const std::string& dataset_dir, const GraphDataset& ds, std::size_t batch,
                                           std::size_t count, std::uint64_t seed) {
  const auto pool = load_pool(fs::path(dataset_dir) / kPoolDir);
  std::vector<ServingRequest> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_request(pool, ds, batch, mix64(seed, i)));
  return out;
}

int cmd_gen_graph(const std::string& out, std::size_t nodes, double avg_degree, double exponent, std::size_t features,
                  const std::string& generator, double holdout, const std::string& request_dir, std::size_t batch,
                  std::size_t layers, std::uint64_t seed) {
  if (out.empty()) throw InvalidArgument("gen-graph needs --out DIR");
  GraphDataset g;
  if (generator == "powerlaw") {
    g = gen_powerlaw_graph(nodes, avg_degree, exponent, features, seed);
  } else if (generator == "random") {
    g = gen_random_graph(nodes, avg_degree, features, seed);
  } else {
    throw InvalidArgument("unknown generator '" + generator + "'");
  }
  auto split = split_holdout(g, holdout, seed);
  save_dataset(out, split.serving);
  save_pool(fs::path(out) / kPoolDir, split.pool);
  std::cout << "nodes=" << split.serving.num_nodes() << " edges=" << split.serving.num_edges()
            << " holdout=" << split.pool.size() << "\n";
  if (!request_dir.empty()) {
    const auto req = make_request(split.pool, split.serving, batch, seed);
    save_request(request_dir, req, layers);
    std::cout << "request: queries=" << req.num_queries() << " edges=" << req.edges.size() << "\n";
  }
  return 0;
}

int cmd_partition(const std::string& dataset_dir, std::uint32_t p, std::uint64_t seed, const std::string& out) {
  const auto ds = load_dataset(dataset_dir);
  const auto parts = partition_random_hash(ds, p, seed);
  Output o(out);
  o.os() << "partition,owned_nodes,train_nodes,local_edges\n";
  for (const auto& part : parts.parts) {
    std::size_t train = 0;
    for (auto v : part.owned) train += ds.train_mask[v];
    o.os() << part.index << ',' << part.owned.size() << ',' << train << ',' << part.num_local_edges() << '\n';
  }
  if (!out.empty()) {
    std::ofstream owners(out + ".owners");
    owners << "node,owner\n";
    for (std::size_t v = 0; v < parts.map.owner.size(); ++v) owners << v << ',' << parts.map.owner[v] << '\n';
  }
  return 0;
}

int cmd_precompute(const std::string& dataset_dir, const ModelFlags& mf, std::uint64_t seed) {
  const auto ds = load_dataset(dataset_dir);
  const auto model = mf.build(static_cast<std::uint32_t>(ds.feature_dim()));
  const auto weights = init_weights(model, seed);
  const auto pe = precompute_embeddings(ds, model, weights);
  save_weights(fs::path(dataset_dir) / kWeightsFile, model, weights);
  save_pe(dataset_dir, pe);
  std::cout << "layers=" << model.num_layers() << " pe_layers=" << pe.num_layers() << "\n";
  return 0;
}

struct ServeFlags {
  std::string request_dir;
  std::size_t batch = 64;
  std::string metrics;
  std::uint32_t rank = 0;
  std::uint32_t world_size = 0;
  std::string peers;
};

int cmd_serve(const std::string& dataset_dir, const ModelFlags& mf, const EngineFlags& ef, const ServeFlags& sf,
              std::uint64_t seed, const std::string& out) {
  auto ctx = load_context(dataset_dir, mf, seed);
  auto cfg = ef.config(ef.strategy, ctx.model, seed);
  const auto request = sf.request_dir.empty() ? synth_requests(dataset_dir, ctx.dataset, sf.batch, 1, seed).front()
                                              : load_request(sf.request_dir);
  const bool multi_process = !sf.peers.empty();
  if (multi_process) {
    const auto peers = split_csv(sf.peers);
    if (cfg.strategy != Strategy::kPartitioned) throw InvalidArgument("--peers requires --strategy srpe-cgp");
    if (cfg.transport != TransportKind::kTcp) throw InvalidArgument("--peers requires --transport tcp");
    if (sf.world_size != 0 && sf.world_size != peers.size())
      throw InvalidArgument("--world-size does not match the number of --peers");
    if (sf.rank >= peers.size()) throw InvalidArgument("--rank must be below the world size");
    cfg.num_partitions = static_cast<std::uint32_t>(peers.size());
  }
  ServingEngine engine(ctx.dataset, std::move(ctx.pe), ctx.model, ctx.weights, cfg);

  ServeResult res;
  if (multi_process) {
    World world(std::make_unique<TcpTransport>(sf.rank, split_csv(sf.peers)));
    res = engine.serve_rank(world, request);
    if (sf.rank != 0) return 0;  // rank 0 hosts the master and writes the results
  } else {
    res = engine.serve(request);
  }
  {
    Output o(out);
    write_embeddings_csv(o.os(), res.embeddings, request.num_nodes);
  }
  Output m(sf.metrics);
  write_metrics_header(m.os());
  write_metrics_line(m.os(), 0, cfg, request.num_queries(), res.latency);
  return 0;
}

int cmd_verify(const std::string& suite, const VerifyOptions& opts, const std::string& out) {
  const auto suites = suite == "all" ? verify_suite_names() : std::vector<std::string>{suite};
  Output o(out);
  o.os() << "suite,case,max_error,status\n";
  std::size_t failures = 0;
  for (const auto& s : suites) {
    const auto rep = run_verify_suite(s, opts);
    for (const auto& line : rep.lines) o.os() << s << ',' << line << '\n';
    failures += rep.failures;
    std::cerr << s << ": " << rep.cases - rep.failures << "/" << rep.cases << " passed, max error " << rep.max_error
              << "\n";
  }
  if (failures > 0) throw std::runtime_error("verify: " + std::to_string(failures) + " case(s) failed");
  return 0;
}

int cmd_bench_policy(const std::string& dataset_dir, const ModelFlags& mf, const std::string& budgets,
                     const std::string& policies, std::size_t batches, std::size_t batch, std::uint64_t seed,
                     const std::string& out) {
  const auto ctx = load_context(dataset_dir, mf, seed);
  const auto pool = load_pool(fs::path(dataset_dir) / kPoolDir);
  std::vector<Policy> pols;
  for (const auto& p : split_csv(policies)) pols.push_back(parse_policy(p));
  const auto buds = parse_doubles(budgets);
  const auto res = policy_benchmark(ctx.dataset, pool, ctx.model, ctx.weights, ctx.pe, pols, buds, batches, batch, seed);
  Output o(out);
  write_policy_table(o.os(), res);
  return 0;
}

int cmd_bench_latency(const std::string& dataset_dir, const ModelFlags& mf, const EngineFlags& ef,
                      const std::string& strategy, std::size_t requests, std::size_t batch, std::uint64_t seed,
                      const std::string& out) {
  auto ctx = load_context(dataset_dir, mf, seed);
  const auto reqs = synth_requests(dataset_dir, ctx.dataset, batch, requests, seed);
  const std::vector<std::string> strategies =
      strategy.empty() ? std::vector<std::string>{"full", "sampled", "srpe", "srpe-cgp"} : split_csv(strategy);
  Output o(out);
  write_metrics_header(o.os());
  for (const auto& s : strategies) {
    const auto cfg = ef.config(s, ctx.model, seed);
    ServingEngine engine(ctx.dataset, ctx.pe, ctx.model, ctx.weights, cfg);
    for (const auto& row : latency_benchmark(engine, reqs))
      write_metrics_line(o.os(), row.request_id, cfg, row.batch, row.latency);
  }
  return 0;
}

int cmd_bench_throughput(const std::string& dataset_dir, const ModelFlags& mf, const EngineFlags& ef,
                         const std::string& rates, double rate, double duration, std::size_t requests,
                         std::size_t batch, std::uint64_t seed, const std::string& out) {
  auto ctx = load_context(dataset_dir, mf, seed);
  const auto reqs = synth_requests(dataset_dir, ctx.dataset, batch, requests, seed);
  const auto cfg = ef.config(ef.strategy, ctx.model, seed);
  ServingEngine engine(ctx.dataset, std::move(ctx.pe), ctx.model, ctx.weights, cfg);
  std::vector<double> service;
  for (const auto& r : reqs) service.push_back(engine.serve(r).latency.total_ms());
  const auto rate_list = rates.empty() ? std::vector<double>{rate} : parse_doubles(rates);
  Output o(out);
  write_throughput_header(o.os());
  for (double r : rate_list) write_throughput_line(o.os(), simulate_fifo(service, r, duration, seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed GNN serving engine"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out;
  std::string dataset;
  auto add_common = [&](CLI::App* sub, bool needs_dataset) {
    sub->add_option("--seed", seed, "seed for every random choice")->capture_default_str();
    sub->add_option("--out", out, "output path");
    if (needs_dataset) sub->add_option("--dataset", dataset, "dataset directory")->required();
  };

  auto* gen = app.add_subcommand("gen-graph", "generate a graph, hold out query nodes, optionally write a request");
  std::size_t nodes = 10000, features = 16, batch = 64, layers_for_request = 2;
  double avg_degree = 10.0, exponent = 2.1, holdout = 0.25;
  std::string generator = "powerlaw", request_dir;
  add_common(gen, false);
  gen->add_option("--nodes", nodes)->capture_default_str();
  gen->add_option("--avg-degree", avg_degree)->capture_default_str();
  gen->add_option("--exponent", exponent)->capture_default_str();
  gen->add_option("--features", features)->capture_default_str();
  gen->add_option("--generator", generator, "powerlaw|random")->capture_default_str();
  gen->add_option("--holdout", holdout, "fraction of test nodes held out")->capture_default_str();
  gen->add_option("--request", request_dir, "also write a request directory");
  gen->add_option("--batch", batch, "request batch size")->capture_default_str();
  gen->add_option("--layers", layers_for_request, "k recorded in the request")->capture_default_str();

  auto* part = app.add_subcommand("partition", "random-hash partition summary and owner map");
  std::uint32_t num_parts = 2;
  add_common(part, true);
  part->add_option("--p", num_parts, "number of partitions")->capture_default_str();

  auto* pre = app.add_subcommand("precompute", "seed weights and precompute embeddings into the dataset");
  ModelFlags pre_model;
  add_common(pre, true);
  pre_model.add(pre);

  auto* serve = app.add_subcommand("serve", "serve one request and write its embeddings");
  ModelFlags serve_model;
  EngineFlags serve_engine;
  ServeFlags sf;
  add_common(serve, true);
  serve_model.add(serve);
  serve_engine.add(serve);
  serve->add_option("--request", sf.request_dir, "request directory (default: synthesize from the holdout pool)");
  serve->add_option("--batch", sf.batch, "batch size of a synthesized request")->capture_default_str();
  serve->add_option("--metrics", sf.metrics, "metrics CSV path (default stdout)");
  serve->add_option("--rank", sf.rank, "this process's rank (tcp multi-process)")->capture_default_str();
  serve->add_option("--world-size", sf.world_size, "number of ranks (tcp multi-process)");
  serve->add_option("--peers", sf.peers, "host:port per rank (tcp multi-process)");

  auto* ver = app.add_subcommand("verify", "run a verification suite");
  std::string suite = "cgp-equivalence", ver_transport = "sim";
  VerifyOptions vopts;
  add_common(ver, false);
  ver->add_option("--suite", suite, "cgp-equivalence|srpe-exactness|sampling|estimator|all")->capture_default_str();
  ver->add_option("--p", vopts.num_partitions, "number of partitions")->capture_default_str();
  ver->add_option("--graphs", vopts.num_graphs, "random graphs per suite")->capture_default_str();
  ver->add_option("--transport", ver_transport, "sim|tcp")->capture_default_str();

  auto* bpol = app.add_subcommand("bench-policy", "residual error per policy and budget");
  ModelFlags bpol_model;
  std::string budgets = "0,0.05,0.1,0.2", policies = "ratio,is,random,oracle";
  std::size_t num_batches = 8;
  add_common(bpol, true);
  bpol_model.add(bpol);
  bpol->add_option("--budgets", budgets, "comma-separated budgets")->capture_default_str();
  bpol->add_option("--policies", policies, "comma-separated policies")->capture_default_str();
  bpol->add_option("--batches", num_batches, "number of request batches")->capture_default_str();
  bpol->add_option("--batch", batch, "queries per batch")->capture_default_str();

  auto* blat = app.add_subcommand("bench-latency", "per-request latency breakdown per strategy");
  ModelFlags blat_model;
  EngineFlags blat_engine;
  std::string blat_strategy;
  std::size_t num_requests = 5;
  add_common(blat, true);
  blat_model.add(blat);
  blat_engine.add(blat, false);
  blat->add_option("--strategy", blat_strategy, "strategies to run (default: all four)");
  blat->add_option("--requests", num_requests, "requests per strategy")->capture_default_str();
  blat->add_option("--batch", batch, "queries per request")->capture_default_str();

  auto* bthr = app.add_subcommand("bench-throughput", "Poisson-arrival FIFO throughput and latency percentiles");
  ModelFlags bthr_model;
  EngineFlags bthr_engine;
  double rate = 10.0, duration = 60.0;
  std::string rates;
  add_common(bthr, true);
  bthr_model.add(bthr);
  bthr_engine.add(bthr);
  bthr->add_option("--rate", rate, "arrival rate, requests/s")->capture_default_str();
  bthr->add_option("--rates", rates, "comma-separated rates for a load curve");
  bthr->add_option("--duration-s", duration, "virtual-time duration in seconds")->capture_default_str();
  bthr->add_option("--requests", num_requests, "distinct requests cycled through")->capture_default_str();
  bthr->add_option("--batch", batch, "queries per request")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_gen_graph(out, nodes, avg_degree, exponent, features, generator, holdout, request_dir, batch,
                           layers_for_request, seed);
    if (part->parsed()) return cmd_partition(dataset, num_parts, seed, out);
    if (pre->parsed()) return cmd_precompute(dataset, pre_model, seed);
    if (serve->parsed()) return cmd_serve(dataset, serve_model, serve_engine, sf, seed, out);
    if (ver->parsed()) {
      vopts.seed = seed;
      vopts.transport = parse_transport(ver_transport);
      return cmd_verify(suite, vopts, out);
    }
    if (bpol->parsed())
      return cmd_bench_policy(dataset, bpol_model, budgets, policies, num_batches, batch, seed, out);
    if (blat->parsed())
      return cmd_bench_latency(dataset, blat_model, blat_engine, blat_strategy, num_requests, batch, seed, out);
    if (bthr->parsed())
      return cmd_bench_throughput(dataset, bthr_model, bthr_engine, rates, rate, duration, num_requests, batch, seed,
                                  out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
