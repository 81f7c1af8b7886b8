#include "kspde/ensemble.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <thread>

#include "kspde/rng.hpp"

namespace kspde {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t path_seed(std::uint64_t base, int index) { return derive_seed(base, static_cast<std::uint64_t>(index)); }

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KSPDE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

int EnsembleReport::failures() const {
  int n = 0;
  for (const auto& p : paths) n += p.ok ? 0 : 1;
  return n;
}

Trajectory run_path(const SimConfig& cfg, const NoiseModel& model, const CollisionOperator* op,
                    const BrownianPath& path) {
  const DistributionField f0 = cfg.f0.sample(cfg.grid);
  if (cfg.collisions && op != nullptr) {
    PicardOptions po = cfg.picard;
    po.compute_dissipation = cfg.diagnostics.dissipation;
    return picard_solve(f0, *op, cfg.n, model, path, cfg.T, po);
  }
  return solve_transport(f0, {}, model, path, cfg.T);
}

namespace {

void write_field_csv(const std::string& file, const DistributionField& f) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot open " + file + " for writing");
  const PhaseGrid& g = f.grid();
  os << "i1,i2,j1,j2,x1,x2,v1,v2,f\n" << std::setprecision(17);
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::size_t r = i;
    const int j2 = static_cast<int>(r % g.nv);
    r /= g.nv;
    const int j1 = static_cast<int>(r % g.nv);
    r /= g.nv;
    const int i2 = static_cast<int>(r % g.nx);
    const int i1 = static_cast<int>(r / g.nx);
    const PhasePoint p = g.node(i);
    os << i1 << ',' << i2 << ',' << j1 << ',' << j2 << ',' << p.x[0] << ',' << p.x[1] << ',' << p.v[0] << ',' << p.v[1]
       << ',' << f[i] << '\n';
  }
}

json window_json(const Trajectory& tr) {
  json w = json::array();
  for (const auto& win : tr.windows) {
    w.push_back({{"first_step", win.first_step},
                 {"last_step", win.last_step},
                 {"iterations", win.iterations},
                 {"distances", win.distances},
                 {"ratios", win.ratios}});
  }
  return w;
}

void write_path_artifacts(const std::string& dir, const SimConfig& cfg, const PathResult& res, const Trajectory* tr,
                          SnapshotFormat fmt) {
  fs::create_directories(dir);
  json m = {{"index", res.index}, {"seed", res.seed}, {"ok", res.ok}};
  if (!res.ok) {
    m["error"] = res.error;
    m["error_kind"] = res.error_kind;
  }
  if (tr != nullptr) {
    m["lipschitz_estimate"] = tr->lipschitz_estimate;
    m["window_length"] = tr->window_length;
    m["windows"] = window_json(*tr);
    m["clamped_mass"] = tr->clamped_mass;
    json snaps = json::array();
    if (cfg.diagnostics.snapshots) {
      fs::create_directories(dir + "/snapshots");
      for (int s : cfg.output_steps()) {
        if (s >= static_cast<int>(tr->size())) continue;
        char name[32];
        std::snprintf(name, sizeof name, "f_%05d", s);
        const std::string stem = dir + "/snapshots/" + name;
        if (fmt == SnapshotFormat::kBinary) {
          write_snapshot(stem, tr->fields[s]);
          snaps.push_back(std::string("snapshots/") + name + ".bin");
        } else {
          write_field_csv(stem + ".csv", tr->fields[s]);
          snaps.push_back(std::string("snapshots/") + name + ".csv");
        }
      }
    }
    m["snapshots"] = snaps;
  }
  std::ofstream(dir + "/manifest.json") << m.dump(2) << "\n";
  if (res.ok && cfg.diagnostics.balance) write_balance_csv(dir + "/balance.csv", res.balance);
}

}  // namespace

json EnsembleReport::to_json() const {
  json j;
  j["schema"] = "kspde.ensemble/1";
  j["config"] = config.to_json();
  j["paths"] = static_cast<int>(paths.size());
  j["failures"] = failures();
  json fm = json::array();
  for (const auto& o : final_means) fm.push_back({{"name", o.name}, {"mean", o.mean}, {"se", o.se}});
  j["final_means"] = fm;
  json mo = json::array();
  for (const auto& m : moments) {
    mo.push_back({{"p", m.p}, {"estimate", m.estimate}, {"se", m.se}, {"negative_bound", m.negative_bound}});
  }
  j["moments"] = mo;
  if (momentum) {
    json c = json::array();
    for (const auto& t : momentum->component) {
      c.push_back({{"lhs", t.lhs}, {"rhs", t.rhs}, {"se", t.se}, {"allowance", t.allowance}, {"z", t.z}});
    }
    j["momentum_balance"] = c;
  }
  if (energy) {
    const auto& t = energy->identity;
    j["energy_balance"] = {{"lhs", t.lhs},          {"rhs", t.rhs},
                           {"se", t.se},            {"allowance", t.allowance},
                           {"z", t.z},              {"paper_slack", energy->paper_slack},
                           {"paper_se", energy->paper_se}};
  }
  json pp = json::array();
  for (const auto& p : paths) {
    json e = {{"index", p.index}, {"seed", p.seed}, {"ok", p.ok}};
    if (p.ok) {
      e["windows"] = p.windows;
      e["iterations"] = p.iterations;
      e["max_ratio"] = p.max_ratio;
      e["final_mass"] = p.balance.mass.back();
      e["final_entropy"] = p.balance.entropy.back();
    } else {
      e["error"] = p.error;
    }
    pp.push_back(e);
  }
  j["per_path"] = pp;
  return j;
}

EnsembleReport run_ensemble(const SimConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const NoiseModel model = cfg.noise_model();
  std::optional<CollisionKernel> kernel;
  std::optional<CollisionOperator> op;
  if (cfg.collisions) {
    kernel.emplace(cfg.kernel);
    op.emplace(*kernel, VelocityGrid{2, cfg.grid.nv, cfg.grid.vmax});
  }
  const int N = cfg.n_steps();
  const int K = static_cast<int>(model.num_modes());

  EnsembleReport rep;
  rep.config = cfg;
  rep.paths.resize(cfg.M);
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    cfg.save(opts.out_dir + "/config.json");
  }

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < cfg.M; i = next++) {
      PathResult& res = rep.paths[i];
      res.index = i;
      res.seed = path_seed(cfg.seed, i);
      const auto t0 = std::chrono::steady_clock::now();
      const BrownianPath path = BrownianPath::sample(res.seed, cfg.dt, N, K);
      std::optional<Trajectory> tr;
      try {
        tr.emplace(run_path(cfg, model, op ? &*op : nullptr, path));
        res.balance = balance_report(*tr, model, path);
        res.windows = static_cast<int>(tr->windows.size());
        for (const auto& w : tr->windows) {
          res.iterations += w.iterations;
          res.max_ratio = std::max(res.max_ratio, w.max_ratio());
        }
        res.lipschitz = tr->lipschitz_estimate;
        for (const auto& f : tr->fields) res.negative_bound = std::max(res.negative_bound, entropy_pm(f).negative_bound);
        res.ok = true;
        if (opts.on_path) {
          PathContext ctx{i, res.seed, &cfg, &model, op ? &*op : nullptr, &path, &*tr};
          opts.on_path(ctx);
        }
      } catch (const InvariantViolation& e) {
        res.error = e.what();
        res.error_kind = e.kind;
      } catch (const ValidationError& e) {
        res.error = e.what();
        res.error_kind = "validation";
      }
      res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!opts.out_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "path_%04d", i);
        write_path_artifacts(opts.out_dir + "/paths/" + name, cfg, res, tr ? &*tr : nullptr, opts.format);
      }
    }
  };
  const int nt = std::min(resolve_threads(opts.threads), cfg.M);
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // Aggregation over successful paths.
  std::vector<BalanceReport> ok;
  std::vector<double> neg;
  for (const auto& p : rep.paths)
    if (p.ok) {
      ok.push_back(p.balance);
      neg.push_back(p.negative_bound);
    }
  auto summarize = [&](const std::string& name, auto get) {
    std::vector<double> xs;
    for (const auto& r : ok) xs.push_back(get(r));
    const MeanSe m = mean_se(xs);
    rep.final_means.push_back({name, m.mean, m.se});
  };
  if (!ok.empty()) {
    summarize("mass", [](const BalanceReport& r) { return r.mass.back(); });
    summarize("px", [](const BalanceReport& r) { return r.momentum.back()[0]; });
    summarize("py", [](const BalanceReport& r) { return r.momentum.back()[1]; });
    summarize("energy", [](const BalanceReport& r) { return r.energy.back(); });
    summarize("weighted_moment", [](const BalanceReport& r) { return r.weighted_moment.back(); });
    summarize("entropy", [](const BalanceReport& r) { return r.entropy.back(); });
    summarize("cum_dissipation", [](const BalanceReport& r) { return r.cum_dissipation.back(); });
    summarize("mass_residual", [](const BalanceReport& r) { return r.mass_residual.back(); });
    summarize("entropy_residual", [](const BalanceReport& r) { return r.entropy_residual.back(); });
    // Moment estimates from the per-step weighted log moments.
    for (double p : {1.0, 2.0, 4.0}) {
      std::vector<double> xs;
      MomentEstimate e;
      for (std::size_t i = 0; i < ok.size(); ++i) {
        const auto& w = ok[i].weighted_log_moment;
        xs.push_back(std::pow(*std::max_element(w.begin(), w.end()), p));
        e.negative_bound += std::pow(neg[i], p) / static_cast<double>(ok.size());
      }
      const MeanSe m = mean_se(xs);
      e.p = p;
      e.estimate = m.mean;
      e.se = m.se;
      rep.moments.push_back(e);
    }
  }
  if (ok.size() >= 2 && ok.front().has_integrals()) {
    rep.momentum = momentum_balance(ok);
    rep.energy = energy_balance(ok);
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  if (!opts.out_dir.empty()) {
    std::ofstream(opts.out_dir + "/summary.json") << rep.to_json().dump(2) << "\n";
    json timing = {{"wall_seconds", rep.wall_seconds}, {"threads", nt}};
    json per = json::array();
    for (const auto& p : rep.paths) per.push_back(p.seconds);
    timing["path_seconds"] = per;
    std::ofstream(opts.out_dir + "/timing.json") << timing.dump(2) << "\n";
  }
  return rep;
}

}  // namespace kspde
