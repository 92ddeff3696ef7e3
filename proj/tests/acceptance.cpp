// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/error.hpp"
#include "chrono_shield/experiment.hpp"
#include "chrono_shield/fixture_server.hpp"
#include "chrono_shield/history_client.hpp"
#include "chrono_shield/image_io.hpp"
#include "chrono_shield/mask.hpp"
#include "chrono_shield/pso.hpp"
#include "chrono_shield/report.hpp"
#include "pso_oracle.hpp"
#include "shadow_oracle.hpp"
#include "shape_oracle.hpp"
#include "vote_oracle.hpp"

namespace fs = std::filesystem;
using namespace chrono_shield;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

std::string pct(double r) { return format_percent(r) + "%"; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---- library-level criteria ------------------------------------------------

Outcome gradient_check() {
  SynthConfig sc;
  sc.train_per_class = 1;
  sc.test_per_class = 1;
  const LabeledImageSet set = synth_dataset(sc);
  const ModelWeights w = init_weights(Architecture{}, 2024);
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  for (int k = 0; k < 3; ++k) {
    const auto& item = set.items[static_cast<std::size_t>(k * 5)];
    GradCheckOptions opt;
    opt.sample_params = 600;
    opt.seed = static_cast<std::uint64_t>(k + 1);
    const GradCheckResult r = grad_check(w, {item.image, item.label}, 1e-4, opt);
    worst = std::max(worst, r.max_relative_error);
    checked = std::min(checked == 0 ? r.params_checked : checked, r.params_checked);
    skipped += r.kinks_skipped;
  }
  return {worst <= 1e-3 && checked >= 500,
          "max relative error " + fmt("%.3g", worst) + " over " + std::to_string(checked) + " params per sample, eps 1e-4 (" + std::to_string(skipped) + " kink-straddling probes replaced)"};
}

Outcome pso_oracle() {
  int passed = 0;
  for (int run = 0; run < 20; ++run) {
    Rng rng(Rng::derive(4242, static_cast<std::uint64_t>(run)));
    const cs_test::GridObjective g = cs_test::make_grid_objective(run, rng);
    PsoConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(1000 + run);
    const PsoResult r = pso_minimize(std::cref(g), 2, cfg);
    if (r.best_fitness <= 1.05 * g.exhaustive_min()) ++passed;
  }
  return {passed >= 18, std::to_string(passed) + "/20 runs within 5% of the exhaustive 64x64 minimum"};
}

Outcome mask_fidelity() {
  Rng rng(777);
  double worst = 1.0;
  int below = 0;
  std::string worst_kind;
  for (int i = 0; i < 200; ++i) {
    const cs_test::ShapeCase s = cs_test::random_shape(rng);
    double iou = 0.0;
    try {
      iou = intersection_over_union(generate_mask(s.image), s.truth);
    } catch (const chrono_shield::Error&) {
      iou = 0.0;
    }
    if (iou < 0.85) ++below;
    if (iou < worst) {
      worst = iou;
      worst_kind = s.kind;
    }
  }
  bool blank_raises = false;
  try {
    generate_mask(RasterImage(96, 96, 3));
  } catch (const chrono_shield::Error& e) {
    blank_raises = e.code() == ErrorCode::NoContourFound;
  }
  return {below == 0 && blank_raises, "200 shapes, min IoU " + fmt("%.4f", worst) + " (" + worst_kind + "), " +
                                          std::to_string(below) + " below 0.85; blank input " +
                                          (blank_raises ? "raises NoContourFound" : "did not raise NoContourFound")};
}

Outcome vote_properties() {
  Rng rng(8080);
  const int perm = cs_test::permutation_violations(rng, 1000);
  const int dup = cs_test::duplicate_winner_violations(rng, 1000);
  const int imm = cs_test::corrupted_voter_violations(rng, 1000);
  return {perm == 0 && dup == 0 && imm == 0, "violations over 1000 cases each: permutation " + std::to_string(perm) +
                                                 ", duplicate winner " + std::to_string(dup) + ", corrupted voter " +
                                                 std::to_string(imm)};
}

Outcome shadow_locality() {
  Rng rng(9090);
  int bad = 0, nontrivial = 0;
  std::string first;
  for (int i = 0; i < 1000; ++i) {
    const auto r = cs_test::check_shadow_locality(rng);
    if (!r.ok) {
      ++bad;
      if (first.empty()) first = r.detail;
    }
    if (r.changed > 0) ++nontrivial;
  }
  return {bad == 0, "1000 triples, " + std::to_string(bad) + " violations, " + std::to_string(nontrivial) +
                        " with changed pixels" + (first.empty() ? "" : "; first: " + first)};
}

double cosine_law_meters(const GeoPoint& a, const GeoPoint& b) {
  const double la = a.lat * M_PI / 180, lb = b.lat * M_PI / 180, dl = (b.lon - a.lon) * M_PI / 180;
  const double c = std::sin(la) * std::sin(lb) + std::cos(la) * std::cos(lb) * std::cos(dl);
  return 6371000.0 * std::acos(std::clamp(c, -1.0, 1.0));
}

Outcome history_client(const fs::path& work) {
  const fs::path root = work / "history_fixture";
  fs::remove_all(root);
  fs::create_directories(root / "archive");
  Rng rng(515);
  const GeoPoint sign{37.41, -122.09};
  ArchiveManifest m;
  for (int i = 0; i < 40; ++i) {
    ManifestEntry e;
    e.path = "img" + std::to_string(i) + ".png";
    e.date = Date{2012 + static_cast<int>(rng.below(10)), 1 + static_cast<int>(rng.below(12)),
                  1 + static_cast<int>(rng.below(28))};
    e.location = offset_point(sign, rng.uniform(0, 360), rng.uniform(0, 60));
    e.heading = rng.uniform(0, 360);
    RasterImage img(10, 10, 3);
    for (auto& b : img.data()) b = static_cast<std::uint8_t>(rng.below(256));
    save_image(img, root / "archive" / e.path);
    m.entries.push_back(e);
  }
  std::ofstream(root / "archive" / "manifest.json") << serialize_manifest(m);

  FixtureServer server(root / "archive");
  server.start();
  RemoteOptions opt;
  opt.cache_dir = root / "cache";
  int queries = 0, returned = 0, violations = 0, warm_hits = 0;
  for (int k = 0; k < 12; ++k) {
    HistoryQuery q;
    q.location = sign;
    q.heading = rng.uniform(0, 360);
    q.max_records = 1 + rng.below(6);
    if (k % 2) q.before = Date{2017, 1, 1};

    // Brute-force expectation over the manifest.
    std::vector<ManifestEntry> want;
    for (const auto& e : m.entries) {
      double dh = std::fmod(std::abs(e.heading - q.heading), 360.0);
      dh = std::min(dh, 360.0 - dh);
      if (cosine_law_meters(e.location, q.location) <= 25.0 && dh <= 45.0 && (!q.before || e.date < *q.before)) {
        want.push_back(e);
      }
    }
    std::sort(want.begin(), want.end(),
              [](const auto& a, const auto& b) { return a.date != b.date ? a.date > b.date : a.path < b.path; });
    if (want.size() > q.max_records) want.resize(q.max_records);

    const HistoryResult cold = query_remote(server.endpoint(), q, opt);
    ++queries;
    returned += static_cast<int>(cold.records.size());
    bool ok = cold.records.size() == want.size() && !cold.partial();
    for (std::size_t i = 0; ok && i < want.size(); ++i) {
      const auto& r = cold.records[i];
      ok = r.capture_date == want[i].date && r.location == want[i].location &&
           r.image == to_rgb(load_image(root / "archive" / want[i].path));
      if (i > 0) ok = ok && cold.records[i - 1].capture_date >= r.capture_date;
    }
    server.reset_hits();
    const HistoryResult warm = query_remote(server.endpoint(), q, opt);
    warm_hits += static_cast<int>(server.hits());
    ok = ok && warm.from_cache && warm.records.size() == cold.records.size();
    for (std::size_t i = 0; ok && i < warm.records.size(); ++i) {
      ok = warm.records[i].image == cold.records[i].image && warm.records[i].capture_date == cold.records[i].capture_date;
    }
    if (!ok) ++violations;
  }
  server.stop();
  return {violations == 0 && warm_hits == 0 && returned > 0,
          std::to_string(queries) + " fixture queries (" + std::to_string(returned) + " records) matched the " +
              "haversine/heading/date oracle newest-first, " + std::to_string(violations) + " mismatches; warm-cache hits " +
              std::to_string(warm_hits)};
}

// ---- sweep-level criteria --------------------------------------------------

struct SweepRuns {
  bool ok = false;
  std::string error;
  SweepResult lib;
  fs::path lib_dir, cli_dir;
  double cli_seconds = 0.0;
  int cli_status = -1;
};

SweepRuns run_sweeps(const fs::path& work) {
  SweepRuns s;
  s.lib_dir = work / "sweep-lib";
  s.cli_dir = work / "sweep-cli";
  fs::remove_all(s.lib_dir);
  fs::remove_all(s.cli_dir);
  try {
    ExperimentConfig cfg;
    cfg.apply_seed(7);
    std::cout << "running sweep --seed 7 (library) ..." << std::endl;
    s.lib = run_sweep(cfg, s.lib_dir);
    std::cout << "running sweep --seed 7 (cli) ..." << std::endl;
    const std::string cmd = std::string("\"") + CHRONO_SHIELD_CLI + "\" --seed 7 -q --out \"" + s.cli_dir.string() +
                            "\" sweep --format csv > \"" + (work / "sweep-cli.stdout").string() + "\"";
    const auto t0 = std::chrono::steady_clock::now();
    s.cli_status = std::system(cmd.c_str());
    s.cli_seconds = seconds_since(t0);
    s.ok = true;
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  return s;
}

Outcome defense_effectiveness(const SweepRuns& s) {
  const auto& rep = s.lib.report;
  const ReportAggregates a = rep.aggregates();
  std::size_t full_history = 0;
  for (const auto& r : rep.rows) full_history += r.voters.size() == 4;
  const bool enough = a.attacked >= 50;
  const bool three_voters = full_history == rep.rows.size();
  const bool exact = a.defended_with_correct_history == a.history_correct;
  const bool overall = a.defense_success_rate() >= 0.95;
  const bool fast = s.lib.sweep_seconds <= 600.0;
  return {enough && three_voters && exact && overall && fast,
          std::to_string(a.attack_successes) + " successful attacks over " + std::to_string(a.attacked) +
              " attacked images, 3 historical voters on " + std::to_string(full_history) + "/" +
              std::to_string(rep.rows.size()) + "; defended " + std::to_string(a.defended_with_correct_history) + "/" +
              std::to_string(a.history_correct) + " with all voters correct; overall defense rate " +
              pct(a.defense_success_rate()) + "; sweep runtime " + fmt("%.0fs", s.lib.sweep_seconds)};
}

Outcome attack_viability(const SweepRuns& s) {
  const fs::path model_path = s.lib_dir / "model.csw";
  const ModelWeights model = load_weights(read_file(model_path));
  ExperimentConfig cfg;
  cfg.apply_seed(7);
  const LabeledImageSet set = synth_dataset(cfg.synth);
  const auto test = set.items_in(Split::test);

  std::vector<double> rates{s.lib.report.aggregates().attack_success_rate()};
  for (std::uint64_t extra : {8u, 9u}) {
    ExperimentConfig c = cfg;
    c.attack.pso.seed = Rng::derive(extra, 2)();
    std::cout << "attack sweep with PSO seed stream " << extra << " ..." << std::endl;
    rates.push_back(run_attack_sweep(model, test, c).aggregates().attack_success_rate());
  }
  int passing = 0;
  std::string detail = "success rates";
  for (double r : rates) {
    passing += r >= 0.60;
    detail += " " + pct(r);
  }
  detail += " (swarm " + std::to_string(cfg.attack.pso.swarm_size) + ", " + std::to_string(cfg.attack.pso.iterations) +
            " iterations); " + std::to_string(passing) + "/3 seeds at >= 60%";
  return {passing >= 2, detail};
}

Outcome baseline_between(const SweepRuns& s) {
  const ReportAggregates a = s.lib.report.aggregates();
  const double b = a.baseline_defense_rate(), d = a.defense_success_rate();
  return {b > 0.0 && b < d, "adversarial-training baseline " + pct(b) + " (" + std::to_string(a.baseline_correct) + "/" +
                                std::to_string(a.attack_successes) + ") vs time-travel " + pct(d)};
}

Outcome clean_quality(const SweepRuns& s) {
  ExperimentConfig cfg;
  const bool ok = s.lib.clean_test_accuracy >= 0.95 && s.lib.train_seconds <= 300.0 && cfg.train.epochs <= 30;
  return {ok, "test accuracy " + pct(s.lib.clean_test_accuracy) + " after " + std::to_string(cfg.train.epochs) +
                  " epochs, training " + fmt("%.0fs", s.lib.train_seconds)};
}

Outcome determinism(const SweepRuns& s) {
  if (s.cli_status != 0) return {false, "cli sweep exited with status " + std::to_string(s.cli_status)};
  const std::string a = read_all(s.lib_dir / "report.csv");
  const std::string b = read_all(s.cli_dir / "report.csv");
  const std::string out = read_all(s.cli_dir.parent_path() / "sweep-cli.stdout");
  const bool same = !a.empty() && a == b && out == b;
  return {same, std::to_string(a.size()) + "-byte report.csv " + (same ? "identical" : "differs") +
                    " across two sweep --seed 7 runs (cli run " + fmt("%.0fs", s.cli_seconds) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "chrono-shield-acceptance";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--work-dir") work = argv[i + 1];
  }
  fs::create_directories(work);

  report(5, "gradient correctness", guarded(gradient_check));
  report(6, "PSO vs grid oracle", guarded(pso_oracle));
  report(7, "mask fidelity", guarded(mask_fidelity));
  report(8, "vote properties", guarded(vote_properties));
  report(9, "shadow locality", guarded(shadow_locality));
  report(10, "history client", guarded([&] { return history_client(work); }));

  const SweepRuns runs = run_sweeps(work);
  auto needs_sweep = [&](const std::function<Outcome()>& fn) {
    return runs.ok ? guarded(fn) : Outcome{false, "sweep failed: " + runs.error};
  };
  report(1, "defense effectiveness", needs_sweep([&] { return defense_effectiveness(runs); }));
  report(2, "attack viability", needs_sweep([&] { return attack_viability(runs); }));
  report(3, "adversarial-training baseline", needs_sweep([&] { return baseline_between(runs); }));
  report(4, "clean-model quality", needs_sweep([&] { return clean_quality(runs); }));
  report(11, "determinism", needs_sweep([&] { return determinism(runs); }));

  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
