#include "chrono_shield/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "chrono_shield/error.hpp"
#include "chrono_shield/image_io.hpp"
#include "chrono_shield/report.hpp"

namespace chrono_shield {

namespace fs = std::filesystem;

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return Rng::derive(seed, stream)(); }

struct AttackOutcome {
  bool attacked = false;
  ReportRow row;
  RasterImage adversarial;
};

AttackOutcome attack_one(const ScoringFunction& victim, const DatasetItem& item, std::size_t index,
                         const ExperimentConfig& config) {
  AttackOutcome out;
  const Prediction clean = victim(item.image);
  if (clean.label != item.label) return out;
  out.attacked = true;

  ReportRow& row = out.row;
  row.id = item.id;
  row.site = index;
  row.true_label = item.label;
  row.clean_label = clean.label;
  row.clean_confidence = clean.confidence;

  BinaryMask mask;
  try {
    mask = generate_mask(item.image, config.mask);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoContourFound) throw;
    mask = BinaryMask(item.image.width(), item.image.height(), true);
    row.mask_fallback = true;
    row.note = "no contour found, full-frame mask";
  }

  AttackConfig ac = config.attack;
  ac.pso.seed = stream_seed(config.attack.pso.seed, index);
  const AttackResult result = run_attack(item.image, mask, victim, item.label, ac);
  row.adv_label = result.adversarial_prediction.label;
  row.adv_confidence = result.adversarial_prediction.confidence;
  row.attack_success = result.success;
  row.iterations = result.iterations_used;
  row.queries = result.queries;
  out.adversarial = result.adversarial_image;
  return out;
}

void append_note(std::string& note, const std::string& text) {
  if (!note.empty()) note += "; ";
  note += text;
}

void save_weights_file(const ModelWeights& w, const fs::path& path) { write_file_atomic(path, save_weights(w)); }

void save_text(const std::string& text, const fs::path& path) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  train.seed = stream_seed(s, 1);
  attack.pso.seed = stream_seed(s, 2);
}

SignSite sign_site(std::size_t index) noexcept {
  const GeoPoint origin{37.4000, -122.1000};
  SignSite site;
  site.location = {origin.lat + 0.001 * static_cast<double>(index / 32),
                   origin.lon + 0.0012 * static_cast<double>(index % 32)};
  site.heading = static_cast<double>((index * 47) % 360);
  return site;
}

bool ReportRow::history_correct() const noexcept {
  if (voters.size() < 2) return false;
  return std::all_of(voters.begin() + 1, voters.end(), [&](const VoterRow& v) { return v.label == true_label; });
}

namespace {
double ratio(std::size_t num, std::size_t den) noexcept {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double ReportAggregates::clean_accuracy() const noexcept { return ratio(clean_correct, test_images); }
double ReportAggregates::attack_success_rate() const noexcept { return ratio(attack_successes, attacked); }
double ReportAggregates::defense_success_rate() const noexcept { return ratio(defended_correct, attack_successes); }
double ReportAggregates::baseline_defense_rate() const noexcept { return ratio(baseline_correct, attack_successes); }

ReportAggregates ExperimentReport::aggregates() const {
  ReportAggregates a;
  a.test_images = test_images;
  a.clean_correct = clean_correct;
  a.attacked = rows.size();
  for (const auto& r : rows) {
    if (!r.attack_success) continue;
    ++a.attack_successes;
    if (r.defense_correct()) ++a.defended_correct;
    if (r.baseline_correct()) ++a.baseline_correct;
    if (r.history_correct()) {
      ++a.history_correct;
      if (r.defense_correct()) ++a.defended_with_correct_history;
    }
  }
  return a;
}

void ExperimentReport::sort_rows() {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.id < b.id; });
}

ExperimentReport run_attack_sweep(const ModelWeights& model, std::span<const DatasetItem* const> test_items,
                                  const ExperimentConfig& config, std::vector<RasterImage>* adversarial,
                                  const ProgressFn& progress) {
  return run_attack_sweep(make_victim(model), test_items, config, adversarial, progress);
}

ExperimentReport run_attack_sweep(const ScoringFunction& victim, std::span<const DatasetItem* const> test_items,
                                  const ExperimentConfig& config, std::vector<RasterImage>* adversarial,
                                  const ProgressFn& progress) {
  std::vector<AttackOutcome> outcomes(test_items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < test_items.size(); i = next++) {
      try {
        outcomes[i] = attack_one(victim, *test_items[i], i, config);
      } catch (const Error& e) {
        // A per-image failure becomes a row note instead of aborting the sweep.
        outcomes[i].attacked = true;
        outcomes[i].row.id = test_items[i]->id;
        outcomes[i].row.site = i;
        outcomes[i].row.true_label = test_items[i]->label;
        outcomes[i].row.clean_label = test_items[i]->label;
        outcomes[i].row.adv_label = test_items[i]->label;
        outcomes[i].row.note = std::string("attack failed: ") + e.what();
        outcomes[i].adversarial = test_items[i]->image;
      }
      if (progress) progress("attacked " + test_items[i]->id);
    }
  };
  const int workers = std::clamp(config.attack_workers, 1, 64);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }

  ExperimentReport report;
  report.test_images = test_items.size();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].attacked) continue;
    ++report.clean_correct;
    report.rows.push_back(std::move(outcomes[i].row));
    if (adversarial) adversarial->push_back(std::move(outcomes[i].adversarial));
  }
  return report;
}

void build_archive(std::span<const DatasetItem* const> test_items, const ExperimentConfig& config,
                   const fs::path& root) {
  if (config.history_per_sign < 0) raise(ErrorCode::InvalidConfig, "history_per_sign must be >= 0");
  fs::create_directories(root / "images");
  ArchiveManifest manifest;
  for (std::size_t i = 0; i < test_items.size(); ++i) {
    const DatasetItem& item = *test_items[i];
    const SignSite site = sign_site(i);
    for (int k = 0; k < config.history_per_sign; ++k) {
      Rng rng = Rng::derive(config.seed ^ 0x5eedf00dULL, (static_cast<std::uint64_t>(i) << 8) | static_cast<std::uint64_t>(k));
      const Nuisance nuisance = sample_nuisance(rng);
      const RasterImage img = render_sign(item.label, nuisance, item.image.width()).image;

      ManifestEntry e;
      e.path = "images/" + item.id + "-h" + std::to_string(k) + ".png";
      e.date = Date{config.current_date.year - 1 - k, 1 + static_cast<int>((i + 5 * static_cast<std::size_t>(k)) % 12),
                    1 + static_cast<int>((7 * i + static_cast<std::size_t>(k)) % 28)};
      // Captures drift a few meters and degrees from the nominal site, as street-level photos do.
      e.location = offset_point(site.location, rng.uniform(0.0, 360.0), rng.uniform(0.0, 10.0));
      e.heading = std::fmod(site.heading + rng.uniform(-15.0, 15.0) + 360.0, 360.0);
      save_image(img, root / e.path);
      manifest.entries.push_back(std::move(e));
    }
  }
  save_text(serialize_manifest(manifest), root / "manifest.json");
}

void run_defense_sweep(ExperimentReport& report, std::span<const RasterImage> adversarial, const ModelWeights& model,
                       const ModelWeights* baseline, const fs::path& archive_root, const ExperimentConfig& config) {
  if (!fs::is_directory(archive_root)) raise(ErrorCode::MissingArchive, "no archive at " + archive_root.string());
  if (adversarial.size() != report.rows.size()) {
    raise(ErrorCode::InvalidArgument, "one current image per report row is required");
  }
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    ReportRow& row = report.rows[i];
    const SignSite site = sign_site(row.site);
    HistoryQuery q;
    q.location = site.location;
    q.heading = site.heading;
    q.max_records = static_cast<std::size_t>(std::max(config.history_per_sign, 0));
    q.before = config.current_date;

    HistoryResult history;
    if (q.max_records > 0) history = query_archive(archive_root, q, config.match);
    for (const auto& n : history.notes) append_note(row.note, n);

    const Verdict verdict = defend(adversarial[i], history.records, model, config.vote);
    row.defended = true;
    row.voted_label = verdict.voted_label;
    row.voted_confidence = verdict.voted_confidence;
    row.suspected_attack = verdict.suspected_attack;
    row.voters.clear();
    for (const Vote& v : verdict.votes) {
      row.voters.push_back({v.source, v.capture_date ? v.capture_date->iso() : std::string(), v.prediction.label,
                            v.prediction.confidence});
    }
    row.warnings.clear();
    for (VerdictWarning w : verdict.warnings) row.warnings.emplace_back(to_string(w));

    if (baseline) {
      const Prediction p = forward(*baseline, adversarial[i]);
      row.baseline_label = p.label;
      row.baseline_confidence = p.confidence;
    }
  }
}

std::vector<LabeledImage> shadow_augment(std::span<const LabeledImage> dataset, const AttackConfig& attack,
                                         std::uint64_t seed) {
  if (attack.vertices < 3) raise(ErrorCode::InvalidConfig, "shadow polygon needs >= 3 vertices");
  std::vector<LabeledImage> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledImage& s = dataset[i];
    Rng rng = Rng::derive(seed, i);
    ShadowSpec spec;
    spec.darkening = attack.darkening;
    for (int v = 0; v < attack.vertices; ++v) {
      const double x = rng.uniform();
      spec.vertices.push_back({x, rng.uniform()});
    }
    const BinaryMask frame(s.image.width(), s.image.height(), true);
    out.push_back({apply_shadow(s.image, frame, spec).image, s.label});
  }
  return out;
}

TrainResult train_adversarial_baseline(std::span<const LabeledImage> dataset, const ExperimentConfig& config,
                                       const EpochCallback& on_epoch) {
  const auto augmented = shadow_augment(dataset, config.attack, stream_seed(config.seed, 3));
  return train(augmented, config.train, on_epoch);
}

SweepResult run_sweep(const ExperimentConfig& config, const fs::path& out_dir, const ProgressFn& progress) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t) { return std::chrono::duration<double>(clock::now() - t).count(); };
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  const auto start = clock::now();
  SweepResult out;
  fs::create_directories(out_dir);

  say("synthesizing corpus");
  const LabeledImageSet data = synth_dataset(config.synth);
  const auto train_set = data.split(Split::train);
  const auto test_set = data.split(Split::test);
  const auto test_items = data.items_in(Split::test);

  say("training victim model");
  auto t0 = clock::now();
  const TrainResult victim = train(train_set, config.train, [&](int epoch, double loss) {
    say("  epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
  });
  out.train_seconds = seconds_since(t0);
  save_weights_file(victim.weights, out_dir / "model.csw");
  out.clean_test_accuracy = accuracy(victim.weights, test_set);
  say("clean test accuracy " + std::to_string(out.clean_test_accuracy));

  say("attacking test images");
  std::vector<RasterImage> adversarial;
  out.report = run_attack_sweep(victim.weights, test_items, config, &adversarial, progress);

  say("building historical archive");
  build_archive(test_items, config, out_dir / "archive");

  std::optional<ModelWeights> baseline;
  if (config.adversarial_baseline) {
    say("training adversarial-training baseline");
    t0 = clock::now();
    baseline = train_adversarial_baseline(train_set, config, [&](int epoch, double loss) {
                 say("  epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
               }).weights;
    out.baseline_train_seconds = seconds_since(t0);
    save_weights_file(*baseline, out_dir / "baseline.csw");
  }

  say("running time-travel defense");
  run_defense_sweep(out.report, adversarial, victim.weights, baseline ? &*baseline : nullptr, out_dir / "archive",
                    config);

  fs::create_directories(out_dir / "adversarial");
  for (std::size_t i = 0; i < adversarial.size(); ++i) {
    save_image(adversarial[i], out_dir / "adversarial" / (out.report.rows[i].id + ".png"));
  }
  out.report.sort_rows();
  save_text(emit_report(out.report, ReportFormat::csv), out_dir / "report.csv");
  save_text(emit_report(out.report, ReportFormat::json), out_dir / "report.json");
  save_text(emit_report(out.report, ReportFormat::text), out_dir / "report.txt");
  out.sweep_seconds = seconds_since(start);
  return out;
}

}  // namespace chrono_shield
